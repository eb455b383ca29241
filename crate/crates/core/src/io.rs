//! File formats: binary feature files, versioned model files, CSV import.
//!
//! Feature file layout (little-endian): magic `FVK1`, `u32` version, `u64 T`,
//! `u64 d`, then `T*d` `f32` values row-major. Model files share the magic
//! and version and add a `u32` type tag before the typed payload (stored as
//! `f64`). Every numeric payload is length-checked against the file size
//! before anything is allocated.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::types::{Dictionary, FeatureSet, GmmModel, PcaModel, SvmModel};

pub const MAGIC: [u8; 4] = *b"FVK1";
pub const FORMAT_VERSION: u32 = 1;

const TAG_DICTIONARY: u32 = 1;
const TAG_GMM: u32 = 2;
const TAG_PCA: u32 = 3;
const TAG_SVM: u32 = 4;

/// Any serializable trained model.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Dictionary(Dictionary),
    Gmm(GmmModel),
    Pca(PcaModel),
    Svm(SvmModel),
}

fn check_header<R: Read>(reader: &mut R) -> Result<()> {
    let mut magic = [0u8; 4];
    reader.read_exact(&mut magic)?;
    if magic != MAGIC {
        return Err(Error::Format(format!(
            "bad magic {:?}, expected {:?}",
            magic, MAGIC
        )));
    }
    let version = reader.read_u32::<LittleEndian>()?;
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "unsupported format version {version}, expected {FORMAT_VERSION}"
        )));
    }
    Ok(())
}

/// Checks the file is exactly header plus payload before anything is
/// allocated. Dimension fields large enough to overflow the size arithmetic
/// can only come from corrupt headers and are rejected the same way.
fn expect_payload(
    path: &Path,
    header_bytes: u64,
    value_count: Option<u64>,
    value_size: u64,
) -> Result<()> {
    let actual = std::fs::metadata(path)?.len();
    let expected = value_count
        .and_then(|count| count.checked_mul(value_size))
        .and_then(|payload| payload.checked_add(header_bytes));
    match expected {
        Some(expected) if expected == actual => Ok(()),
        _ => Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::UnexpectedEof,
            format!("payload length mismatch: file is {actual} bytes"),
        ))),
    }
}

/// Reads a binary feature file.
pub fn read_features<P: AsRef<Path>>(path: P) -> Result<FeatureSet> {
    let path = path.as_ref();
    let mut reader = BufReader::new(File::open(path)?);
    check_header(&mut reader)?;
    let t = reader.read_u64::<LittleEndian>()?;
    let d = reader.read_u64::<LittleEndian>()?;
    if t == 0 || d == 0 {
        return Err(Error::Format(format!("empty feature set: T={t}, d={d}")));
    }
    expect_payload(path, 24, t.checked_mul(d), 4)?;

    let count = (t * d) as usize;
    let mut payload = vec![0f32; count];
    reader.read_f32_into::<LittleEndian>(&mut payload)?;
    let data = Array2::from_shape_vec((t as usize, d as usize), payload)
        .expect("shape checked against payload length")
        .mapv(f64::from);
    FeatureSet::new(data)
}

/// Writes a binary feature file. Values are stored as `f32`.
pub fn write_features<P: AsRef<Path>>(features: &FeatureSet, path: P) -> Result<()> {
    let mut writer = BufWriter::new(File::create(path)?);
    writer.write_all(&MAGIC)?;
    writer.write_u32::<LittleEndian>(FORMAT_VERSION)?;
    writer.write_u64::<LittleEndian>(features.count() as u64)?;
    writer.write_u64::<LittleEndian>(features.dim() as u64)?;
    for v in features.data().iter() {
        writer.write_f32::<LittleEndian>(*v as f32)?;
    }
    writer.flush()?;
    Ok(())
}

/// Imports features from CSV: one feature per line, comma-separated values.
pub fn read_features_csv<P: AsRef<Path>>(path: P) -> Result<FeatureSet> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path.as_ref())?;
    let mut rows: Vec<f64> = Vec::new();
    let mut dim = None;
    let mut count = 0usize;
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let d = dim.get_or_insert(record.len());
        if record.len() != *d {
            return Err(Error::Format(format!(
                "csv row {} has {} fields, expected {}",
                line + 1,
                record.len(),
                d
            )));
        }
        for field in record.iter() {
            let value: f64 = field
                .parse()
                .map_err(|_| Error::Format(format!("csv row {}: bad number {field:?}", line + 1)))?;
            rows.push(value);
        }
        count += 1;
    }
    let dim = dim.unwrap_or(0);
    if count == 0 || dim == 0 {
        return Err(Error::Format("empty feature csv".into()));
    }
    let data = Array2::from_shape_vec((count, dim), rows).expect("row-major rows");
    FeatureSet::new(data)
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        match err.kind() {
            csv::ErrorKind::Io(_) => {
                if let csv::ErrorKind::Io(io) = err.into_kind() {
                    Error::Io(io)
                } else {
                    unreachable!()
                }
            }
            _ => Error::Format(err.to_string()),
        }
    }
}

fn write_f64_slice<W: Write>(writer: &mut W, values: impl IntoIterator<Item = f64>) -> Result<()> {
    for v in values {
        writer.write_f64::<LittleEndian>(v)?;
    }
    Ok(())
}

fn read_array2<R: Read>(reader: &mut R, rows: usize, cols: usize) -> Result<Array2<f64>> {
    let mut buf = vec![0f64; rows * cols];
    reader.read_f64_into::<LittleEndian>(&mut buf)?;
    Ok(Array2::from_shape_vec((rows, cols), buf).expect("length checked"))
}

fn read_array1<R: Read>(reader: &mut R, len: usize) -> Result<Array1<f64>> {
    let mut buf = vec![0f64; len];
    reader.read_f64_into::<LittleEndian>(&mut buf)?;
    Ok(Array1::from_vec(buf))
}

/// Saves any trained model with a versioned, type-tagged header.
pub fn save_model<P: AsRef<Path>>(model: &Model, path: P) -> Result<()> {
    let mut writer = BufWriter::new(File::create(path)?);
    writer.write_all(&MAGIC)?;
    writer.write_u32::<LittleEndian>(FORMAT_VERSION)?;
    match model {
        Model::Dictionary(dict) => {
            writer.write_u32::<LittleEndian>(TAG_DICTIONARY)?;
            writer.write_u64::<LittleEndian>(dict.dim() as u64)?;
            writer.write_u64::<LittleEndian>(dict.atoms() as u64)?;
            write_f64_slice(&mut writer, dict.basis().iter().copied())?;
        }
        Model::Gmm(gmm) => {
            writer.write_u32::<LittleEndian>(TAG_GMM)?;
            writer.write_u64::<LittleEndian>(gmm.components() as u64)?;
            writer.write_u64::<LittleEndian>(gmm.dim() as u64)?;
            writer.write_f64::<LittleEndian>(gmm.var_floor())?;
            write_f64_slice(&mut writer, gmm.weights().iter().copied())?;
            write_f64_slice(&mut writer, gmm.means().iter().copied())?;
            write_f64_slice(&mut writer, gmm.variances().iter().copied())?;
        }
        Model::Pca(pca) => {
            writer.write_u32::<LittleEndian>(TAG_PCA)?;
            writer.write_u64::<LittleEndian>(pca.input_dim() as u64)?;
            writer.write_u64::<LittleEndian>(pca.output_dim() as u64)?;
            writer.write_u32::<LittleEndian>(u32::from(pca.whiten()))?;
            write_f64_slice(&mut writer, pca.mean().iter().copied())?;
            write_f64_slice(&mut writer, pca.components().iter().copied())?;
            write_f64_slice(&mut writer, pca.eigenvalues().iter().copied())?;
        }
        Model::Svm(svm) => {
            writer.write_u32::<LittleEndian>(TAG_SVM)?;
            writer.write_u64::<LittleEndian>(svm.classes() as u64)?;
            writer.write_u64::<LittleEndian>(svm.dim() as u64)?;
            write_f64_slice(&mut writer, svm.weights().iter().copied())?;
            write_f64_slice(&mut writer, svm.bias().iter().copied())?;
        }
    }
    writer.flush()?;
    Ok(())
}

/// Loads any model file, dispatching on the type tag.
pub fn load_model<P: AsRef<Path>>(path: P) -> Result<Model> {
    let path = path.as_ref();
    let mut reader = BufReader::new(File::open(path)?);
    check_header(&mut reader)?;
    let tag = reader.read_u32::<LittleEndian>()?;
    match tag {
        TAG_DICTIONARY => {
            let d = reader.read_u64::<LittleEndian>()?;
            let k = reader.read_u64::<LittleEndian>()?;
            expect_payload(path, 28, d.checked_mul(k), 8)?;
            let (d, k) = (d as usize, k as usize);
            let basis = read_array2(&mut reader, d, k)?;
            Ok(Model::Dictionary(Dictionary::new(basis)?))
        }
        TAG_GMM => {
            let m = reader.read_u64::<LittleEndian>()?;
            let d = reader.read_u64::<LittleEndian>()?;
            let count = m
                .checked_mul(d)
                .and_then(|md| md.checked_mul(2))
                .and_then(|v| v.checked_add(1 + m));
            expect_payload(path, 28, count, 8)?;
            let (m, d) = (m as usize, d as usize);
            let var_floor = reader.read_f64::<LittleEndian>()?;
            let weights = read_array1(&mut reader, m)?;
            let means = read_array2(&mut reader, m, d)?;
            let variances = read_array2(&mut reader, m, d)?;
            Ok(Model::Gmm(GmmModel::new(weights, means, variances, var_floor)?))
        }
        TAG_PCA => {
            let d = reader.read_u64::<LittleEndian>()?;
            let out = reader.read_u64::<LittleEndian>()?;
            let count = d
                .checked_mul(out)
                .and_then(|dout| dout.checked_add(d))
                .and_then(|v| v.checked_add(out));
            expect_payload(path, 32, count, 8)?;
            let (d, out) = (d as usize, out as usize);
            let whiten = reader.read_u32::<LittleEndian>()? != 0;
            let mean = read_array1(&mut reader, d)?;
            let components = read_array2(&mut reader, d, out)?;
            let eigenvalues = read_array1(&mut reader, out)?;
            Ok(Model::Pca(PcaModel::new(mean, components, eigenvalues, whiten)?))
        }
        TAG_SVM => {
            let classes = reader.read_u64::<LittleEndian>()?;
            let dim = reader.read_u64::<LittleEndian>()?;
            let count = classes
                .checked_mul(dim)
                .and_then(|cd| cd.checked_add(classes));
            expect_payload(path, 28, count, 8)?;
            let (classes, dim) = (classes as usize, dim as usize);
            let weights = read_array2(&mut reader, classes, dim)?;
            let bias = read_array1(&mut reader, classes)?;
            Ok(Model::Svm(SvmModel::new(weights, bias)?))
        }
        other => Err(Error::Format(format!("unknown model type tag {other}"))),
    }
}

macro_rules! typed_loader {
    ($name:ident, $variant:ident, $ty:ty, $label:expr) => {
        pub fn $name<P: AsRef<Path>>(path: P) -> Result<$ty> {
            match load_model(path)? {
                Model::$variant(m) => Ok(m),
                other => Err(Error::Format(format!(
                    concat!("expected a ", $label, " model, found {}"),
                    model_kind(&other)
                ))),
            }
        }
    };
}

fn model_kind(model: &Model) -> &'static str {
    match model {
        Model::Dictionary(_) => "dictionary",
        Model::Gmm(_) => "gmm",
        Model::Pca(_) => "pca",
        Model::Svm(_) => "svm",
    }
}

typed_loader!(load_dictionary, Dictionary, Dictionary, "dictionary");
typed_loader!(load_gmm, Gmm, GmmModel, "gmm");
typed_loader!(load_pca, Pca, PcaModel, "pca");
typed_loader!(load_svm, Svm, SvmModel, "svm");

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use tempfile::tempdir;

    fn roundtrip_features(fs: &FeatureSet) -> FeatureSet {
        let dir = tempdir().unwrap();
        let path = dir.path().join("f.fvk");
        write_features(fs, &path).unwrap();
        read_features(&path).unwrap()
    }

    #[test]
    fn feature_roundtrip_is_exact_for_f32_values() {
        let fs = FeatureSet::new(array![[1.5, -2.25, 0.0], [3.0, 0.125, -7.5]]).unwrap();
        assert_eq!(roundtrip_features(&fs), fs);
    }

    #[test]
    fn feature_file_size_matches_header_plus_payload() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("f.fvk");
        let fs = FeatureSet::new(Array2::zeros((50, 20))).unwrap();
        write_features(&fs, &path).unwrap();
        assert_eq!(std::fs::metadata(&path).unwrap().len(), 24 + 50 * 20 * 4);
    }

    #[test]
    fn bad_magic_is_rejected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("f.fvk");
        std::fs::write(&path, b"NOPE\x01\x00\x00\x00").unwrap();
        match read_features(&path) {
            Err(Error::Format(msg)) => assert!(msg.contains("magic")),
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn version_mismatch_is_rejected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("f.fvk");
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&MAGIC);
        bytes.extend_from_slice(&99u32.to_le_bytes());
        bytes.extend_from_slice(&1u64.to_le_bytes());
        bytes.extend_from_slice(&1u64.to_le_bytes());
        bytes.extend_from_slice(&1f32.to_le_bytes());
        std::fs::write(&path, bytes).unwrap();
        match read_features(&path) {
            Err(Error::Format(msg)) => assert!(msg.contains("version")),
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn zero_count_header_is_rejected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("f.fvk");
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&MAGIC);
        bytes.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        bytes.extend_from_slice(&0u64.to_le_bytes());
        bytes.extend_from_slice(&3u64.to_le_bytes());
        std::fs::write(&path, bytes).unwrap();
        match read_features(&path) {
            Err(Error::Format(msg)) => assert!(msg.contains("empty feature set")),
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn truncated_payload_is_io_error() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("f.fvk");
        let fs = FeatureSet::new(array![[1.0, 2.0], [3.0, 4.0]]).unwrap();
        write_features(&fs, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 4]).unwrap();
        assert!(matches!(read_features(&path), Err(Error::Io(_))));
        // trailing garbage is also a payload length mismatch
        let mut extended = bytes.clone();
        extended.extend_from_slice(&[0u8; 4]);
        std::fs::write(&path, extended).unwrap();
        assert!(matches!(read_features(&path), Err(Error::Io(_))));
    }

    #[test]
    fn nan_payload_is_data_error() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("f.fvk");
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&MAGIC);
        bytes.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        bytes.extend_from_slice(&1u64.to_le_bytes());
        bytes.extend_from_slice(&2u64.to_le_bytes());
        bytes.extend_from_slice(&1f32.to_le_bytes());
        bytes.extend_from_slice(&f32::NAN.to_le_bytes());
        std::fs::write(&path, bytes).unwrap();
        assert!(matches!(read_features(&path), Err(Error::Data(_))));
    }

    #[test]
    fn model_roundtrips_bit_exact() {
        let dir = tempdir().unwrap();

        let dict = Dictionary::new(array![[0.6, 0.0], [0.8, 1.0]]).unwrap();
        let path = dir.path().join("dict.fvkm");
        save_model(&Model::Dictionary(dict.clone()), &path).unwrap();
        assert_eq!(load_dictionary(&path).unwrap(), dict);

        let gmm = GmmModel::new(
            array![0.25, 0.75],
            array![[0.0, 1.0], [2.0, -1.0]],
            array![[1.0, 0.5], [0.25, 2.0]],
            1e-8,
        )
        .unwrap();
        let path = dir.path().join("gmm.fvkm");
        save_model(&Model::Gmm(gmm.clone()), &path).unwrap();
        let loaded = load_gmm(&path).unwrap();
        assert_eq!(loaded, gmm);
        assert_eq!(loaded.weights().sum(), 1.0);

        let pca = PcaModel::new(
            array![0.5, -0.5],
            array![[1.0], [0.0]],
            array![2.0],
            false,
        )
        .unwrap();
        let path = dir.path().join("pca.fvkm");
        save_model(&Model::Pca(pca.clone()), &path).unwrap();
        assert_eq!(load_pca(&path).unwrap(), pca);

        let svm = SvmModel::new(array![[1.0, 2.0], [-1.0, 0.5]], array![0.1, -0.2]).unwrap();
        let path = dir.path().join("svm.fvkm");
        save_model(&Model::Svm(svm.clone()), &path).unwrap();
        assert_eq!(load_svm(&path).unwrap(), svm);
    }

    #[test]
    fn wrong_model_type_is_format_error() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("dict.fvkm");
        let dict = Dictionary::new(array![[1.0], [0.0]]).unwrap();
        save_model(&Model::Dictionary(dict), &path).unwrap();
        assert!(matches!(load_gmm(&path), Err(Error::Format(_))));
    }

    #[test]
    fn csv_import_parses_rows() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("f.csv");
        std::fs::write(&path, "1.0,2.0,3.0\n4.0,5.0,6.0\n").unwrap();
        let fs = read_features_csv(&path).unwrap();
        assert_eq!(fs.count(), 2);
        assert_eq!(fs.dim(), 3);
        assert_eq!(fs.data()[[1, 2]], 6.0);

        std::fs::write(&path, "1.0,2.0\n3.0\n").unwrap();
        assert!(matches!(read_features_csv(&path), Err(Error::Format(_))));
    }
}
