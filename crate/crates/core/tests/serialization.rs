//! Property tests for the file formats: round trips are bit-exact and
//! corrupted headers never load.

use fvkit_core::io::{
    load_model, read_features, save_model, write_features, Model, FORMAT_VERSION, MAGIC,
};
use fvkit_core::{Dictionary, FeatureSet, GmmModel};
use ndarray::{Array1, Array2};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn feature_files_roundtrip_f32_values(
        rows in 1usize..8,
        cols in 1usize..8,
        seed in proptest::collection::vec(-1e6f32..1e6, 64)
    ) {
        let data = Array2::from_shape_fn((rows, cols), |(i, j)| {
            f64::from(seed[(i * cols + j) % seed.len()])
        });
        let fs = FeatureSet::new(data).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.fvk");
        write_features(&fs, &path).unwrap();
        let back = read_features(&path).unwrap();
        prop_assert_eq!(&back, &fs);

        // re-writing what was read gives identical bytes
        let path2 = dir.path().join("g.fvk");
        write_features(&back, &path2).unwrap();
        prop_assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&path2).unwrap());
    }

    #[test]
    fn corrupting_any_header_byte_is_rejected(byte in 0usize..24, flip in 1u8..255) {
        let fs = FeatureSet::new(Array2::from_elem((2, 3), 1.0)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.fvk");
        write_features(&fs, &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[byte] ^= flip;
        std::fs::write(&path, &bytes).unwrap();
        // any header corruption must surface as an error, never as data
        prop_assert!(read_features(&path).is_err());
    }

    #[test]
    fn dictionary_files_roundtrip_exactly(
        dim in 1usize..6,
        atoms in 1usize..6,
        seed in proptest::collection::vec(0.01f64..1.0, 36)
    ) {
        let mut basis = Array2::from_shape_fn((dim, atoms), |(i, j)| {
            seed[(i * atoms + j) % seed.len()] - 0.5
        });
        for mut col in basis.columns_mut() {
            let norm = col.dot(&col).sqrt();
            if norm > 0.0 {
                col.mapv_inplace(|v| v / norm);
            } else {
                col[0] = 1.0;
            }
        }
        let dict = Dictionary::new(basis).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.fvkm");
        save_model(&Model::Dictionary(dict.clone()), &path).unwrap();
        match load_model(&path).unwrap() {
            Model::Dictionary(back) => prop_assert_eq!(back, dict),
            other => prop_assert!(false, "wrong model kind {:?}", other),
        }
    }
}

#[test]
fn gmm_roundtrip_preserves_weight_sum_exactly() {
    let gmm = GmmModel::new(
        Array1::from_vec(vec![0.1, 0.2, 0.3, 0.4]),
        Array2::from_elem((4, 2), 0.5),
        Array2::from_elem((4, 2), 1.5),
        1e-7,
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.fvkm");
    save_model(&Model::Gmm(gmm.clone()), &path).unwrap();
    let Model::Gmm(back) = load_model(&path).unwrap() else {
        panic!("wrong model kind");
    };
    assert_eq!(back, gmm);
    assert_eq!(back.weights().sum(), 1.0);
}

#[test]
fn truncated_model_payload_is_rejected() {
    let dict = Dictionary::new(Array2::eye(3)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.fvkm");
    save_model(&Model::Dictionary(dict), &path).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    std::fs::write(&path, &bytes[..bytes.len() - 8]).unwrap();
    assert!(load_model(&path).is_err());
}

#[test]
fn header_constants_are_stable() {
    // the on-disk format is a contract: magic FVK1, version 1
    assert_eq!(&MAGIC, b"FVK1");
    assert_eq!(FORMAT_VERSION, 1);
}
