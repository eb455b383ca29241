//! Loading conventions around feature files: a dataset directory is a
//! `labels.csv` (`file,label` rows, paths relative to the directory) next to
//! per-image feature files.

use std::path::{Path, PathBuf};

use fvkit_core::{io as fio, FeatureSet};

use crate::errors::{CliError, CliResult};

pub const LABELS_FILE: &str = "labels.csv";

#[derive(Debug, Clone)]
pub struct LabeledImages {
    pub files: Vec<PathBuf>,
    pub labels: Vec<usize>,
}

/// Reads a `labels.csv`, resolving file paths against its directory.
pub fn read_labels(path: &Path) -> CliResult<LabeledImages> {
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError {
            category: if matches!(e.kind(), csv::ErrorKind::Io(io) if io.kind() == std::io::ErrorKind::NotFound) {
                "input-not-found"
            } else {
                "bad-format"
            },
            message: format!("{}: {e}", path.display()),
            code: 2,
        })?;
    let mut files = Vec::new();
    let mut labels = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError {
            category: "bad-format",
            message: format!("{}:{}: {e}", path.display(), i + 2),
            code: 2,
        })?;
        if record.len() != 2 {
            return Err(CliError {
                category: "bad-format",
                message: format!("{}:{}: expected file,label", path.display(), i + 2),
                code: 2,
            });
        }
        let label: usize = record[1].parse().map_err(|_| CliError {
            category: "bad-format",
            message: format!("{}:{}: bad label {:?}", path.display(), i + 2, &record[1]),
            code: 2,
        })?;
        files.push(base.join(&record[0]));
        labels.push(label);
    }
    if files.is_empty() {
        return Err(CliError {
            category: "bad-format",
            message: format!("{}: no entries", path.display()),
            code: 2,
        });
    }
    Ok(LabeledImages { files, labels })
}

pub fn write_labels(path: &Path, entries: &[(String, usize)]) -> CliResult<()> {
    let mut out = String::from("file,label\n");
    for (file, label) in entries {
        out.push_str(file);
        out.push(',');
        out.push_str(&label.to_string());
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Loads per-image feature sets in `labels.csv` order.
pub fn load_images(images: &LabeledImages) -> CliResult<Vec<FeatureSet>> {
    images
        .files
        .iter()
        .map(|f| fio::read_features(f).map_err(CliError::from))
        .collect()
}

/// Loads a feature source for training: a dataset directory (all images
/// pooled), a binary feature file, or a CSV import.
pub fn load_training_features(path: &Path) -> CliResult<FeatureSet> {
    if path.is_dir() {
        let labels = read_labels(&path.join(LABELS_FILE))?;
        let images = load_images(&labels)?;
        return FeatureSet::concat(&images).map_err(CliError::from);
    }
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => fvkit_core::io::read_features_csv(path).map_err(CliError::from),
        _ => fio::read_features(path).map_err(CliError::from),
    }
}
