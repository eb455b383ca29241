//! `classify`: train a one-vs-rest SVM on encoded vectors and score a test
//! split.

use std::path::PathBuf;

use clap::{Args, ValueEnum};
use fvkit_core::classifier::{evaluate, svm_predict, svm_train, Metric, SvmTrainParams};
use fvkit_core::io::read_features;

use crate::config::Config;
use crate::dataset::read_labels;
use crate::errors::{CliError, CliResult};

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum MetricArg {
    Accuracy,
    Map,
    Both,
}

#[derive(Args, Debug)]
pub struct ClassifyArgs {
    /// Encoded training vectors (.fvk, one row per image).
    #[arg(long)]
    pub train_vectors: PathBuf,
    /// labels.csv aligned with the training vector rows.
    #[arg(long)]
    pub train_labels: PathBuf,
    #[arg(long)]
    pub test_vectors: PathBuf,
    #[arg(long)]
    pub test_labels: PathBuf,
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub gap_tol: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum, default_value = "both")]
    pub metric: MetricArg,
    /// Row label in the metrics CSV, e.g. the encoder name.
    #[arg(long, default_value = "svm")]
    pub label: String,
    #[arg(long)]
    pub out: PathBuf,
    /// Append to an existing metrics CSV instead of overwriting.
    #[arg(long)]
    pub append: bool,
}

pub fn run(args: ClassifyArgs, cfg: &Config) -> CliResult<()> {
    let train = read_features(&args.train_vectors)?;
    let train_labels = read_labels(&args.train_labels)?.labels;
    let test = read_features(&args.test_vectors)?;
    let test_labels = read_labels(&args.test_labels)?.labels;

    if train.count() != train_labels.len() {
        return Err(CliError {
            category: "dimension-mismatch",
            message: format!(
                "{} training vectors but {} labels",
                train.count(),
                train_labels.len()
            ),
            code: 2,
        });
    }
    if test.count() != test_labels.len() {
        return Err(CliError {
            category: "dimension-mismatch",
            message: format!("{} test vectors but {} labels", test.count(), test_labels.len()),
            code: 2,
        });
    }

    let params = SvmTrainParams {
        c: cfg.resolve(args.c, "c", 1.0)?,
        epochs: cfg.resolve(args.epochs, "epochs", 1000)?,
        gap_tol: cfg.resolve(args.gap_tol, "gap-tol", 1e-4)?,
        seed: cfg.resolve(args.seed, "seed", 0)?,
    };
    let (model, report) = svm_train(train.data(), &train_labels, &params)?;
    let worst_gap = report.gaps.iter().cloned().fold(0.0f64, f64::max);
    println!(
        "trained {} one-vs-rest classifiers on {} vectors (worst duality gap {worst_gap:.2e})",
        model.classes(),
        train.count()
    );

    let predictions = svm_predict(&model, test.data())?;
    let mut results: Vec<(&str, f64)> = Vec::new();
    if matches!(args.metric, MetricArg::Accuracy | MetricArg::Both) {
        results.push((
            "accuracy",
            evaluate(&predictions, &test_labels, Metric::Accuracy)?,
        ));
    }
    if matches!(args.metric, MetricArg::Map | MetricArg::Both) {
        results.push((
            "map",
            evaluate(&predictions, &test_labels, Metric::MeanAveragePrecision)?,
        ));
    }

    let needs_header = !(args.append && args.out.exists());
    let mut out = String::new();
    if needs_header {
        out.push_str("label,metric,value\n");
    }
    for (metric, value) in results.iter() {
        out.push_str(&format!("{},{},{}\n", args.label, metric, value));
        println!("{metric}: {value:.4}");
    }
    if args.append && args.out.exists() {
        use std::io::Write;
        let mut file = std::fs::OpenOptions::new().append(true).open(&args.out)?;
        file.write_all(out.as_bytes())?;
    } else {
        std::fs::write(&args.out, out)?;
    }
    println!("metrics written to {}", args.out.display());
    Ok(())
}
