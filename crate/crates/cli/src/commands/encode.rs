//! `encode`: turn per-image feature files into pooled encoded vectors.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use fvkit_core::gmm::{gmmfv_encode, GmmFvMode};
use fvkit_core::io::{load_dictionary, load_gmm, load_pca, read_features, write_features};
use fvkit_core::scfv::scfv_encode_image;
use fvkit_core::sparse::{default_lambda, SparseCodingParams};
use fvkit_core::{pca_transform, FeatureSet, NormalizationSpec, PcaModel};
use ndarray::Array2;

use crate::config::Config;
use crate::dataset::{load_images, read_labels, LABELS_FILE};
use crate::errors::{model_context, CliError, CliResult};

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum EncoderKind {
    Scfvc,
    Gmmfvc,
}

#[derive(Args, Debug)]
pub struct EncodeArgs {
    /// Which encoder to run.
    #[arg(value_enum)]
    pub encoder: EncoderKind,
    /// Dataset directory (with labels.csv) or a single .fvk feature file.
    #[arg(long)]
    pub features: PathBuf,
    /// Dictionary model (scfvc).
    #[arg(long)]
    pub dict: Option<PathBuf>,
    /// Mixture model (gmmfvc).
    #[arg(long)]
    pub gmm: Option<PathBuf>,
    /// Optional PCA model applied to features before encoding.
    #[arg(long)]
    pub pca: Option<PathBuf>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub sigma2: Option<f64>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub solver_max_iter: Option<usize>,
    /// Power normalization exponent.
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub no_power: bool,
    #[arg(long)]
    pub no_intra: bool,
    /// Run intra-normalization before the power transform.
    #[arg(long)]
    pub intra_first: bool,
    /// Append a final global l2 normalization.
    #[arg(long)]
    pub global_l2: bool,
    /// Emit only the mean-gradient block (gmmfvc).
    #[arg(long)]
    pub mean_only: bool,
    /// Output .fvk file: one row per encoded image.
    #[arg(long)]
    pub out: PathBuf,
}

fn norm_spec(args: &EncodeArgs, cfg: &Config, subvector_len: usize) -> CliResult<NormalizationSpec> {
    let spec = NormalizationSpec {
        power_alpha: cfg.resolve(args.alpha, "alpha", 0.5)?,
        apply_power: !args.no_power,
        apply_intra: !args.no_intra,
        subvector_len,
        power_first: !args.intra_first,
        global_l2: args.global_l2,
    };
    spec.validate()?;
    Ok(spec)
}

fn load_input_images(path: &Path) -> CliResult<Vec<FeatureSet>> {
    if path.is_dir() {
        let labels = read_labels(&path.join(LABELS_FILE))?;
        load_images(&labels)
    } else {
        Ok(vec![read_features(path)?])
    }
}

fn apply_pca(images: Vec<FeatureSet>, model: Option<&PcaModel>) -> CliResult<Vec<FeatureSet>> {
    match model {
        None => Ok(images),
        Some(pca) => images
            .into_iter()
            .map(|img| pca_transform(&img, pca).map_err(CliError::from))
            .collect(),
    }
}

pub fn run(args: EncodeArgs, cfg: &Config) -> CliResult<()> {
    let images = load_input_images(&args.features)?;
    let pca = match &args.pca {
        Some(path) => Some(model_context(load_pca(path), path)?),
        None => None,
    };
    let images = apply_pca(images, pca.as_ref())?;

    let (rows, len, nonconverged) = match args.encoder {
        EncoderKind::Scfvc => {
            let dict_path = args
                .dict
                .clone()
                .ok_or_else(|| CliError::usage("--dict is required for the scfvc encoder"))?;
            let dict = model_context(load_dictionary(&dict_path), &dict_path)?;
            let lambda = match cfg.resolve_opt(args.lambda, "lambda")? {
                Some(l) => l,
                None => {
                    let pooled = FeatureSet::concat(&images)?;
                    let l = default_lambda(&pooled);
                    println!("lambda not given; using data-derived {l:.6}");
                    l
                }
            };
            let params = SparseCodingParams {
                lambda,
                sigma2: cfg.resolve(args.sigma2, "sigma2", 1.0)?,
                max_iter: cfg.resolve(args.solver_max_iter, "solver-max-iter", 2000)?,
                tol: cfg.resolve(args.tol, "tol", 1e-6)?,
            };
            let norm = norm_spec(&args, cfg, dict.dim())?;
            let mut rows = Vec::with_capacity(images.len());
            let mut warned = 0usize;
            for img in images.iter() {
                let (fv, stats) = scfv_encode_image(img, &dict, &params, &norm)?;
                warned += stats.nonconverged_features;
                rows.push(fv.values().to_owned());
            }
            let len = dict.dim() * dict.atoms();
            (rows, len, warned)
        }
        EncoderKind::Gmmfvc => {
            let gmm_path = args
                .gmm
                .clone()
                .ok_or_else(|| CliError::usage("--gmm is required for the gmmfvc encoder"))?;
            let gmm = model_context(load_gmm(&gmm_path), &gmm_path)?;
            let mode = if args.mean_only {
                GmmFvMode::MeanOnly
            } else {
                GmmFvMode::MeanAndVariance
            };
            let norm = norm_spec(&args, cfg, gmm.dim())?;
            let mut rows = Vec::with_capacity(images.len());
            for img in images.iter() {
                let fv = gmmfv_encode(img, &gmm, mode, &norm)?;
                rows.push(fv.values().to_owned());
            }
            let blocks = if args.mean_only { 1 } else { 2 };
            let len = blocks * gmm.dim() * gmm.components();
            (rows, len, 0)
        }
    };

    let mut matrix = Array2::zeros((rows.len(), len));
    for (i, row) in rows.iter().enumerate() {
        matrix.row_mut(i).assign(row);
    }
    write_features(&FeatureSet::new(matrix)?, &args.out)?;
    println!(
        "encoded {} images into {}-dim vectors -> {}{}",
        rows.len(),
        len,
        args.out.display(),
        if nonconverged > 0 {
            format!(" ({nonconverged} features kept at the solver iteration cap)")
        } else {
            String::new()
        },
    );
    Ok(())
}
