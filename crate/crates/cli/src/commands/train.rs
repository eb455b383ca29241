//! `train-dict`, `train-gmm`, `train-pca`: fit models on a feature source.

use std::path::PathBuf;

use clap::Args;
use fvkit_core::io::{save_model, Model};
use fvkit_core::sparse::{default_lambda, dict_learn, SparseCodingParams};
use fvkit_core::{gmm_fit_em, pca_fit, FeatureSet};

use crate::config::Config;
use crate::dataset::load_training_features;
use crate::errors::CliResult;

fn load_capped(
    path: &PathBuf,
    max_features: usize,
    seed: u64,
) -> CliResult<FeatureSet> {
    let features = load_training_features(path)?;
    let capped = features.subsample(max_features, seed);
    if capped.count() < features.count() {
        println!(
            "training on {} of {} features (seeded subsample)",
            capped.count(),
            features.count()
        );
    }
    Ok(capped)
}

#[derive(Args, Debug)]
pub struct TrainDictArgs {
    /// Dataset directory, .fvk file, or .csv import.
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub codebook_size: Option<usize>,
    /// Sparsity weight; defaults to a scale-aware value from the data.
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub sigma2: Option<f64>,
    #[arg(long)]
    pub outer_iters: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub solver_max_iter: Option<usize>,
    /// Cap on training features; 0 keeps everything.
    #[arg(long)]
    pub max_features: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run_dict(args: TrainDictArgs, cfg: &Config) -> CliResult<()> {
    let seed = cfg.resolve(args.seed, "seed", 0)?;
    let features = load_capped(
        &args.features,
        cfg.resolve(args.max_features, "max-features", 0)?,
        seed,
    )?;
    let lambda = match cfg.resolve_opt(args.lambda, "lambda")? {
        Some(l) => l,
        None => {
            let l = default_lambda(&features);
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
    let atoms = cfg.resolve(args.codebook_size, "codebook-size", 100)?;
    let outer = cfg.resolve(args.outer_iters, "outer-iters", 10)?;

    let result = dict_learn(&features, atoms, &params, outer, seed)?;
    save_model(&Model::Dictionary(result.dictionary), &args.out)?;
    println!(
        "dictionary: {} atoms, dim {}, objective {:.4} -> {:.4}, {} dead-atom reseeds, {} codes kept at the iteration cap",
        atoms,
        features.dim(),
        result.objective_trace.first().unwrap_or(&f64::NAN),
        result.objective_trace.last().unwrap_or(&f64::NAN),
        result.dead_atom_reinits,
        result.nonconverged_codes,
    );
    println!("saved to {}", args.out.display());
    Ok(())
}

#[derive(Args, Debug)]
pub struct TrainGmmArgs {
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub components: Option<usize>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_features: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run_gmm(args: TrainGmmArgs, cfg: &Config) -> CliResult<()> {
    let seed = cfg.resolve(args.seed, "seed", 0)?;
    let features = load_capped(
        &args.features,
        cfg.resolve(args.max_features, "max-features", 0)?,
        seed,
    )?;
    let components = cfg.resolve(args.components, "components", 100)?;
    let fit = gmm_fit_em(
        &features,
        components,
        cfg.resolve(args.max_iter, "max-iter", 50)?,
        cfg.resolve(args.tol, "tol", 1e-5)?,
        seed,
    )?;
    println!(
        "gmm: {} components, dim {}, log-likelihood {:.4} -> {:.4} over {} iterations{}{}",
        components,
        features.dim(),
        fit.loglik_trace.first().unwrap_or(&f64::NAN),
        fit.loglik_trace.last().unwrap_or(&f64::NAN),
        fit.loglik_trace.len(),
        if fit.converged { "" } else { " (iteration cap)" },
        if fit.reinit_events > 0 {
            format!(", {} component reseeds", fit.reinit_events)
        } else {
            String::new()
        },
    );
    save_model(&Model::Gmm(fit.model), &args.out)?;
    println!("saved to {}", args.out.display());
    Ok(())
}

#[derive(Args, Debug)]
pub struct TrainPcaArgs {
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub pca_dim: Option<usize>,
    #[arg(long)]
    pub whiten: bool,
    #[arg(long)]
    pub max_features: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run_pca(args: TrainPcaArgs, cfg: &Config) -> CliResult<()> {
    let seed = cfg.resolve(args.seed, "seed", 0)?;
    let features = load_capped(
        &args.features,
        cfg.resolve(args.max_features, "max-features", 0)?,
        seed,
    )?;
    let out_dim = cfg
        .resolve_opt(args.pca_dim, "pca-dim")?
        .ok_or_else(|| crate::errors::CliError::usage("--pca-dim is required"))?;
    let model = pca_fit(&features, out_dim, args.whiten)?;
    let explained: f64 = model.eigenvalues().sum();
    println!(
        "pca: {} -> {} dims, explained variance {:.4}, effective rank {}",
        features.dim(),
        out_dim,
        explained,
        model.effective_rank(1e-9),
    );
    save_model(&Model::Pca(model), &args.out)?;
    println!("saved to {}", args.out.display());
    Ok(())
}
