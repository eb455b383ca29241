//! `resolution`: the partition-resolution experiment, with CSV and SVG
//! outputs.

use std::path::PathBuf;

use clap::Args;
use fvkit_core::partition::{
    resolution_experiment, write_resolution_csv, FeatureSource, ResolutionConfig, ResolutionRow,
};

use crate::config::{parse_usize_list, Config};
use crate::errors::CliResult;
use crate::svg::{write_panels, Panel, Series};

#[derive(Args, Debug)]
pub struct ResolutionArgs {
    /// Output CSV (`model,param,dim,d`).
    #[arg(long)]
    pub out: PathBuf,
    /// Optional SVG line plot.
    #[arg(long)]
    pub svg: Option<PathBuf>,
    /// Feature file to use instead of the synthetic generator.
    #[arg(long)]
    pub source: Option<PathBuf>,
    /// Synthetic generator: number of features.
    #[arg(long)]
    pub features: Option<usize>,
    #[arg(long)]
    pub latent_atoms: Option<usize>,
    #[arg(long)]
    pub atoms_per_feature: Option<usize>,
    #[arg(long)]
    pub noise: Option<f64>,
    /// Dimension sweep, e.g. 100,200,500,1000.
    #[arg(long)]
    pub dims: Option<String>,
    /// Mixture sizes for the size sweep.
    #[arg(long)]
    pub gmm_sizes: Option<String>,
    /// Mixture size held fixed in the dimension sweep.
    #[arg(long)]
    pub components: Option<usize>,
    /// Dictionary size compared against the mixtures.
    #[arg(long)]
    pub dict_size: Option<usize>,
    /// Feature dimension for the size sweep.
    #[arg(long)]
    pub fixed_dim: Option<usize>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub em_max_iter: Option<usize>,
    #[arg(long)]
    pub em_tol: Option<f64>,
    #[arg(long)]
    pub outer_iters: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

pub fn run(args: ResolutionArgs, cfg: &Config) -> CliResult<()> {
    let defaults = ResolutionConfig::default();
    let source = match &args.source {
        Some(path) => FeatureSource::File(path.clone()),
        None => FeatureSource::Synthetic {
            count: cfg.resolve(args.features, "features", 2000)?,
            latent_atoms: cfg.resolve(args.latent_atoms, "latent-atoms", 100)?,
            atoms_per_feature: cfg.resolve(args.atoms_per_feature, "atoms-per-feature", 3)?,
            noise_sigma: cfg.resolve(args.noise, "noise", 0.01)?,
        },
    };
    let dims_raw = cfg.resolve(args.dims, "dims", "100,200,500,1000".to_string())?;
    let sizes_raw = cfg.resolve(args.gmm_sizes, "gmm-sizes", "100,200,500,1000".to_string())?;
    let config = ResolutionConfig {
        source,
        dims: parse_usize_list(&dims_raw)?,
        fixed_components: cfg.resolve(args.components, "components", defaults.fixed_components)?,
        fixed_dim: cfg.resolve(args.fixed_dim, "fixed-dim", defaults.fixed_dim)?,
        gmm_sizes: parse_usize_list(&sizes_raw)?,
        dict_atoms: cfg.resolve(args.dict_size, "dict-size", defaults.dict_atoms)?,
        lambda: cfg.resolve_opt(args.lambda, "lambda")?,
        em_max_iter: cfg.resolve(args.em_max_iter, "em-max-iter", defaults.em_max_iter)?,
        em_tol: cfg.resolve(args.em_tol, "em-tol", defaults.em_tol)?,
        dict_outer_iters: cfg.resolve(args.outer_iters, "outer-iters", defaults.dict_outer_iters)?,
        seed: cfg.resolve(args.seed, "seed", 0)?,
    };

    let rows = resolution_experiment(&config)?;
    write_resolution_csv(&rows, &args.out)?;
    println!("wrote {} rows to {}", rows.len(), args.out.display());
    for row in rows.iter() {
        println!("  {} param={} dim={} d={:.4}", row.model, row.param, row.dim, row.resolution);
    }

    if let Some(svg_path) = &args.svg {
        write_panels(svg_path, &build_panels(&rows, &config))?;
        println!("plot written to {}", svg_path.display());
    }
    Ok(())
}

fn build_panels(rows: &[ResolutionRow], config: &ResolutionConfig) -> Vec<Panel> {
    // dimension sweep at the fixed mixture size
    let dim_sweep: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.model == "gmm" && r.param == config.fixed_components && config.dims.contains(&r.dim))
        .map(|r| (r.dim as f64, r.resolution))
        .collect();
    // size sweep at the fixed dimension
    let size_sweep: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.model == "gmm" && r.dim == config.fixed_dim && config.gmm_sizes.contains(&r.param))
        .map(|r| (r.param as f64, r.resolution))
        .collect();
    let sc_rows: Vec<&ResolutionRow> = rows.iter().filter(|r| r.model == "sc").collect();
    let mut panel_b_series = vec![Series {
        label: "mixture means".into(),
        points: size_sweep.clone(),
        color: "#c0392b",
    }];
    if let (Some(sc), false) = (sc_rows.first(), size_sweep.is_empty()) {
        let x_min = size_sweep.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
        let x_max = size_sweep.iter().map(|p| p.0).fold(0.0f64, f64::max);
        panel_b_series.push(Series {
            label: format!("sparse dictionary ({} atoms)", sc.param),
            points: vec![(x_min, sc.resolution), (x_max, sc.resolution)],
            color: "#2980b9",
        });
    }
    vec![
        Panel {
            title: format!("d vs feature dim ({} mixtures)", config.fixed_components),
            x_label: "feature dimensionality".into(),
            y_label: "average distance d".into(),
            series: vec![Series {
                label: "mixture means".into(),
                points: dim_sweep,
                color: "#c0392b",
            }],
        },
        Panel {
            title: format!("d vs model size (dim {})", config.fixed_dim),
            x_label: "number of mixtures".into(),
            y_label: "average distance d".into(),
            series: panel_b_series,
        },
    ]
}
