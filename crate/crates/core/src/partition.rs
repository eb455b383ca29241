//! Partition resolution: how finely a model's means cover feature space,
//! measured as the average distance from a feature to its closest model
//! mean. For a mixture that is the nearest component mean; for the sparse
//! model it is the reconstruction `B u*`, the model's mean for that feature.

use std::io::Write;
use std::path::{Path, PathBuf};

use ndarray::ArrayView1;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gmm::gmm_fit_em;
use crate::sparse::{dict_learn, lasso_solve_batch, SparseCodingParams};
use crate::synthetic;
use crate::types::{Dictionary, FeatureSet, GmmModel};

/// Mean distance from each feature to its nearest component mean.
pub fn partition_resolution_gmm(features: &FeatureSet, model: &GmmModel) -> Result<f64> {
    if features.dim() != model.dim() {
        return Err(Error::Dimension(format!(
            "features have dim {}, mixture expects {}",
            features.dim(),
            model.dim()
        )));
    }
    let means = model.means();
    let total: f64 = (0..features.count())
        .into_par_iter()
        .map(|i| {
            let x = features.feature(i);
            let mut best = f64::INFINITY;
            for mu in means.rows() {
                best = best.min(sq_dist(x, mu));
            }
            best.sqrt()
        })
        .sum();
    Ok(total / features.count() as f64)
}

/// Mean distance from each feature to its sparse reconstruction `B u*`.
pub fn partition_resolution_sc(
    features: &FeatureSet,
    dict: &Dictionary,
    params: &SparseCodingParams,
) -> Result<f64> {
    let solutions = lasso_solve_batch(features, dict, params)?;
    let basis = dict.basis();
    let total: f64 = solutions
        .iter()
        .enumerate()
        .map(|(i, sol)| {
            let mut residual = features.feature(i).to_owned();
            for (k, &uk) in sol.code.values().iter().enumerate() {
                if uk != 0.0 {
                    residual.scaled_add(-uk, &basis.column(k));
                }
            }
            residual.dot(&residual).sqrt()
        })
        .sum();
    Ok(total / features.count() as f64)
}

fn sq_dist(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b.iter()) {
        let diff = x - y;
        acc += diff * diff;
    }
    acc
}

/// Where the experiment's features come from.
#[derive(Debug, Clone)]
pub enum FeatureSource {
    /// A binary feature file; swept dimensions are cut with PCA.
    File(PathBuf),
    /// Seeded synthetic features, regenerated at each swept dimension.
    Synthetic {
        count: usize,
        latent_atoms: usize,
        atoms_per_feature: usize,
        noise_sigma: f64,
    },
}

#[derive(Debug, Clone)]
pub struct ResolutionConfig {
    pub source: FeatureSource,
    /// Feature dimensions for the dimension sweep.
    pub dims: Vec<usize>,
    /// Mixture size held fixed during the dimension sweep.
    pub fixed_components: usize,
    /// Feature dimension held fixed during the size sweep.
    pub fixed_dim: usize,
    /// Mixture sizes for the size sweep.
    pub gmm_sizes: Vec<usize>,
    /// Dictionary size compared against the mixtures at `fixed_dim`.
    pub dict_atoms: usize,
    /// Sparsity weight; `None` picks the scale-aware default per dataset.
    pub lambda: Option<f64>,
    pub em_max_iter: usize,
    pub em_tol: f64,
    pub dict_outer_iters: usize,
    pub seed: u64,
}

impl Default for ResolutionConfig {
    fn default() -> Self {
        Self {
            source: FeatureSource::Synthetic {
                count: 2000,
                latent_atoms: 100,
                atoms_per_feature: 3,
                noise_sigma: 0.01,
            },
            dims: vec![100, 200, 500, 1000],
            fixed_components: 100,
            fixed_dim: 500,
            gmm_sizes: vec![100, 200, 500, 1000],
            dict_atoms: 100,
            lambda: None,
            em_max_iter: 15,
            em_tol: 1e-4,
            dict_outer_iters: 8,
            seed: 0,
        }
    }
}

/// One row of the experiment table.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolutionRow {
    /// "gmm" or "sc".
    pub model: String,
    /// Mixture components or dictionary atoms.
    pub param: usize,
    pub dim: usize,
    pub resolution: f64,
}

fn features_at_dim(config: &ResolutionConfig, dim: usize) -> Result<FeatureSet> {
    match &config.source {
        FeatureSource::Synthetic {
            count,
            latent_atoms,
            atoms_per_feature,
            noise_sigma,
        } => synthetic::sparse_features(
            dim,
            *count,
            *latent_atoms,
            *atoms_per_feature,
            *noise_sigma,
            // one seed per dimension, derived deterministically
            config.seed.wrapping_add(dim as u64),
        ),
        FeatureSource::File(path) => {
            let features = crate::io::read_features(path)?;
            if features.dim() == dim {
                return Ok(features);
            }
            if dim > features.dim() {
                return Err(Error::InvalidParam(format!(
                    "swept dim {dim} exceeds file feature dim {}",
                    features.dim()
                )));
            }
            let model = crate::pca::pca_fit(&features, dim, false)?;
            crate::pca::pca_transform(&features, &model)
        }
    }
}

fn params_for(config: &ResolutionConfig, features: &FeatureSet) -> SparseCodingParams {
    let lambda = config
        .lambda
        .unwrap_or_else(|| crate::sparse::default_lambda(features));
    SparseCodingParams::new(lambda).with_tol(1e-6).with_max_iter(2000)
}

/// Runs both sweeps and returns the table backing them: the dimension sweep
/// at a fixed mixture size, then at the fixed dimension a mixture-size sweep
/// alongside one learned dictionary.
pub fn resolution_experiment(config: &ResolutionConfig) -> Result<Vec<ResolutionRow>> {
    let mut rows = Vec::new();

    for &dim in config.dims.iter() {
        let features = features_at_dim(config, dim)?;
        let fit = gmm_fit_em(
            &features,
            config.fixed_components,
            config.em_max_iter,
            config.em_tol,
            config.seed,
        )?;
        let d = partition_resolution_gmm(&features, &fit.model)?;
        log::info!("dim sweep: gmm m={} dim={dim} d={d:.4}", config.fixed_components);
        rows.push(ResolutionRow {
            model: "gmm".into(),
            param: config.fixed_components,
            dim,
            resolution: d,
        });
    }

    let features = features_at_dim(config, config.fixed_dim)?;
    for &m in config.gmm_sizes.iter() {
        let fit = gmm_fit_em(&features, m, config.em_max_iter, config.em_tol, config.seed)?;
        let d = partition_resolution_gmm(&features, &fit.model)?;
        log::info!("size sweep: gmm m={m} dim={} d={d:.4}", config.fixed_dim);
        rows.push(ResolutionRow {
            model: "gmm".into(),
            param: m,
            dim: config.fixed_dim,
            resolution: d,
        });
    }

    let params = params_for(config, &features);
    let learned = dict_learn(
        &features,
        config.dict_atoms,
        &params,
        config.dict_outer_iters,
        config.seed,
    )?;
    let d = partition_resolution_sc(&features, &learned.dictionary, &params)?;
    log::info!("size sweep: sc K={} dim={} d={d:.4}", config.dict_atoms, config.fixed_dim);
    rows.push(ResolutionRow {
        model: "sc".into(),
        param: config.dict_atoms,
        dim: config.fixed_dim,
        resolution: d,
    });

    Ok(rows)
}

/// Writes rows as `model,param,dim,d` CSV with one header row.
pub fn write_resolution_csv<P: AsRef<Path>>(rows: &[ResolutionRow], path: P) -> Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(file, "model,param,dim,d")?;
    for row in rows {
        writeln!(file, "{},{},{},{}", row.model, row.param, row.dim, row.resolution)?;
    }
    file.flush()?;
    Ok(())
}

/// Reads a `model,param,dim,d` CSV back into rows.
pub fn read_resolution_csv<P: AsRef<Path>>(path: P) -> Result<Vec<ResolutionRow>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path.as_ref())?;
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        if record.len() != 4 {
            return Err(Error::Format(format!("expected 4 columns, got {}", record.len())));
        }
        let parse_err = |field: &str| Error::Format(format!("bad number {field:?}"));
        rows.push(ResolutionRow {
            model: record[0].to_string(),
            param: record[1].parse().map_err(|_| parse_err(&record[1]))?,
            dim: record[2].parse().map_err(|_| parse_err(&record[2]))?,
            resolution: record[3].parse().map_err(|_| parse_err(&record[3]))?,
        });
    }
    Ok(rows)
}
