//! Diagonal-covariance Gaussian mixtures: EM training, posteriors, and the
//! classic Fisher vector encoder built on them.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::pooling::NormalizationSpec;
use crate::types::{FeatureSet, FisherVector, FvLayout, GmmModel};

/// Relative factor for the variance floor: `1e-6` times the mean per-
/// dimension variance of the training data.
const VAR_FLOOR_FACTOR: f64 = 1e-6;
/// Mixture weights below this trigger a component reinitialization.
const COLLAPSE_WEIGHT: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct GmmFit {
    pub model: GmmModel,
    /// Mean log-likelihood at the start of each EM iteration.
    pub loglik_trace: Vec<f64>,
    /// Number of collapsed components that were reseeded.
    pub reinit_events: usize,
    pub converged: bool,
}

struct LogPdfCache {
    log_weights: Array1<f64>,
    log_norm: Array1<f64>,
    inv_var: Array2<f64>,
    means: Array2<f64>,
}

impl LogPdfCache {
    fn new(weights: ArrayView1<f64>, means: ArrayView2<f64>, variances: ArrayView2<f64>) -> Self {
        let m = weights.len();
        let d = means.ncols();
        let mut log_norm = Array1::zeros(m);
        let mut inv_var = Array2::zeros((m, d));
        for k in 0..m {
            let mut acc = 0.0;
            for j in 0..d {
                let var = variances[[k, j]];
                acc += (2.0 * std::f64::consts::PI * var).ln();
                inv_var[[k, j]] = 1.0 / var;
            }
            log_norm[k] = -0.5 * acc;
        }
        Self {
            log_weights: weights.mapv(f64::ln),
            log_norm,
            inv_var,
            means: means.to_owned(),
        }
    }

    /// Weighted log densities `log w_k + log N(x; mu_k, Sigma_k)` and their
    /// log-sum-exp.
    fn weighted_log_pdf(&self, x: ArrayView1<f64>, out: &mut Array1<f64>) -> f64 {
        let m = self.log_weights.len();
        let d = x.len();
        for k in 0..m {
            let mut maha = 0.0;
            for j in 0..d {
                let diff = x[j] - self.means[[k, j]];
                maha += diff * diff * self.inv_var[[k, j]];
            }
            out[k] = self.log_weights[k] + self.log_norm[k] - 0.5 * maha;
        }
        let max = out.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = out.iter().map(|v| (v - max).exp()).sum();
        max + sum.ln()
    }
}

/// Posterior component responsibilities for one feature; sums to 1.
/// Computed in log space, so far-away features do not underflow to 0/0.
pub fn gmm_posteriors(x: ArrayView1<f64>, model: &GmmModel) -> Array1<f64> {
    assert_eq!(x.len(), model.dim(), "feature dim does not match mixture");
    let cache = LogPdfCache::new(model.weights(), model.means(), model.variances());
    let mut log_pdf = Array1::zeros(model.components());
    let lse = cache.weighted_log_pdf(x, &mut log_pdf);
    log_pdf.mapv(|v| (v - lse).exp())
}

/// Mean per-feature log-likelihood of the data under the mixture.
pub fn log_likelihood(features: &FeatureSet, model: &GmmModel) -> f64 {
    assert_eq!(features.dim(), model.dim());
    let cache = LogPdfCache::new(model.weights(), model.means(), model.variances());
    let total: f64 = (0..features.count())
        .into_par_iter()
        .map(|i| {
            let mut buf = Array1::zeros(model.components());
            cache.weighted_log_pdf(features.feature(i), &mut buf)
        })
        .sum();
    total / features.count() as f64
}

/// Fits a diagonal-covariance mixture with EM. Initialization is k-means++
/// seeding followed by five k-means iterations, all driven by `seed`, so the
/// fit is deterministic.
pub fn gmm_fit_em(
    features: &FeatureSet,
    components: usize,
    max_iter: usize,
    tol: f64,
    seed: u64,
) -> Result<GmmFit> {
    let t = features.count();
    let d = features.dim();
    if components == 0 {
        return Err(Error::InvalidParam("mixture needs at least one component".into()));
    }
    if t < components {
        return Err(Error::InvalidParam(format!(
            "{components} components need at least as many features, got {t}"
        )));
    }
    if max_iter == 0 {
        return Err(Error::InvalidParam("max_iter must be positive".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParam("tol must be positive".into()));
    }

    let data = features.data();
    let global_var = column_variances(data);
    let mean_var = global_var.sum() / d as f64;
    let var_floor = if mean_var > 0.0 {
        VAR_FLOOR_FACTOR * mean_var
    } else {
        1e-12
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut means = kmeans_init(data, components, &mut rng);
    let (mut weights, mut variances) =
        moments_from_assignment(data, &means, &global_var, var_floor);

    let mut trace = Vec::new();
    let mut reinits = 0usize;
    let mut converged = false;
    let mut prev_ll = f64::NEG_INFINITY;

    for _ in 0..max_iter {
        let cache = LogPdfCache::new(weights.view(), means.view(), variances.view());

        // E-step: responsibilities, computed per feature in parallel
        let rows: Vec<(Array1<f64>, f64)> = (0..t)
            .into_par_iter()
            .map(|i| {
                let mut buf = Array1::zeros(components);
                let lse = cache.weighted_log_pdf(data.row(i), &mut buf);
                buf.mapv_inplace(|v| (v - lse).exp());
                (buf, lse)
            })
            .collect();

        let ll = rows.iter().map(|(_, lse)| lse).sum::<f64>() / t as f64;
        if !ll.is_finite() {
            return Err(Error::Data("non-finite likelihood during EM".into()));
        }
        trace.push(ll);
        if ll - prev_ll < tol && prev_ll.is_finite() {
            converged = true;
            break;
        }
        prev_ll = ll;

        // M-step: accumulate in fixed feature order
        let mut nk = Array1::<f64>::zeros(components);
        let mut mean_acc = Array2::<f64>::zeros((components, d));
        for (i, (gamma, _)) in rows.iter().enumerate() {
            let x = data.row(i);
            for k in 0..components {
                let g = gamma[k];
                if g == 0.0 {
                    continue;
                }
                nk[k] += g;
                for j in 0..d {
                    mean_acc[[k, j]] += g * x[j];
                }
            }
        }
        let mut new_means = Array2::zeros((components, d));
        for k in 0..components {
            let denom = nk[k].max(f64::MIN_POSITIVE);
            for j in 0..d {
                new_means[[k, j]] = mean_acc[[k, j]] / denom;
            }
        }
        let mut var_acc = Array2::<f64>::zeros((components, d));
        for (i, (gamma, _)) in rows.iter().enumerate() {
            let x = data.row(i);
            for k in 0..components {
                let g = gamma[k];
                if g == 0.0 {
                    continue;
                }
                for j in 0..d {
                    let diff = x[j] - new_means[[k, j]];
                    var_acc[[k, j]] += g * diff * diff;
                }
            }
        }
        let mut new_vars = Array2::zeros((components, d));
        for k in 0..components {
            let denom = nk[k].max(f64::MIN_POSITIVE);
            for j in 0..d {
                new_vars[[k, j]] = (var_acc[[k, j]] / denom).max(var_floor);
            }
        }
        let mut new_weights = nk.mapv(|v| v / t as f64);

        // reseed collapsed components to the worst-modeled feature
        for k in 0..components {
            if new_weights[k] < COLLAPSE_WEIGHT {
                reinits += 1;
                let mut worst = 0usize;
                for i in 1..t {
                    if rows[i].1 < rows[worst].1 {
                        worst = i;
                    }
                }
                new_means.row_mut(k).assign(&data.row(worst));
                for j in 0..d {
                    new_vars[[k, j]] = global_var[j].max(var_floor);
                }
                new_weights[k] = 1.0 / t as f64;
            }
        }
        let wsum = new_weights.sum();
        new_weights.mapv_inplace(|w| w / wsum);

        weights = new_weights;
        means = new_means;
        variances = new_vars;
    }

    let model = GmmModel::new(weights, means, variances, var_floor)?;
    Ok(GmmFit {
        model,
        loglik_trace: trace,
        reinit_events: reinits,
        converged,
    })
}

fn column_variances(data: ArrayView2<f64>) -> Array1<f64> {
    let t = data.nrows() as f64;
    let d = data.ncols();
    let mut mean = Array1::zeros(d);
    for row in data.rows() {
        mean += &row;
    }
    mean.mapv_inplace(|v| v / t);
    let mut var = Array1::zeros(d);
    for row in data.rows() {
        for j in 0..d {
            let diff = row[j] - mean[j];
            var[j] += diff * diff;
        }
    }
    var.mapv_inplace(|v| v / t);
    var
}

/// k-means++ seeding plus five Lloyd iterations.
fn kmeans_init(data: ArrayView2<f64>, k: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let t = data.nrows();
    let d = data.ncols();
    let mut centers = Array2::zeros((k, d));

    let first = rng.random_range(0..t);
    centers.row_mut(0).assign(&data.row(first));
    let mut min_dist: Vec<f64> = (0..t)
        .map(|i| sq_dist(data.row(i), centers.row(0)))
        .collect();

    for c in 1..k {
        let total: f64 = min_dist.iter().sum();
        let chosen = if total > 0.0 {
            let mut r = rng.random_range(0.0..total);
            let mut idx = t - 1;
            for (i, &w) in min_dist.iter().enumerate() {
                if r < w {
                    idx = i;
                    break;
                }
                r -= w;
            }
            idx
        } else {
            rng.random_range(0..t)
        };
        centers.row_mut(c).assign(&data.row(chosen));
        for i in 0..t {
            let dist = sq_dist(data.row(i), centers.row(c));
            if dist < min_dist[i] {
                min_dist[i] = dist;
            }
        }
    }

    let mut assign = vec![0usize; t];
    for _ in 0..5 {
        for (i, slot) in assign.iter_mut().enumerate() {
            let mut best = 0usize;
            let mut best_dist = f64::INFINITY;
            for c in 0..k {
                let dist = sq_dist(data.row(i), centers.row(c));
                if dist < best_dist {
                    best_dist = dist;
                    best = c;
                }
            }
            *slot = best;
        }
        let mut counts = vec![0usize; k];
        let mut sums = Array2::<f64>::zeros((k, d));
        for (i, &c) in assign.iter().enumerate() {
            counts[c] += 1;
            let row = data.row(i);
            for j in 0..d {
                sums[[c, j]] += row[j];
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                continue; // keep the previous center
            }
            for j in 0..d {
                centers[[c, j]] = sums[[c, j]] / counts[c] as f64;
            }
        }
    }
    centers
}

fn sq_dist(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b.iter()) {
        let diff = x - y;
        acc += diff * diff;
    }
    acc
}

/// Hard-assignment moments used to bootstrap EM from the k-means centers.
fn moments_from_assignment(
    data: ArrayView2<f64>,
    centers: &Array2<f64>,
    global_var: &Array1<f64>,
    var_floor: f64,
) -> (Array1<f64>, Array2<f64>) {
    let t = data.nrows();
    let d = data.ncols();
    let k = centers.nrows();
    let mut counts = vec![0usize; k];
    let mut var_acc = Array2::<f64>::zeros((k, d));
    for i in 0..t {
        let row = data.row(i);
        let mut best = 0usize;
        let mut best_dist = f64::INFINITY;
        for c in 0..k {
            let dist = sq_dist(row, centers.row(c));
            if dist < best_dist {
                best_dist = dist;
                best = c;
            }
        }
        counts[best] += 1;
        for j in 0..d {
            let diff = row[j] - centers[[best, j]];
            var_acc[[best, j]] += diff * diff;
        }
    }
    let mut weights = Array1::zeros(k);
    let mut variances = Array2::zeros((k, d));
    let total: usize = counts.iter().map(|c| c.max(&1)).sum();
    for c in 0..k {
        weights[c] = counts[c].max(1) as f64 / total as f64;
        for j in 0..d {
            variances[[c, j]] = if counts[c] > 0 {
                (var_acc[[c, j]] / counts[c] as f64).max(var_floor)
            } else {
                global_var[j].max(var_floor)
            };
        }
    }
    (weights, variances)
}

/// Which gradient blocks the encoder emits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GmmFvMode {
    #[default]
    MeanAndVariance,
    /// Mean-gradient block only, for ablations.
    MeanOnly,
}

/// Pooled Fisher vector before normalization: the mean-gradient block
/// `(1/sqrt(w_k)) sum_i gamma_ik (x_i - mu_k)/sigma_k` followed (unless
/// `MeanOnly`) by the variance-gradient block
/// `(1/sqrt(2 w_k)) sum_i gamma_ik [((x_i - mu_k)/sigma_k)^2 - 1]`.
pub fn gmmfv_encode_raw(
    features: &FeatureSet,
    model: &GmmModel,
    mode: GmmFvMode,
) -> Result<Array1<f64>> {
    if features.dim() != model.dim() {
        return Err(Error::Dimension(format!(
            "features have dim {}, mixture expects {}",
            features.dim(),
            model.dim()
        )));
    }
    let m = model.components();
    let d = model.dim();
    let data = features.data();
    let cache = LogPdfCache::new(model.weights(), model.means(), model.variances());

    let posteriors: Vec<Array1<f64>> = (0..features.count())
        .into_par_iter()
        .map(|i| {
            let mut buf = Array1::zeros(m);
            let lse = cache.weighted_log_pdf(data.row(i), &mut buf);
            buf.mapv_inplace(|v| (v - lse).exp());
            buf
        })
        .collect();

    let sigma = model.variances().mapv(f64::sqrt);
    let with_variance = mode == GmmFvMode::MeanAndVariance;
    let len = if with_variance { 2 * d * m } else { d * m };
    let mut out = Array1::zeros(len);
    for (i, gamma) in posteriors.iter().enumerate() {
        let x = data.row(i);
        for k in 0..m {
            let g = gamma[k];
            if g == 0.0 {
                continue;
            }
            for j in 0..d {
                let z = (x[j] - model.means()[[k, j]]) / sigma[[k, j]];
                out[k * d + j] += g * z;
                if with_variance {
                    out[d * m + k * d + j] += g * (z * z - 1.0);
                }
            }
        }
    }
    for k in 0..m {
        let w = model.weights()[k];
        let mean_scale = 1.0 / w.sqrt();
        let var_scale = 1.0 / (2.0 * w).sqrt();
        for j in 0..d {
            out[k * d + j] *= mean_scale;
            if with_variance {
                out[d * m + k * d + j] *= var_scale;
            }
        }
    }
    Ok(out)
}

/// GMM Fisher vector encoding of an image: pooled gradients, then the
/// configured normalizations.
pub fn gmmfv_encode(
    features: &FeatureSet,
    model: &GmmModel,
    mode: GmmFvMode,
    norm: &NormalizationSpec,
) -> Result<FisherVector> {
    let raw = gmmfv_encode_raw(features, model, mode)?;
    let normalized = norm.apply(&raw)?;
    let layout = FvLayout::GmmFvc {
        dim: model.dim(),
        components: model.components(),
        mean_only: mode == GmmFvMode::MeanOnly,
    };
    FisherVector::new(normalized, layout)
}
