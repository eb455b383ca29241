//! One-vs-rest linear SVM trained by dual coordinate descent, plus the
//! evaluation metrics used on encoded datasets.
//!
//! Each binary subproblem minimizes the L1-loss SVM dual
//! `f(a) = 0.5 ||w(a)||^2 - sum_i a_i` with `0 <= a_i <= C` and
//! `w(a) = sum_i a_i y_i x_i`. The bias is absorbed by augmenting every
//! sample with a constant feature of 1. Convergence is certified by the
//! primal-dual gap.

use ndarray::{Array1, Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::types::{FisherVector, SvmModel};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvmTrainParams {
    /// Misclassification cost `C > 0`.
    pub c: f64,
    /// Maximum passes over the data per class.
    pub epochs: usize,
    /// Stop a subproblem once its primal-dual gap falls below this.
    pub gap_tol: f64,
    pub seed: u64,
}

impl Default for SvmTrainParams {
    fn default() -> Self {
        Self {
            c: 1.0,
            epochs: 1000,
            gap_tol: 1e-4,
            seed: 0,
        }
    }
}

/// Per-class convergence diagnostics.
#[derive(Debug, Clone)]
pub struct SvmTrainReport {
    /// Final primal-dual gap per class.
    pub gaps: Vec<f64>,
    /// Dual objective value after each epoch, per class; non-increasing.
    pub dual_objective_traces: Vec<Vec<f64>>,
    pub converged: Vec<bool>,
}

/// Trains one-vs-rest linear SVMs on the rows of `data`.
pub fn svm_train(
    data: ArrayView2<f64>,
    labels: &[usize],
    params: &SvmTrainParams,
) -> Result<(SvmModel, SvmTrainReport)> {
    if data.nrows() != labels.len() {
        return Err(Error::Dimension(format!(
            "{} rows but {} labels",
            data.nrows(),
            labels.len()
        )));
    }
    if data.nrows() == 0 {
        return Err(Error::InvalidParam("empty training set".into()));
    }
    if !(params.c > 0.0 && params.c.is_finite()) {
        return Err(Error::InvalidParam(format!("C must be > 0, got {}", params.c)));
    }
    if params.epochs == 0 {
        return Err(Error::InvalidParam("epochs must be positive".into()));
    }
    let classes = labels.iter().max().unwrap() + 1;
    if classes < 2 {
        return Err(Error::InvalidParam("need at least 2 classes".into()));
    }
    for c in 0..classes {
        if !labels.iter().any(|&l| l == c) {
            return Err(Error::InvalidParam(format!("class {c} has no examples")));
        }
    }

    let dim = data.ncols();
    let per_class: Vec<(Array1<f64>, f64, Vec<f64>, bool)> = (0..classes)
        .into_par_iter()
        .map(|class| {
            let seed = params.seed.wrapping_add((class as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            train_binary(data, labels, class, params, seed)
        })
        .collect();

    let mut weights = Array2::zeros((classes, dim));
    let mut bias = Array1::zeros(classes);
    let mut gaps = Vec::with_capacity(classes);
    let mut traces = Vec::with_capacity(classes);
    let mut converged = Vec::with_capacity(classes);
    for (class, (w_aug, gap, trace, conv)) in per_class.into_iter().enumerate() {
        for j in 0..dim {
            weights[[class, j]] = w_aug[j];
        }
        bias[class] = w_aug[dim];
        gaps.push(gap);
        traces.push(trace);
        converged.push(conv);
    }

    Ok((
        SvmModel::new(weights, bias)?,
        SvmTrainReport {
            gaps,
            dual_objective_traces: traces,
            converged,
        },
    ))
}

/// Trains on Fisher vectors, validating that they share one layout.
pub fn svm_train_fv(
    vectors: &[FisherVector],
    labels: &[usize],
    params: &SvmTrainParams,
) -> Result<(SvmModel, SvmTrainReport)> {
    let first = vectors
        .first()
        .ok_or_else(|| Error::InvalidParam("empty training set".into()))?;
    let len = first.len();
    for (i, v) in vectors.iter().enumerate() {
        if v.layout() != first.layout() {
            return Err(Error::Dimension(format!(
                "vector {i} has layout {:?}, expected {:?}",
                v.layout(),
                first.layout()
            )));
        }
    }
    let mut data = Array2::zeros((vectors.len(), len));
    for (i, v) in vectors.iter().enumerate() {
        data.row_mut(i).assign(&v.values());
    }
    svm_train(data.view(), labels, params)
}

/// Dual coordinate descent on one binary subproblem. Returns the augmented
/// weight vector, the final gap, the per-epoch dual objective, and whether
/// the gap tolerance was reached.
fn train_binary(
    data: ArrayView2<f64>,
    labels: &[usize],
    class: usize,
    params: &SvmTrainParams,
    seed: u64,
) -> (Array1<f64>, f64, Vec<f64>, bool) {
    let n = data.nrows();
    let dim = data.ncols();
    let y: Vec<f64> = labels
        .iter()
        .map(|&l| if l == class { 1.0 } else { -1.0 })
        .collect();
    // squared norms of the augmented samples
    let q: Vec<f64> = (0..n)
        .map(|i| {
            let row = data.row(i);
            row.dot(&row) + 1.0
        })
        .collect();

    let mut alpha = vec![0.0f64; n];
    let mut w = Array1::<f64>::zeros(dim + 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut trace = Vec::new();
    let mut gap = f64::INFINITY;
    let mut converged = false;

    for _epoch in 0..params.epochs {
        order.shuffle(&mut rng);
        for &i in order.iter() {
            let row = data.row(i);
            let margin = row.dot(&w.slice(ndarray::s![..dim])) + w[dim];
            let g = y[i] * margin - 1.0;
            let pg = if alpha[i] <= 0.0 {
                g.min(0.0)
            } else if alpha[i] >= params.c {
                g.max(0.0)
            } else {
                g
            };
            if pg == 0.0 {
                continue;
            }
            let old = alpha[i];
            let new = (old - g / q[i]).clamp(0.0, params.c);
            if new == old {
                continue;
            }
            alpha[i] = new;
            let step = (new - old) * y[i];
            for j in 0..dim {
                w[j] += step * row[j];
            }
            w[dim] += step;
        }

        let w_sq = w.dot(&w);
        let alpha_sum: f64 = alpha.iter().sum();
        let dual_obj = 0.5 * w_sq - alpha_sum;
        trace.push(dual_obj);

        let mut hinge = 0.0;
        for i in 0..n {
            let row = data.row(i);
            let margin = row.dot(&w.slice(ndarray::s![..dim])) + w[dim];
            hinge += (1.0 - y[i] * margin).max(0.0);
        }
        let primal = 0.5 * w_sq + params.c * hinge;
        gap = primal + dual_obj; // P - D with D = -dual_obj
        if gap <= params.gap_tol {
            converged = true;
            break;
        }
    }
    (w, gap, trace, converged)
}

/// Predicted class ids (argmax score, ties to the lowest id) and the raw
/// per-class scores.
#[derive(Debug, Clone)]
pub struct Predictions {
    pub labels: Vec<usize>,
    pub scores: Array2<f64>,
}

pub fn svm_predict(model: &SvmModel, data: ArrayView2<f64>) -> Result<Predictions> {
    if data.ncols() != model.dim() {
        return Err(Error::Dimension(format!(
            "samples have dim {}, classifier expects {}",
            data.ncols(),
            model.dim()
        )));
    }
    let mut scores = data.dot(&model.weights().t());
    for mut row in scores.rows_mut() {
        row += &model.bias();
    }
    let labels = scores
        .rows()
        .into_iter()
        .map(|row| {
            let mut best = 0usize;
            for (c, v) in row.iter().enumerate() {
                if *v > row[best] {
                    best = c;
                }
            }
            best
        })
        .collect();
    Ok(Predictions { labels, scores })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Accuracy,
    MeanAveragePrecision,
}

/// Computes the metric over aligned predictions and ground truth.
pub fn evaluate(predictions: &Predictions, labels: &[usize], metric: Metric) -> Result<f64> {
    let n = labels.len();
    if n == 0 {
        return Err(Error::InvalidParam("cannot evaluate zero samples".into()));
    }
    if predictions.labels.len() != n || predictions.scores.nrows() != n {
        return Err(Error::Dimension(format!(
            "{} predictions vs {} labels",
            predictions.labels.len(),
            n
        )));
    }
    match metric {
        Metric::Accuracy => {
            let hits = predictions
                .labels
                .iter()
                .zip(labels.iter())
                .filter(|(p, l)| p == l)
                .count();
            Ok(hits as f64 / n as f64)
        }
        Metric::MeanAveragePrecision => {
            let classes = predictions.scores.ncols();
            let mut sum = 0.0;
            let mut counted = 0usize;
            for c in 0..classes {
                let positives = labels.iter().filter(|&&l| l == c).count();
                if positives == 0 {
                    continue;
                }
                sum += average_precision(predictions.scores.column(c).to_vec(), labels, c);
                counted += 1;
            }
            if counted == 0 {
                return Err(Error::InvalidParam("no class has positive examples".into()));
            }
            Ok(sum / counted as f64)
        }
    }
}

/// Average precision of ranking `scores` (descending, ties to the lower
/// index) against binary relevance `label == class`.
fn average_precision(scores: Vec<f64>, labels: &[usize], class: usize) -> f64 {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .expect("finite scores")
            .then(a.cmp(&b))
    });
    let mut hits = 0usize;
    let mut acc = 0.0;
    for (rank, &idx) in order.iter().enumerate() {
        if labels[idx] == class {
            hits += 1;
            acc += hits as f64 / (rank + 1) as f64;
        }
    }
    acc / hits as f64
}
