//! Sparse coding: l1-regularized inference and dictionary learning.
//!
//! The inference problem is
//!
//! ```text
//!   min_u  (1/sigma2) * ||x - B u||^2  +  lambda * ||u||_1
//! ```
//!
//! Two independent solvers are provided: coordinate descent with covariance
//! (Gram) updates as the reference, and an active-set solver in the
//! feature-sign style. Both certify their result with the KKT residual in
//! the scaled form used throughout: for nonzero `u_k`,
//! `|(2/sigma2) * b_k'(Bu - x) + lambda * sign(u_k)|`, and for zero `u_k`
//! the amount by which `|(2/sigma2) * b_k'(Bu - x)|` exceeds `lambda`.

pub(crate) mod cd;
mod dict;
mod feature_sign;
mod omp;

pub use dict::{dict_learn, DictLearnResult};
pub use omp::{omp_solve, OmpSolution};

use ndarray::{Array1, Array2, ArrayView1};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::types::{Dictionary, FeatureSet, SparseCode};

/// Parameters of the l1-regularized inference problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SparseCodingParams {
    /// Sparsity weight `lambda >= 0`.
    pub lambda: f64,
    /// Noise variance `sigma2 > 0` scaling the quadratic term.
    pub sigma2: f64,
    /// Iteration budget: full sweeps for coordinate descent, active-set
    /// steps for feature-sign.
    pub max_iter: usize,
    /// KKT residual tolerance (scaled form, see module docs).
    pub tol: f64,
}

impl SparseCodingParams {
    pub fn new(lambda: f64) -> Self {
        Self {
            lambda,
            sigma2: 1.0,
            max_iter: 1000,
            tol: 1e-8,
        }
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_sigma2(mut self, sigma2: f64) -> Self {
        self.sigma2 = sigma2;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidParam(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return Err(Error::InvalidParam(format!("sigma2 must be > 0, got {}", self.sigma2)));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidParam("max_iter must be positive".into()));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::InvalidParam(format!("tol must be > 0, got {}", self.tol)));
        }
        Ok(())
    }
}

/// Scale-aware default sparsity weight: `0.15 * mean(||x||_2) / sqrt(d)`.
pub fn default_lambda(features: &FeatureSet) -> f64 {
    let mean_norm = features
        .data()
        .rows()
        .into_iter()
        .map(|r| r.dot(&r).sqrt())
        .sum::<f64>()
        / features.count() as f64;
    0.15 * mean_norm / (features.dim() as f64).sqrt()
}

/// Which inference algorithm to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LassoSolver {
    #[default]
    CoordinateDescent,
    FeatureSign,
}

/// A certified solution of the inference problem.
#[derive(Debug, Clone)]
pub struct LassoSolution {
    pub code: SparseCode,
    /// Final KKT residual (scaled form).
    pub kkt_residual: f64,
    /// Objective value `(1/sigma2)||x - Bu||^2 + lambda ||u||_1`.
    pub objective: f64,
    pub iterations: usize,
}

/// Precomputed Gram matrix shared across solves against one dictionary.
pub(crate) struct GramContext<'a> {
    pub dict: &'a Dictionary,
    pub gram: Array2<f64>,
}

impl<'a> GramContext<'a> {
    pub fn new(dict: &'a Dictionary) -> Self {
        let basis = dict.basis();
        Self {
            dict,
            gram: basis.t().dot(&basis),
        }
    }

    pub fn rho(&self, x: ArrayView1<f64>) -> Array1<f64> {
        self.dict.basis().t().dot(&x)
    }
}

fn check_input(x: ArrayView1<f64>, dict: &Dictionary, params: &SparseCodingParams) -> Result<()> {
    params.validate()?;
    if x.len() != dict.dim() {
        return Err(Error::Dimension(format!(
            "feature has dim {}, dictionary expects {}",
            x.len(),
            dict.dim()
        )));
    }
    if !x.iter().all(|v| v.is_finite()) {
        return Err(Error::Data("feature contains non-finite values".into()));
    }
    Ok(())
}

/// Solves the inference problem with the reference coordinate-descent solver.
pub fn lasso_solve(
    x: ArrayView1<f64>,
    dict: &Dictionary,
    params: &SparseCodingParams,
) -> Result<LassoSolution> {
    lasso_solve_with(LassoSolver::CoordinateDescent, x, dict, params)
}

/// Solves the inference problem with the chosen solver.
pub fn lasso_solve_with(
    solver: LassoSolver,
    x: ArrayView1<f64>,
    dict: &Dictionary,
    params: &SparseCodingParams,
) -> Result<LassoSolution> {
    check_input(x, dict, params)?;
    let ctx = GramContext::new(dict);
    match solver {
        LassoSolver::CoordinateDescent => cd::solve(&ctx, x, params, None),
        LassoSolver::FeatureSign => feature_sign::solve(&ctx, x, params),
    }
}

/// Solves the inference problem for every row of `features`.
///
/// Rows are independent, so they run in parallel; the result order matches
/// the row order and every per-row result is identical to a standalone
/// `lasso_solve` on that row.
pub fn lasso_solve_batch(
    features: &FeatureSet,
    dict: &Dictionary,
    params: &SparseCodingParams,
) -> Result<Vec<LassoSolution>> {
    params.validate()?;
    if features.dim() != dict.dim() {
        return Err(Error::Dimension(format!(
            "features have dim {}, dictionary expects {}",
            features.dim(),
            dict.dim()
        )));
    }
    let ctx = GramContext::new(dict);
    batch_with_context(&ctx, features, params, None)
}

/// Batch solve over a prebuilt Gram context, optionally warm-started.
pub(crate) fn batch_with_context(
    ctx: &GramContext<'_>,
    features: &FeatureSet,
    params: &SparseCodingParams,
    warm: Option<&[Array1<f64>]>,
) -> Result<Vec<LassoSolution>> {
    let data = features.data();
    let results: Vec<Result<LassoSolution>> = (0..features.count())
        .into_par_iter()
        .map(|i| cd::solve(ctx, data.row(i), params, warm.map(|w| w[i].view())))
        .collect();
    let mut out = Vec::with_capacity(results.len());
    for (i, res) in results.into_iter().enumerate() {
        match res {
            Ok(sol) => out.push(sol),
            Err(Error::Convergence {
                context,
                residual,
                iterate,
            }) => {
                return Err(Error::Convergence {
                    context: format!("row {i}: {context}"),
                    residual,
                    iterate,
                })
            }
            Err(e) => return Err(Error::Data(format!("row {i}: {e}"))),
        }
    }
    Ok(out)
}

/// Batch result that keeps last iterates instead of failing on rows that
/// run out of iterations. Panics on structural errors, which the caller is
/// expected to have ruled out.
pub(crate) struct TolerantBatch {
    pub codes: Vec<Array1<f64>>,
    pub nonconverged: usize,
}

pub(crate) fn batch_codes_tolerant(
    ctx: &GramContext<'_>,
    features: &FeatureSet,
    params: &SparseCodingParams,
    warm: Option<&[Array1<f64>]>,
) -> TolerantBatch {
    let data = features.data();
    let results: Vec<Result<LassoSolution>> = (0..features.count())
        .into_par_iter()
        .map(|i| cd::solve(ctx, data.row(i), params, warm.map(|w| w[i].view())))
        .collect();
    let mut codes = Vec::with_capacity(results.len());
    let mut nonconverged = 0usize;
    for (i, res) in results.into_iter().enumerate() {
        match res {
            Ok(sol) => codes.push(sol.code.values().to_owned()),
            Err(Error::Convergence { iterate, residual, .. }) => {
                log::warn!("row {i}: code solve stopped at residual {residual:.3e}, keeping last iterate");
                nonconverged += 1;
                codes.push(Array1::from_vec(iterate));
            }
            Err(e) => panic!("unexpected per-row error in validated batch: {e}"),
        }
    }
    TolerantBatch { codes, nonconverged }
}

/// Objective `(1/sigma2)||x - Bu||^2 + lambda ||u||_1` evaluated directly.
pub fn lasso_objective(
    x: ArrayView1<f64>,
    dict: &Dictionary,
    u: ArrayView1<f64>,
    params: &SparseCodingParams,
) -> f64 {
    let recon = dict.basis().dot(&u);
    let mut quad = 0.0;
    for (xi, ri) in x.iter().zip(recon.iter()) {
        let diff = xi - ri;
        quad += diff * diff;
    }
    quad / params.sigma2 + params.lambda * u.iter().map(|v| v.abs()).sum::<f64>()
}
