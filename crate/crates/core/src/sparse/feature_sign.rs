//! Active-set lasso solver in the feature-sign style.
//!
//! Maintains an active set with fixed signs, solves the resulting equality-
//! constrained quadratic exactly, and line-searches over the sign-crossing
//! points of the segment to the unconstrained optimum. Independent of the
//! coordinate-descent solver so the two can cross-check each other.

use ndarray::{Array1, Array2, ArrayView1};

use crate::error::{Error, Result};
use crate::linalg;
use crate::types::SparseCode;

use super::cd::{kkt_residual, objective_from_gram};
use super::{GramContext, LassoSolution, SparseCodingParams};

pub(crate) fn solve(
    ctx: &GramContext<'_>,
    x: ArrayView1<f64>,
    params: &SparseCodingParams,
) -> Result<LassoSolution> {
    let atoms = ctx.dict.atoms();
    let gram = &ctx.gram;
    let rho = ctx.rho(x);
    let x_sq = x.dot(&x);
    let gamma = params.lambda * params.sigma2;
    // tolerance on the unscaled gradient 2(Gu - rho)
    let tau = params.tol * params.sigma2;

    let mut u: Array1<f64> = Array1::zeros(atoms);
    let mut q: Array1<f64> = Array1::zeros(atoms);
    let mut active: Vec<usize> = Vec::new();
    let mut steps = 0usize;

    loop {
        // gradient of ||x - Bu||^2 wrt u is 2(q - rho)
        // optimality over the zero coordinates
        let mut worst_idx = None;
        let mut worst_viol = tau;
        for k in 0..atoms {
            if u[k] != 0.0 {
                continue;
            }
            let grad = 2.0 * (q[k] - rho[k]);
            let viol = grad.abs() - gamma;
            if viol > worst_viol {
                worst_viol = viol;
                worst_idx = Some(k);
            }
        }

        match worst_idx {
            None => {
                let residual = kkt_residual(&u, &q, &rho, params);
                let objective = objective_from_gram(&u, &q, &rho, x_sq, params);
                return Ok(LassoSolution {
                    code: SparseCode::new(u).expect("finite iterate"),
                    kkt_residual: residual,
                    objective,
                    iterations: steps,
                });
            }
            Some(k) => {
                if !active.contains(&k) {
                    active.push(k);
                    active.sort_unstable();
                }
            }
        }

        // inner loop: restore optimality over the active set
        loop {
            steps += 1;
            if steps > params.max_iter {
                let residual = kkt_residual(&u, &q, &rho, params);
                return Err(Error::Convergence {
                    context: "lasso feature-sign".into(),
                    residual,
                    iterate: u.to_vec(),
                });
            }

            // signs for the restricted problem; a just-activated coordinate
            // gets the descent sign of its gradient
            let theta: Vec<f64> = active
                .iter()
                .map(|&k| {
                    if u[k] != 0.0 {
                        u[k].signum()
                    } else {
                        -(2.0 * (q[k] - rho[k])).signum()
                    }
                })
                .collect();

            // solve G_AA u_A = rho_A - (gamma/2) theta
            let n = active.len();
            let mut gaa = Array2::zeros((n, n));
            let mut rhs = Array1::zeros(n);
            for (i, &ki) in active.iter().enumerate() {
                rhs[i] = rho[ki] - 0.5 * gamma * theta[i];
                for (j, &kj) in active.iter().enumerate() {
                    gaa[[i, j]] = gram[[ki, kj]];
                }
            }
            let target = match linalg::solve(gaa.view(), rhs.view()) {
                Some(t) => t,
                None => linalg::pinv_solve(gaa.view(), rhs.view(), 1e-12),
            };

            // discrete line search from u_A towards target over sign crossings
            let current: Vec<f64> = active.iter().map(|&k| u[k]).collect();
            let rho_a = rhs_plain(&rho, &active);
            let target_vec = target.to_vec();
            let mut best_vals = target_vec.clone();
            let mut best_obj =
                restricted_objective(&gaa, &rho_a, x_sq, &target_vec, gamma, params.sigma2);
            for i in 0..n {
                let ci = current[i];
                // a coordinate crosses zero when current and target disagree in sign
                if ci == 0.0 || ci.signum() * target_vec[i].signum() >= 0.0 {
                    continue;
                }
                let t = ci / (ci - target_vec[i]);
                if !(t > 0.0 && t < 1.0) {
                    continue;
                }
                let mut candidate = vec![0.0; n];
                for j in 0..n {
                    candidate[j] = current[j] + t * (target_vec[j] - current[j]);
                }
                candidate[i] = 0.0;
                let obj =
                    restricted_objective(&gaa, &rho_a, x_sq, &candidate, gamma, params.sigma2);
                if obj < best_obj {
                    best_obj = obj;
                    best_vals = candidate;
                }
            }
            let new_vals = best_vals;
            for (i, &k) in active.iter().enumerate() {
                u[k] = new_vals[i];
            }
            // refresh q = G u over the support
            q.fill(0.0);
            for &k in active.iter() {
                if u[k] != 0.0 {
                    q.scaled_add(u[k], &gram.column(k));
                }
            }
            active.retain(|&k| u[k] != 0.0);

            // optimality over the active (nonzero) coordinates
            let mut ok = true;
            for &k in active.iter() {
                let grad = 2.0 * (q[k] - rho[k]);
                if (grad + gamma * u[k].signum()).abs() > tau {
                    ok = false;
                    break;
                }
            }
            if ok {
                break;
            }
        }
    }
}

fn rhs_plain(rho: &Array1<f64>, active: &[usize]) -> Vec<f64> {
    active.iter().map(|&k| rho[k]).collect()
}

/// Objective restricted to the active set:
/// `(x'x - 2 rho_A'u_A + u_A'G_AA u_A)/sigma2 + lambda ||u_A||_1`.
fn restricted_objective(
    gaa: &Array2<f64>,
    rho_a: &[f64],
    x_sq: f64,
    u_a: &[f64],
    gamma: f64,
    sigma2: f64,
) -> f64 {
    let n = u_a.len();
    let mut quad = x_sq;
    let mut l1 = 0.0;
    for i in 0..n {
        quad -= 2.0 * rho_a[i] * u_a[i];
        l1 += u_a[i].abs();
        for j in 0..n {
            quad += u_a[i] * gaa[[i, j]] * u_a[j];
        }
    }
    (quad.max(0.0) + gamma * l1) / sigma2
}
