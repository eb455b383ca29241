//! Brute-force and closed-form reference computations for tests.
//!
//! Everything here is deliberately naive and self-contained (own linear
//! solver, direct objective evaluations) so it can serve as an independent
//! check on the production solvers.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

/// Gaussian elimination with partial pivoting; `None` when singular.
fn gauss_solve(a: &Array2<f64>, b: &Array1<f64>) -> Option<Array1<f64>> {
    let n = b.len();
    let mut m = a.clone();
    let mut rhs = b.clone();
    let scale = m.iter().fold(0.0f64, |acc, v| acc.max(v.abs())).max(1.0);
    for col in 0..n {
        let mut piv = col;
        for r in col + 1..n {
            if m[[r, col]].abs() > m[[piv, col]].abs() {
                piv = r;
            }
        }
        if m[[piv, col]].abs() < 1e-12 * scale {
            return None;
        }
        if piv != col {
            for c in 0..n {
                m.swap([col, c], [piv, c]);
            }
            rhs.swap(col, piv);
        }
        for r in col + 1..n {
            let f = m[[r, col]] / m[[col, col]];
            for c in col..n {
                m[[r, c]] -= f * m[[col, c]];
            }
            rhs[r] -= f * rhs[col];
        }
    }
    let mut x = Array1::zeros(n);
    for r in (0..n).rev() {
        let mut acc = rhs[r];
        for c in r + 1..n {
            acc -= m[[r, c]] * x[c];
        }
        x[r] = acc / m[[r, r]];
    }
    Some(x)
}

/// Lasso objective `(1/sigma2) ||x - B u||^2 + lambda ||u||_1`.
pub fn lasso_objective(
    x: ArrayView1<f64>,
    basis: ArrayView2<f64>,
    u: ArrayView1<f64>,
    lambda: f64,
    sigma2: f64,
) -> f64 {
    let d = x.len();
    let mut quad = 0.0;
    for i in 0..d {
        let mut recon = 0.0;
        for k in 0..basis.ncols() {
            recon += basis[[i, k]] * u[k];
        }
        let diff = x[i] - recon;
        quad += diff * diff;
    }
    quad / sigma2 + lambda * u.iter().map(|v| v.abs()).sum::<f64>()
}

/// Exhaustive sign-pattern lasso oracle: enumerates all `3^K` sign patterns,
/// solves the restricted stationarity system for each, and returns the
/// feasible candidate with the lowest objective. Exact up to the linear
/// solves for `K` small enough to enumerate.
pub fn lasso_sign_pattern_oracle(
    x: ArrayView1<f64>,
    basis: ArrayView2<f64>,
    lambda: f64,
    sigma2: f64,
) -> (Array1<f64>, f64) {
    let k = basis.ncols();
    assert!(k <= 12, "sign enumeration is exponential in K");
    let gamma = lambda * sigma2;

    let mut best_u = Array1::zeros(k);
    let mut best_obj = lasso_objective(x, basis, best_u.view(), lambda, sigma2);

    let mut pattern = vec![0u8; k];
    let total = 3usize.pow(k as u32);
    for code in 1..total {
        let mut c = code;
        for p in pattern.iter_mut() {
            *p = (c % 3) as u8;
            c /= 3;
        }
        let active: Vec<usize> = (0..k).filter(|&i| pattern[i] != 0).collect();
        let signs: Vec<f64> = active
            .iter()
            .map(|&i| if pattern[i] == 1 { 1.0 } else { -1.0 })
            .collect();

        let n = active.len();
        let mut gaa = Array2::zeros((n, n));
        let mut rhs = Array1::zeros(n);
        for (i, &ki) in active.iter().enumerate() {
            let col_i = basis.column(ki);
            rhs[i] = col_i.dot(&x) - 0.5 * gamma * signs[i];
            for (j, &kj) in active.iter().enumerate() {
                gaa[[i, j]] = col_i.dot(&basis.column(kj));
            }
        }
        let Some(sol) = gauss_solve(&gaa, &rhs) else {
            continue;
        };
        let mut u = Array1::zeros(k);
        for (i, &ki) in active.iter().enumerate() {
            u[ki] = sol[i];
        }
        let obj = lasso_objective(x, basis, u.view(), lambda, sigma2);
        if obj < best_obj {
            best_obj = obj;
            best_u = u;
        }
    }
    (best_u, best_obj)
}

/// Best support of exactly `size` atoms by exhaustive least squares.
/// Returns the sorted support and its residual norm.
pub fn omp_best_subset(
    x: ArrayView1<f64>,
    basis: ArrayView2<f64>,
    size: usize,
) -> (Vec<usize>, f64) {
    let k = basis.ncols();
    assert!(size >= 1 && size <= k);
    let mut best: Option<(Vec<usize>, f64)> = None;

    let mut indices: Vec<usize> = (0..size).collect();
    loop {
        let n = indices.len();
        let mut gss = Array2::zeros((n, n));
        let mut rhs = Array1::zeros(n);
        for (i, &ki) in indices.iter().enumerate() {
            rhs[i] = basis.column(ki).dot(&x);
            for (j, &kj) in indices.iter().enumerate() {
                gss[[i, j]] = basis.column(ki).dot(&basis.column(kj));
            }
        }
        if let Some(coef) = gauss_solve(&gss, &rhs) {
            let mut residual = x.to_owned();
            for (i, &ki) in indices.iter().enumerate() {
                for r in 0..x.len() {
                    residual[r] -= coef[i] * basis[[r, ki]];
                }
            }
            let norm = residual.dot(&residual).sqrt();
            if best.as_ref().map_or(true, |(_, b)| norm < *b) {
                best = Some((indices.clone(), norm));
            }
        }

        // next combination in lexicographic order
        let mut i = size;
        loop {
            if i == 0 {
                return best.expect("at least one solvable subset");
            }
            i -= 1;
            if indices[i] != i + k - size {
                break;
            }
        }
        indices[i] += 1;
        for j in i + 1..size {
            indices[j] = indices[j - 1] + 1;
        }
    }
}

/// Sum over rows of the diagonal-covariance mixture log-likelihood,
/// evaluated directly with log-sum-exp.
pub fn mixture_log_likelihood(
    weights: ArrayView1<f64>,
    means: ArrayView2<f64>,
    variances: ArrayView2<f64>,
    data: ArrayView2<f64>,
) -> f64 {
    let m = weights.len();
    let d = means.ncols();
    let mut total = 0.0;
    for row in data.rows() {
        let mut log_terms = Vec::with_capacity(m);
        for c in 0..m {
            let mut log_pdf = 0.0;
            for j in 0..d {
                let var = variances[[c, j]];
                let diff = row[j] - means[[c, j]];
                log_pdf += -0.5 * ((2.0 * std::f64::consts::PI * var).ln() + diff * diff / var);
            }
            log_terms.push(weights[c].ln() + log_pdf);
        }
        let max = log_terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sum_exp: f64 = log_terms.iter().map(|t| (t - max).exp()).sum();
        total += max + sum_exp.ln();
    }
    total
}
