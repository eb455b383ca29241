//! Small dense linear-algebra kernels.
//!
//! Everything here is deterministic pure Rust: no BLAS/LAPACK linkage, so
//! results are bit-identical across runs and machines with the same target.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

/// Solves `a * x = b` for a square matrix by Gaussian elimination with
/// partial pivoting. Returns `None` when a pivot falls below `1e-12` times
/// the largest absolute entry of `a` (treated as singular).
pub fn solve(a: ArrayView2<f64>, b: ArrayView1<f64>) -> Option<Array1<f64>> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "solve: matrix must be square");
    assert_eq!(n, b.len(), "solve: rhs length mismatch");
    if n == 0 {
        return Some(Array1::zeros(0));
    }

    let mut m = a.to_owned();
    let mut rhs = b.to_owned();
    let scale = m.iter().fold(0.0f64, |acc, v| acc.max(v.abs())).max(1.0);
    let eps = 1e-12 * scale;

    for col in 0..n {
        let mut pivot_row = col;
        let mut pivot_val = m[[col, col]].abs();
        for r in col + 1..n {
            let v = m[[r, col]].abs();
            if v > pivot_val {
                pivot_val = v;
                pivot_row = r;
            }
        }
        if pivot_val < eps {
            return None;
        }
        if pivot_row != col {
            for c in 0..n {
                m.swap([col, c], [pivot_row, c]);
            }
            rhs.swap(col, pivot_row);
        }
        let pivot = m[[col, col]];
        for r in col + 1..n {
            let factor = m[[r, col]] / pivot;
            if factor == 0.0 {
                continue;
            }
            for c in col..n {
                m[[r, c]] -= factor * m[[col, c]];
            }
            rhs[r] -= factor * rhs[col];
        }
    }

    let mut x = Array1::zeros(n);
    for row in (0..n).rev() {
        let mut acc = rhs[row];
        for c in row + 1..n {
            acc -= m[[row, c]] * x[c];
        }
        x[row] = acc / m[[row, row]];
    }
    Some(x)
}

/// Eigendecomposition of a symmetric matrix by the cyclic Jacobi method.
///
/// Returns `(eigenvalues, eigenvectors)` with eigenvalues sorted in
/// descending order and eigenvectors as the corresponding columns.
pub fn eigh(a: ArrayView2<f64>) -> (Array1<f64>, Array2<f64>) {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "eigh: matrix must be square");

    let mut m = a.to_owned();
    let mut v = Array2::eye(n);
    if n <= 1 {
        return (m.diag().to_owned(), v);
    }

    let frob = m.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    let tol = 1e-14 * frob;
    const MAX_SWEEPS: usize = 64;

    for _ in 0..MAX_SWEEPS {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in p + 1..n {
                off += m[[p, q]] * m[[p, q]];
            }
        }
        if (2.0 * off).sqrt() <= tol {
            break;
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = m[[p, q]];
                if apq.abs() <= tol / (n as f64) {
                    continue;
                }
                let app = m[[p, p]];
                let aqq = m[[q, q]];
                let theta = (aqq - app) / (2.0 * apq);
                // Stable tangent of the rotation angle.
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                for k in 0..n {
                    let mkp = m[[k, p]];
                    let mkq = m[[k, q]];
                    m[[k, p]] = c * mkp - s * mkq;
                    m[[k, q]] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[[p, k]];
                    let mqk = m[[q, k]];
                    m[[p, k]] = c * mpk - s * mqk;
                    m[[q, k]] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[[j, j]].partial_cmp(&m[[i, i]]).unwrap());

    let mut values = Array1::zeros(n);
    let mut vectors = Array2::zeros((n, n));
    for (dst, &src) in order.iter().enumerate() {
        values[dst] = m[[src, src]];
        for k in 0..n {
            vectors[[k, dst]] = v[[k, src]];
        }
    }
    (values, vectors)
}

/// Minimum-norm solution of `a * x = b` for a symmetric positive
/// semidefinite `a`, via eigendecomposition with relative cutoff `rcond`.
pub fn pinv_solve(a: ArrayView2<f64>, b: ArrayView1<f64>, rcond: f64) -> Array1<f64> {
    let (values, vectors) = eigh(a);
    let cutoff = rcond * values.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let mut x = Array1::zeros(b.len());
    for (i, &lam) in values.iter().enumerate() {
        if lam <= cutoff {
            continue;
        }
        let col = vectors.column(i);
        let coeff = col.dot(&b) / lam;
        x.scaled_add(coeff, &col);
    }
    x
}
