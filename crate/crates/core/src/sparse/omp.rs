//! Orthogonal matching pursuit: greedy sparse approximation.

use ndarray::{Array1, Array2, ArrayView1};

use crate::error::{Error, Result};
use crate::linalg;
use crate::types::{Dictionary, SparseCode};

#[derive(Debug, Clone)]
pub struct OmpSolution {
    pub code: SparseCode,
    pub residual_norm: f64,
    /// Set when a rank-deficient selected submatrix forced the least-norm
    /// fallback.
    pub rank_deficient: bool,
}

/// Greedy pursuit with at most `k_max` atoms. Ties in correlation break to
/// the lowest atom index. After every selection the coefficients are
/// re-solved by least squares, so the residual stays orthogonal to the
/// selected atoms.
pub fn omp_solve(x: ArrayView1<f64>, dict: &Dictionary, k_max: usize) -> Result<OmpSolution> {
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
    let limit = dict.dim().min(dict.atoms());
    if k_max == 0 || k_max > limit {
        return Err(Error::InvalidParam(format!(
            "k_max must be in 1..={limit}, got {k_max}"
        )));
    }

    let basis = dict.basis();
    let x_norm = x.dot(&x).sqrt();
    let stop = 1e-12 * x_norm.max(1.0);

    let mut residual = x.to_owned();
    let mut support: Vec<usize> = Vec::new();
    let mut coeffs: Array1<f64> = Array1::zeros(0);
    let mut rank_deficient = false;

    while support.len() < k_max {
        let mut best = None;
        let mut best_abs = 0.0f64;
        for k in 0..dict.atoms() {
            if support.contains(&k) {
                continue;
            }
            let corr = basis.column(k).dot(&residual).abs();
            if corr > best_abs {
                best_abs = corr;
                best = Some(k);
            }
        }
        let Some(k) = best else { break };
        if best_abs <= stop {
            break;
        }
        support.push(k);

        // least squares on the selected atoms
        let n = support.len();
        let mut gss = Array2::zeros((n, n));
        let mut rhs = Array1::zeros(n);
        for (i, &ki) in support.iter().enumerate() {
            rhs[i] = basis.column(ki).dot(&x);
            for (j, &kj) in support.iter().enumerate() {
                gss[[i, j]] = basis.column(ki).dot(&basis.column(kj));
            }
        }
        coeffs = match linalg::solve(gss.view(), rhs.view()) {
            Some(c) => c,
            None => {
                rank_deficient = true;
                linalg::pinv_solve(gss.view(), rhs.view(), 1e-12)
            }
        };

        residual.assign(&x);
        for (i, &ki) in support.iter().enumerate() {
            residual.scaled_add(-coeffs[i], &basis.column(ki));
        }
        if residual.dot(&residual).sqrt() <= stop {
            break;
        }
    }

    let mut values = Array1::zeros(dict.atoms());
    for (i, &k) in support.iter().enumerate() {
        values[k] = coeffs[i];
    }
    Ok(OmpSolution {
        residual_norm: residual.dot(&residual).sqrt(),
        code: SparseCode::new(values)?,
        rank_deficient,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn unit_dict() -> Dictionary {
        Dictionary::new(array![
            [1.0, 0.0, 0.6],
            [0.0, 1.0, 0.8],
        ])
        .unwrap()
    }

    #[test]
    fn recovers_single_atom_exactly() {
        let dict = unit_dict();
        let x = dict.atom(2).to_owned();
        let sol = omp_solve(x.view(), &dict, 1).unwrap();
        assert_eq!(sol.code.support(), vec![2]);
        assert!((sol.code.values()[2] - 1.0).abs() < 1e-12);
        assert!(sol.residual_norm < 1e-12);
        assert!(!sol.rank_deficient);
    }

    #[test]
    fn zero_input_gives_empty_support() {
        let dict = unit_dict();
        let x = array![0.0, 0.0];
        let sol = omp_solve(x.view(), &dict, 2).unwrap();
        assert_eq!(sol.code.nnz(), 0);
        assert_eq!(sol.residual_norm, 0.0);
    }

    #[test]
    fn residual_is_orthogonal_to_selection() {
        let dict = unit_dict();
        let x = array![0.7, -0.3];
        let sol = omp_solve(x.view(), &dict, 2).unwrap();
        let recon = dict.basis().dot(&sol.code.values());
        let residual = &x - &recon;
        for &k in sol.code.support().iter() {
            assert!(dict.atom(k).dot(&residual).abs() < 1e-8);
        }
    }

    #[test]
    fn k_max_bounds_are_enforced() {
        let dict = unit_dict();
        let x = array![1.0, 1.0];
        assert!(omp_solve(x.view(), &dict, 0).is_err());
        // min(d, K) = 2
        assert!(omp_solve(x.view(), &dict, 3).is_err());
    }

    #[test]
    fn near_dependent_atoms_trigger_least_norm_fallback() {
        // two atoms separated by 1e-9: both get selected, the selected Gram
        // is numerically singular
        let dict = Dictionary::new(array![
            [1.0, 1.0],
            [0.0, 1e-9],
        ])
        .unwrap();
        let x = array![1.0, 1.0];
        let sol = omp_solve(x.view(), &dict, 2).unwrap();
        assert!(sol.rank_deficient);
        assert_eq!(sol.code.nnz(), 2);
        // the fallback still reconstructs the reachable direction
        let recon = dict.basis().dot(&sol.code.values());
        assert!((recon[0] - 1.0).abs() < 1e-6);
    }
}
