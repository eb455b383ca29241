//! Sparse-coding Fisher vector encoder.
//!
//! Each local feature is coded by solving the lasso against the dictionary
//! and taking the outer product of the reconstruction residual with the
//! coefficient vector: `(x - B u*) u*'`. The image representation is the
//! sum of these matrices over all features, vectorized atom-by-atom so that
//! sub-vector `k` is the pooled column for atom `k`, then normalized.
//!
//! The constant factor in front of the gradient is dropped: downstream
//! normalization and a linear classifier make it immaterial.

use ndarray::{Array1, Array2, ArrayView1};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::pooling::NormalizationSpec;
use crate::sparse::{cd, GramContext, SparseCodingParams};
use crate::types::{Dictionary, FeatureSet, FisherVector, FvLayout};

/// Bookkeeping from encoding one image.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EncodeStats {
    /// Features whose lasso solve hit the iteration cap; they are encoded
    /// with the last iterate instead of being dropped.
    pub nonconverged_features: usize,
}

/// Per-feature coding matrix `(x - B u*) u*'` of shape `d x K`. Columns for
/// zero coefficients are exactly zero.
pub fn scfv_encode_one(
    x: ArrayView1<f64>,
    dict: &Dictionary,
    params: &SparseCodingParams,
) -> Result<Array2<f64>> {
    params.validate()?;
    if x.len() != dict.dim() {
        return Err(Error::Dimension(format!(
            "feature has dim {}, dictionary expects {}",
            x.len(),
            dict.dim()
        )));
    }
    let ctx = GramContext::new(dict);
    let solution = cd::solve(&ctx, x, params, None)?;
    let code = solution.code.values();

    let mut out = Array2::zeros((dict.dim(), dict.atoms()));
    let residual = residual_of(x, dict, code);
    for (k, &uk) in code.iter().enumerate() {
        if uk == 0.0 {
            continue;
        }
        for i in 0..dict.dim() {
            out[[i, k]] = residual[i] * uk;
        }
    }
    Ok(out)
}

/// Pooled image encoding before normalization, plus encode stats.
///
/// Features are coded in parallel; the pooled sum always runs in feature
/// order, so the result is reproducible bit-for-bit.
pub fn scfv_encode_image_raw(
    features: &FeatureSet,
    dict: &Dictionary,
    params: &SparseCodingParams,
) -> Result<(Array1<f64>, EncodeStats)> {
    params.validate()?;
    if features.dim() != dict.dim() {
        return Err(Error::Dimension(format!(
            "features have dim {}, dictionary expects {}",
            features.dim(),
            dict.dim()
        )));
    }
    let d = dict.dim();
    let atoms = dict.atoms();
    let ctx = GramContext::new(dict);
    let data = features.data();

    let codes: Vec<Result<Array1<f64>>> = (0..features.count())
        .into_par_iter()
        .map(|i| match cd::solve(&ctx, data.row(i), params, None) {
            Ok(sol) => Ok(sol.code.values().to_owned()),
            Err(e) => Err(e),
        })
        .collect();

    let mut stats = EncodeStats::default();
    let mut pooled = Array1::zeros(d * atoms);
    for (i, code) in codes.into_iter().enumerate() {
        let code = match code {
            Ok(c) => c,
            Err(Error::Convergence { iterate, residual, .. }) => {
                log::warn!("feature {i}: lasso stopped at residual {residual:.3e}, using last iterate");
                stats.nonconverged_features += 1;
                Array1::from_vec(iterate)
            }
            Err(e) => return Err(Error::Data(format!("feature {i}: {e}"))),
        };
        let residual = residual_of(data.row(i), dict, code.view());
        for (k, &uk) in code.iter().enumerate() {
            if uk == 0.0 {
                continue;
            }
            for r in 0..d {
                pooled[k * d + r] += residual[r] * uk;
            }
        }
    }
    Ok((pooled, stats))
}

/// Full image encoding: pooled coding matrices, vectorized and normalized.
pub fn scfv_encode_image(
    features: &FeatureSet,
    dict: &Dictionary,
    params: &SparseCodingParams,
    norm: &NormalizationSpec,
) -> Result<(FisherVector, EncodeStats)> {
    let (raw, stats) = scfv_encode_image_raw(features, dict, params)?;
    let normalized = norm.apply(&raw)?;
    let layout = FvLayout::Scfvc {
        dim: dict.dim(),
        atoms: dict.atoms(),
    };
    Ok((FisherVector::new(normalized, layout)?, stats))
}

fn residual_of(x: ArrayView1<f64>, dict: &Dictionary, code: ArrayView1<f64>) -> Array1<f64> {
    let mut residual = x.to_owned();
    for (k, &uk) in code.iter().enumerate() {
        if uk != 0.0 {
            residual.scaled_add(-uk, &dict.atom(k));
        }
    }
    residual
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn orthonormal_dict() -> Dictionary {
        Dictionary::new(array![
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
        ])
        .unwrap()
    }

    #[test]
    fn zero_feature_encodes_to_zero_matrix() {
        let dict = orthonormal_dict();
        let x = array![0.0, 0.0, 0.0];
        let m = scfv_encode_one(x.view(), &dict, &SparseCodingParams::new(0.3)).unwrap();
        assert!(m.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn large_lambda_encodes_to_zero_matrix() {
        let dict = orthonormal_dict();
        let x = array![0.2, -0.1, 0.05];
        let m = scfv_encode_one(x.view(), &dict, &SparseCodingParams::new(10.0)).unwrap();
        assert!(m.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn single_atom_feature_fills_one_column() {
        let dict = orthonormal_dict();
        let x = dict.atom(0).to_owned();
        let lambda = 0.1;
        let params = SparseCodingParams::new(lambda).with_tol(1e-12);
        let m = scfv_encode_one(x.view(), &dict, &params).unwrap();
        let u1 = 1.0 - lambda * params.sigma2 / 2.0;
        // column 0 is (x - u1 b1) * u1; other columns zero
        for i in 0..3 {
            let resid = x[i] - u1 * dict.basis()[[i, 0]];
            assert_abs_diff_eq!(m[[i, 0]], resid * u1, epsilon = 1e-10);
            assert_eq!(m[[i, 1]], 0.0);
            assert_eq!(m[[i, 2]], 0.0);
        }
    }

    #[test]
    fn columns_are_zero_exactly_where_code_is_zero() {
        let dict = Dictionary::new(array![
            [0.9, 0.1, 0.3],
            [0.1, 0.9, 0.3],
            [0.1, 0.1, 0.9],
        ])
        .unwrap();
        let x = array![1.0, -0.4, 0.2];
        let params = SparseCodingParams::new(0.3).with_tol(1e-10);
        let sol = crate::sparse::lasso_solve(x.view(), &dict, &params).unwrap();
        let m = scfv_encode_one(x.view(), &dict, &params).unwrap();
        for k in 0..3 {
            let col_zero = m.column(k).iter().all(|v| *v == 0.0);
            assert_eq!(col_zero, sol.code.values()[k] == 0.0, "column {k}");
        }
    }

    #[test]
    fn single_feature_image_matches_vectorized_matrix() {
        let dict = orthonormal_dict();
        let x = array![0.7, -0.2, 0.4];
        let params = SparseCodingParams::new(0.1);
        let m = scfv_encode_one(x.view(), &dict, &params).unwrap();
        let fs = FeatureSet::new(x.clone().insert_axis(ndarray::Axis(0))).unwrap();
        let (raw, stats) = scfv_encode_image_raw(&fs, &dict, &params).unwrap();
        assert_eq!(stats.nonconverged_features, 0);
        for k in 0..3 {
            for i in 0..3 {
                assert_eq!(raw[k * 3 + i], m[[i, k]]);
            }
        }
    }

    #[test]
    fn all_zero_codes_give_zero_vector_through_normalization() {
        let dict = orthonormal_dict();
        let fs = FeatureSet::new(array![[0.0, 0.0, 0.0], [0.0, 0.0, 0.0]]).unwrap();
        let params = SparseCodingParams::new(1.0);
        let (fv, _) = scfv_encode_image(
            &fs,
            &dict,
            &params,
            &NormalizationSpec::standard(3),
        )
        .unwrap();
        assert!(fv.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn encoding_is_deterministic() {
        let dict = Dictionary::new(array![
            [0.8, 0.2, 0.4],
            [0.2, 0.8, 0.4],
            [0.2, 0.2, 0.8],
        ])
        .unwrap();
        let fs = FeatureSet::new(array![
            [0.5, -0.3, 0.8],
            [1.0, 0.4, -0.2],
            [-0.6, 0.9, 0.1],
        ])
        .unwrap();
        let params = SparseCodingParams::new(0.15);
        let (a, _) = scfv_encode_image_raw(&fs, &dict, &params).unwrap();
        let (b, _) = scfv_encode_image_raw(&fs, &dict, &params).unwrap();
        assert_eq!(a, b);
    }
}
