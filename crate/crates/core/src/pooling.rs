//! Sum-pooling and the normalizations applied to pooled encodings.

use ndarray::{Array1, ArrayView1};

use crate::error::{Error, Result};

/// Which normalizations to apply to a pooled vector, and in what order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizationSpec {
    /// Exponent of the signed power transform, in `(0, 1]`.
    pub power_alpha: f64,
    pub apply_power: bool,
    pub apply_intra: bool,
    /// Length of the per-atom (or per-component) sub-vectors.
    pub subvector_len: usize,
    /// Apply the power transform before intra-normalization (the usual
    /// order); flip for ablations.
    pub power_first: bool,
    /// Optional final global l2 normalization, off by default.
    pub global_l2: bool,
}

impl NormalizationSpec {
    /// Signed square root plus intra-normalization, power first.
    pub fn standard(subvector_len: usize) -> Self {
        Self {
            power_alpha: 0.5,
            apply_power: true,
            apply_intra: true,
            subvector_len,
            power_first: true,
            global_l2: false,
        }
    }

    /// No-op spec, useful for inspecting raw pooled vectors.
    pub fn none(subvector_len: usize) -> Self {
        Self {
            power_alpha: 1.0,
            apply_power: false,
            apply_intra: false,
            subvector_len,
            power_first: true,
            global_l2: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.power_alpha > 0.0 && self.power_alpha <= 1.0) {
            return Err(Error::InvalidParam(format!(
                "power_alpha must be in (0, 1], got {}",
                self.power_alpha
            )));
        }
        if self.subvector_len == 0 {
            return Err(Error::InvalidParam("subvector_len must be positive".into()));
        }
        Ok(())
    }

    /// Applies the configured normalizations to a pooled vector.
    pub fn apply(&self, v: &Array1<f64>) -> Result<Array1<f64>> {
        self.validate()?;
        let mut out = v.clone();
        let steps: [bool; 2] = if self.power_first {
            [self.apply_power, self.apply_intra]
        } else {
            [self.apply_intra, self.apply_power]
        };
        for (i, enabled) in steps.into_iter().enumerate() {
            if !enabled {
                continue;
            }
            let is_power = (i == 0) == self.power_first;
            out = if is_power {
                power_normalize(out.view(), self.power_alpha)
            } else {
                intra_normalize(out.view(), self.subvector_len)?
            };
        }
        if self.global_l2 {
            let norm = out.dot(&out).sqrt();
            if norm > 0.0 {
                out.mapv_inplace(|z| z / norm);
            }
        }
        Ok(out)
    }
}

/// Elementwise sum of equally sized vectors.
pub fn sum_pool(per_feature: &[Array1<f64>]) -> Result<Array1<f64>> {
    let first = per_feature
        .first()
        .ok_or_else(|| Error::InvalidParam("sum_pool of an empty list".into()))?;
    let len = first.len();
    let mut acc = Array1::zeros(len);
    for (i, v) in per_feature.iter().enumerate() {
        if v.len() != len {
            return Err(Error::Dimension(format!(
                "sum_pool element {i} has length {}, expected {len}",
                v.len()
            )));
        }
        acc += v;
    }
    Ok(acc)
}

/// Signed power transform `sign(z) * |z|^alpha`.
pub fn power_normalize(v: ArrayView1<f64>, alpha: f64) -> Array1<f64> {
    v.mapv(|z| z.signum() * z.abs().powf(alpha))
}

/// l2-normalizes each contiguous sub-vector of length `subvector_len`.
/// Exactly-zero sub-vectors pass through unchanged.
pub fn intra_normalize(v: ArrayView1<f64>, subvector_len: usize) -> Result<Array1<f64>> {
    if subvector_len == 0 || v.len() % subvector_len != 0 {
        return Err(Error::Dimension(format!(
            "vector length {} not divisible by sub-vector length {subvector_len}",
            v.len()
        )));
    }
    let mut out = v.to_owned();
    for mut chunk in out.exact_chunks_mut(subvector_len) {
        let norm = chunk.dot(&chunk).sqrt();
        if norm > 0.0 {
            chunk.mapv_inplace(|z| z / norm);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn sum_pool_basics() {
        let v = array![1.0, -2.0, 3.0];
        assert_eq!(sum_pool(&[v.clone()]).unwrap(), v);
        let sum = sum_pool(&[v.clone(), -v.clone()]).unwrap();
        assert_eq!(sum, Array1::zeros(3));
        assert!(sum_pool(&[v, array![1.0]]).is_err());
        assert!(sum_pool(&[]).is_err());
    }

    #[test]
    fn sum_pool_is_permutation_invariant() {
        let a = array![1.0, 2.0];
        let b = array![-0.5, 4.0];
        let c = array![10.0, 0.25];
        let x = sum_pool(&[a.clone(), b.clone(), c.clone()]).unwrap();
        let y = sum_pool(&[c, a, b]).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn power_normalize_known_values() {
        let v = array![-4.0, 0.0, 9.0];
        let out = power_normalize(v.view(), 0.5);
        assert_abs_diff_eq!(out[0], -2.0, epsilon = 1e-15);
        assert_eq!(out[1], 0.0);
        assert_abs_diff_eq!(out[2], 3.0, epsilon = 1e-15);
        // alpha = 1 is identity
        assert_eq!(power_normalize(v.view(), 1.0), v);
    }

    #[test]
    fn intra_normalize_three_four_five() {
        let v = array![3.0, 4.0, 0.0, 0.0];
        let out = intra_normalize(v.view(), 2).unwrap();
        assert_abs_diff_eq!(out[0], 0.6, epsilon = 1e-15);
        assert_abs_diff_eq!(out[1], 0.8, epsilon = 1e-15);
        assert_eq!(out[2], 0.0);
        assert_eq!(out[3], 0.0);
    }

    #[test]
    fn intra_normalize_rejects_bad_length() {
        let v = array![1.0, 2.0, 3.0];
        assert!(intra_normalize(v.view(), 2).is_err());
    }

    #[test]
    fn spec_validation() {
        assert!(NormalizationSpec::standard(4).validate().is_ok());
        let mut bad = NormalizationSpec::standard(4);
        bad.power_alpha = 0.0;
        assert!(bad.validate().is_err());
        bad.power_alpha = 1.5;
        assert!(bad.validate().is_err());
    }

    proptest! {
        #[test]
        fn power_preserves_sign(values in proptest::collection::vec(-1e6f64..1e6, 1..64),
                                alpha in 0.05f64..1.0) {
            let v = Array1::from_vec(values);
            let out = power_normalize(v.view(), alpha);
            for (a, b) in v.iter().zip(out.iter()) {
                prop_assert!(a.signum() * b.signum() >= 0.0 || (*a == 0.0 && *b == 0.0));
                prop_assert_eq!(*a == 0.0, *b == 0.0);
            }
        }

        #[test]
        fn intra_output_norms_are_unit_or_zero(values in proptest::collection::vec(-1e3f64..1e3, 1..16),
                                               reps in 1usize..5) {
            let sub = values.len();
            let mut all = Vec::new();
            for _ in 0..reps {
                all.extend_from_slice(&values);
            }
            let v = Array1::from_vec(all);
            let out = intra_normalize(v.view(), sub).unwrap();
            for chunk in out.exact_chunks(sub) {
                let norm = chunk.dot(&chunk).sqrt();
                prop_assert!(norm == 0.0 || (norm - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn intra_is_idempotent_and_scale_invariant(values in proptest::collection::vec(-1e3f64..1e3, 4..32),
                                                   scale in 0.01f64..100.0) {
            let len = values.len() - values.len() % 4;
            let v = Array1::from_vec(values[..len].to_vec());
            let once = intra_normalize(v.view(), 4).unwrap();
            let twice = intra_normalize(once.view(), 4).unwrap();
            for (a, b) in once.iter().zip(twice.iter()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
            let scaled = intra_normalize((&v * scale).view(), 4).unwrap();
            for (a, b) in once.iter().zip(scaled.iter()) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }
    }
}
