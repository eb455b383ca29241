//! PCA preprocessing: fit on the sample covariance, project, invert.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::linalg;
use crate::types::{FeatureSet, PcaModel};

const WHITEN_EPS: f64 = 1e-12;

/// Fits a projection onto the top `out_dim` eigenvectors of the sample
/// covariance (denominator `T - 1`). Eigenvectors follow a deterministic
/// sign convention: the entry of largest magnitude is positive.
pub fn pca_fit(features: &FeatureSet, out_dim: usize, whiten: bool) -> Result<PcaModel> {
    let t = features.count();
    let d = features.dim();
    if out_dim == 0 || out_dim > t.min(d) {
        return Err(Error::InvalidParam(format!(
            "out_dim must be in 1..={}, got {out_dim}",
            t.min(d)
        )));
    }

    let data = features.data();
    let mut mean = Array1::zeros(d);
    for row in data.rows() {
        mean += &row;
    }
    mean.mapv_inplace(|v| v / t as f64);

    let mut centered = data.to_owned();
    for mut row in centered.rows_mut() {
        row -= &mean;
    }
    let denom = if t > 1 { (t - 1) as f64 } else { 1.0 };
    let cov = centered.t().dot(&centered) / denom;

    let (eigenvalues, eigenvectors) = linalg::eigh(cov.view());
    let rank = eigenvalues.iter().filter(|v| **v > 0.0).count();
    if rank < out_dim {
        log::warn!("covariance has effective rank {rank} < out_dim {out_dim}");
    }

    let mut components = Array2::zeros((d, out_dim));
    let mut values = Array1::zeros(out_dim);
    for c in 0..out_dim {
        values[c] = eigenvalues[c].max(0.0);
        let col = eigenvectors.column(c);
        // sign convention: largest-magnitude entry positive, ties to the
        // lowest index
        let mut pivot = 0usize;
        for i in 1..d {
            if col[i].abs() > col[pivot].abs() {
                pivot = i;
            }
        }
        let flip = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..d {
            components[[i, c]] = flip * col[i];
        }
    }

    PcaModel::new(mean, components, values, whiten)
}

/// Projects features: `(x - mean) * components`, then optional whitening.
pub fn pca_transform(features: &FeatureSet, model: &PcaModel) -> Result<FeatureSet> {
    if features.dim() != model.input_dim() {
        return Err(Error::Dimension(format!(
            "features have dim {}, projection expects {}",
            features.dim(),
            model.input_dim()
        )));
    }
    let mut centered = features.data().to_owned();
    for mut row in centered.rows_mut() {
        row -= &model.mean();
    }
    let mut projected = centered.dot(&model.components());
    if model.whiten() {
        for mut row in projected.rows_mut() {
            for (j, v) in row.iter_mut().enumerate() {
                *v /= (model.eigenvalues()[j] + WHITEN_EPS).sqrt();
            }
        }
    }
    FeatureSet::new(projected)
}

/// Maps projected features back to the input space.
pub fn pca_inverse_transform(features: &FeatureSet, model: &PcaModel) -> Result<FeatureSet> {
    if features.dim() != model.output_dim() {
        return Err(Error::Dimension(format!(
            "features have dim {}, projection produces {}",
            features.dim(),
            model.output_dim()
        )));
    }
    let mut coords = features.data().to_owned();
    if model.whiten() {
        for mut row in coords.rows_mut() {
            for (j, v) in row.iter_mut().enumerate() {
                *v *= (model.eigenvalues()[j] + WHITEN_EPS).sqrt();
            }
        }
    }
    let mut restored = coords.dot(&model.components().t());
    for mut row in restored.rows_mut() {
        row += &model.mean();
    }
    FeatureSet::new(restored)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn line_data_yields_the_line_direction() {
        // points along (1, 2, -1) with distinct offsets
        let dir = array![1.0, 2.0, -1.0];
        let mut data = Array2::zeros((20, 3));
        for (i, mut row) in data.rows_mut().into_iter().enumerate() {
            let s = i as f64 * 0.37 - 2.0;
            for j in 0..3 {
                row[j] = s * dir[j];
            }
        }
        let fs = FeatureSet::new(data).unwrap();
        let model = pca_fit(&fs, 1, false).unwrap();
        let comp = model.components().column(0).to_owned();
        let cosine = comp.dot(&dir) / dir.dot(&dir).sqrt();
        assert!(cosine.abs() > 0.999, "cosine {cosine}");
    }

    #[test]
    fn full_rank_projection_is_an_isometry() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut data: Array2<f64> = Array2::zeros((30, 4));
        for v in data.iter_mut() {
            *v = rng.random_range(-1.0..1.0);
        }
        let fs = FeatureSet::new(data.clone()).unwrap();
        let model = pca_fit(&fs, 4, false).unwrap();
        let out = pca_transform(&fs, &model).unwrap();
        for a in 0..10 {
            for b in 0..10 {
                let orig = (&data.row(a) - &data.row(b)).mapv(|v| v * v).sum().sqrt();
                let proj = (&out.data().row(a) - &out.data().row(b))
                    .mapv(|v| v * v)
                    .sum()
                    .sqrt();
                assert_abs_diff_eq!(orig, proj, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn transform_of_training_mean_is_zero() {
        let data = array![[1.0, 2.0], [3.0, 6.0], [-1.0, 4.0]];
        let fs = FeatureSet::new(data.clone()).unwrap();
        let model = pca_fit(&fs, 2, false).unwrap();
        let mean = model.mean().to_owned().insert_axis(ndarray::Axis(0));
        let out = pca_transform(&FeatureSet::new(mean).unwrap(), &model).unwrap();
        for v in out.data().iter() {
            assert_abs_diff_eq!(*v, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn inverse_reconstructs_at_full_dimension() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut data: Array2<f64> = Array2::zeros((25, 3));
        for v in data.iter_mut() {
            *v = rng.random_range(-2.0..2.0);
        }
        let fs = FeatureSet::new(data.clone()).unwrap();
        let model = pca_fit(&fs, 3, false).unwrap();
        let roundtrip = pca_inverse_transform(&pca_transform(&fs, &model).unwrap(), &model).unwrap();
        for (a, b) in data.iter().zip(roundtrip.data().iter()) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-8);
        }
    }

    #[test]
    fn projection_is_orthonormal_and_eigenvalues_descend() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let mut data: Array2<f64> = Array2::zeros((40, 5));
        for v in data.iter_mut() {
            *v = rng.random_range(-1.0..1.0);
        }
        let fs = FeatureSet::new(data).unwrap();
        let model = pca_fit(&fs, 5, false).unwrap();
        let gram = model.components().t().dot(&model.components());
        for i in 0..5 {
            for j in 0..5 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(gram[[i, j]], expect, epsilon = 1e-8);
            }
        }
        for w in model.eigenvalues().to_vec().windows(2) {
            assert!(w[0] >= w[1]);
        }
    }

    #[test]
    fn transformed_column_variances_match_eigenvalues() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut data: Array2<f64> = Array2::zeros((200, 4));
        for (i, v) in data.iter_mut().enumerate() {
            let scale = 1.0 + (i % 4) as f64;
            *v = scale * rng.random_range(-1.0..1.0);
        }
        let fs = FeatureSet::new(data).unwrap();
        let model = pca_fit(&fs, 4, false).unwrap();
        let out = pca_transform(&fs, &model).unwrap();
        let t = out.count() as f64;
        for j in 0..4 {
            let col = out.data().column(j).to_owned();
            let mean = col.sum() / t;
            let var = col.mapv(|v| (v - mean) * (v - mean)).sum() / (t - 1.0);
            assert_abs_diff_eq!(var, model.eigenvalues()[j], epsilon = 1e-6);
        }
    }

    #[test]
    fn out_dim_bounds_are_enforced() {
        let fs = FeatureSet::new(Array2::from_elem((3, 5), 1.0)).unwrap();
        assert!(pca_fit(&fs, 0, false).is_err());
        // out_dim > min(T, d) = 3
        assert!(pca_fit(&fs, 4, false).is_err());
        assert!(pca_fit(&fs, 3, false).is_ok());
    }

    #[test]
    fn whitening_unit_variances() {
        let mut rng = ChaCha8Rng::seed_from_u64(90);
        let mut data: Array2<f64> = Array2::zeros((300, 3));
        for v in data.iter_mut() {
            *v = rng.random_range(-3.0..3.0);
        }
        let fs = FeatureSet::new(data).unwrap();
        let model = pca_fit(&fs, 3, true).unwrap();
        let out = pca_transform(&fs, &model).unwrap();
        let t = out.count() as f64;
        for j in 0..3 {
            let col = out.data().column(j).to_owned();
            let mean = col.sum() / t;
            let var = col.mapv(|v| (v - mean) * (v - mean)).sum() / (t - 1.0);
            assert_abs_diff_eq!(var, 1.0, epsilon = 1e-6);
        }
    }
}
