//! Contract tests for EM training and the GMM Fisher vector encoder.

use fvkit_core::gmm::{gmm_fit_em, gmmfv_encode_raw, GmmFvMode};
use fvkit_core::{FeatureSet, GmmModel};
use fvkit_oracles::mixture_log_likelihood;
use ndarray::{array, Array1, Array2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn gaussian_blob(rng: &mut ChaCha8Rng, n: usize, center: &[f64], std: f64) -> Array2<f64> {
    let d = center.len();
    let normal = Normal::new(0.0, std).unwrap();
    let mut data = Array2::zeros((n, d));
    for mut row in data.rows_mut() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = center[j] + normal.sample(rng);
        }
    }
    data
}

#[test]
fn recovers_two_separated_gaussians() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let a = gaussian_blob(&mut rng, 300, &[0.0, 0.0], 0.3);
    let b = gaussian_blob(&mut rng, 300, &[5.0, -4.0], 0.3);
    let mut data = Array2::zeros((600, 2));
    for i in 0..300 {
        data.row_mut(i).assign(&a.row(i));
        data.row_mut(300 + i).assign(&b.row(i));
    }
    let fs = FeatureSet::new(data).unwrap();
    let fit = gmm_fit_em(&fs, 2, 100, 1e-9, 9).unwrap();

    // match components to true centers by distance
    let truth = [[0.0, 0.0], [5.0, -4.0]];
    for target in truth.iter() {
        let mut best = f64::INFINITY;
        for k in 0..2 {
            let dx = fit.model.means()[[k, 0]] - target[0];
            let dy = fit.model.means()[[k, 1]] - target[1];
            best = best.min((dx * dx + dy * dy).sqrt());
        }
        assert!(best < 0.1, "mean recovery error {best}");
    }
    for k in 0..2 {
        assert!((fit.model.weights()[k] - 0.5).abs() < 0.05);
    }
}

#[test]
fn loglik_trace_is_monotone_across_seeds() {
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let mut data: Array2<f64> = Array2::zeros((120, 3));
        for v in data.iter_mut() {
            *v = rng.random_range(-2.0..2.0);
        }
        let fs = FeatureSet::new(data).unwrap();
        let fit = gmm_fit_em(&fs, 4, 40, 1e-12, seed).unwrap();
        assert!(fit.loglik_trace.len() >= 2);
        for w in fit.loglik_trace.windows(2) {
            assert!(
                w[1] >= w[0] - 1e-9,
                "seed {seed}: log-likelihood dropped {} -> {}",
                w[0],
                w[1]
            );
        }
    }
}

#[test]
fn fit_is_deterministic_given_seed() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut data: Array2<f64> = Array2::zeros((80, 3));
    for v in data.iter_mut() {
        *v = rng.random_range(-1.0..1.0);
    }
    let fs = FeatureSet::new(data).unwrap();
    let a = gmm_fit_em(&fs, 3, 30, 1e-8, 77).unwrap();
    let b = gmm_fit_em(&fs, 3, 30, 1e-8, 77).unwrap();
    assert_eq!(a.model, b.model);
    assert_eq!(a.loglik_trace, b.loglik_trace);
}

#[test]
fn mean_block_matches_finite_differences_of_loglik() {
    // d = 4, m = 2, T = 3 instance with hand-picked parameters
    let weights = array![0.4, 0.6];
    let means = array![
        [0.5, -0.3, 1.2, 0.0],
        [-1.0, 0.8, 0.2, 2.0],
    ];
    let variances = array![
        [0.7, 1.1, 0.9, 1.3],
        [1.2, 0.6, 1.0, 0.8],
    ];
    let model = GmmModel::new(weights.clone(), means.clone(), variances.clone(), 1e-12).unwrap();
    let data = array![
        [0.2, 0.1, 0.9, 0.4],
        [-0.7, 0.5, 0.3, 1.5],
        [0.9, -0.8, 1.5, -0.2],
    ];
    let fs = FeatureSet::new(data.clone()).unwrap();

    let raw = gmmfv_encode_raw(&fs, &model, GmmFvMode::MeanAndVariance).unwrap();
    let h = 1e-5;
    let (m, d) = (2usize, 4usize);
    for k in 0..m {
        for j in 0..d {
            let mut plus = means.clone();
            plus[[k, j]] += h;
            let mut minus = means.clone();
            minus[[k, j]] -= h;
            let ll_plus =
                mixture_log_likelihood(weights.view(), plus.view(), variances.view(), data.view());
            let ll_minus =
                mixture_log_likelihood(weights.view(), minus.view(), variances.view(), data.view());
            let fd = (ll_plus - ll_minus) / (2.0 * h);

            // encoder stores (1/sqrt(w_k)) sum_i gamma_ik z_ij with
            // z = (x - mu)/sigma; d(loglik)/d(mu_kj) adds another 1/sigma
            // and removes the 1/sqrt(w_k)
            let sigma = variances[[k, j]].sqrt();
            let analytic = raw[k * d + j] * weights[k].sqrt() / sigma;
            let rel = (fd - analytic).abs() / fd.abs().max(analytic.abs()).max(1e-12);
            assert!(
                rel < 1e-5,
                "component {k} dim {j}: fd {fd} vs analytic {analytic} (rel {rel})"
            );
        }
    }
}

#[test]
fn raw_encoding_is_additive_over_subsets() {
    let model = GmmModel::new(
        array![0.3, 0.7],
        array![[0.0, 1.0], [2.0, -1.0]],
        array![[0.5, 0.8], [1.1, 0.6]],
        1e-12,
    )
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut data: Array2<f64> = Array2::zeros((12, 2));
    for v in data.iter_mut() {
        *v = rng.random_range(-2.0..3.0);
    }
    let all = FeatureSet::new(data.clone()).unwrap();
    let first = FeatureSet::new(data.slice(ndarray::s![..5, ..]).to_owned()).unwrap();
    let second = FeatureSet::new(data.slice(ndarray::s![5.., ..]).to_owned()).unwrap();

    let raw_all = gmmfv_encode_raw(&all, &model, GmmFvMode::MeanAndVariance).unwrap();
    let raw_a = gmmfv_encode_raw(&first, &model, GmmFvMode::MeanAndVariance).unwrap();
    let raw_b = gmmfv_encode_raw(&second, &model, GmmFvMode::MeanAndVariance).unwrap();
    let sum: Array1<f64> = &raw_a + &raw_b;
    for (x, y) in raw_all.iter().zip(sum.iter()) {
        assert!((x - y).abs() < 1e-10);
    }
}

#[test]
fn needs_enough_features_for_components() {
    let fs = FeatureSet::new(Array2::zeros((2, 3)).mapv(|_: f64| 1.0)).unwrap();
    assert!(gmm_fit_em(&fs, 5, 10, 1e-6, 0).is_err());
}
