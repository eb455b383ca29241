//! Seeded synthetic feature generator: sparse combinations of latent atoms
//! plus Gaussian noise, optionally class-conditioned through disjoint atom
//! pools. Stands in for real local-feature extractions at desk scale.

use ndarray::{Array1, Array2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::types::FeatureSet;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub classes: usize,
    pub train_per_class: usize,
    pub test_per_class: usize,
    pub features_per_image: usize,
    pub dim: usize,
    pub latent_atoms: usize,
    /// Atoms combined per feature.
    pub atoms_per_feature: usize,
    /// Per-dimension standard deviation of the additive noise.
    pub noise_sigma: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.classes == 0
            || self.train_per_class == 0
            || self.features_per_image == 0
            || self.dim == 0
            || self.latent_atoms == 0
            || self.atoms_per_feature == 0
        {
            return Err(Error::InvalidParam("synthetic spec has a zero-sized field".into()));
        }
        if self.latent_atoms < self.classes {
            return Err(Error::InvalidParam(format!(
                "{} atoms cannot be split across {} classes",
                self.latent_atoms, self.classes
            )));
        }
        if self.atoms_per_feature > self.latent_atoms / self.classes {
            return Err(Error::InvalidParam(format!(
                "atoms_per_feature {} exceeds the {} atoms available per class",
                self.atoms_per_feature,
                self.latent_atoms / self.classes
            )));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::InvalidParam("noise_sigma must be >= 0".into()));
        }
        Ok(())
    }
}

/// A generated dataset: one feature set per image, with its class label.
#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub train: Vec<(FeatureSet, usize)>,
    pub test: Vec<(FeatureSet, usize)>,
    /// The latent atoms the features were built from (columns, unit norm).
    pub atoms: Array2<f64>,
}

/// Unit-norm random atom columns.
fn draw_atoms(dim: usize, count: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut atoms: Array2<f64> = Array2::zeros((dim, count));
    for mut col in atoms.columns_mut() {
        loop {
            for v in col.iter_mut() {
                *v = normal.sample(rng);
            }
            let norm = col.dot(&col).sqrt();
            if norm > 1e-9 {
                col.mapv_inplace(|v| v / norm);
                break;
            }
        }
    }
    atoms
}

fn draw_feature(
    atoms: &Array2<f64>,
    pool: &[usize],
    atoms_per_feature: usize,
    noise: &Normal<f64>,
    noise_sigma: f64,
    rng: &mut ChaCha8Rng,
) -> Array1<f64> {
    let dim = atoms.nrows();
    let mut x = Array1::zeros(dim);
    // sample distinct atoms from the pool
    let mut chosen: Vec<usize> = Vec::with_capacity(atoms_per_feature);
    while chosen.len() < atoms_per_feature {
        let pick = pool[rng.random_range(0..pool.len())];
        if !chosen.contains(&pick) {
            chosen.push(pick);
        }
    }
    for &a in chosen.iter() {
        let coeff = rng.random_range(0.5..1.5);
        x.scaled_add(coeff, &atoms.column(a));
    }
    if noise_sigma > 0.0 {
        for v in x.iter_mut() {
            *v += noise.sample(rng);
        }
    }
    x
}

/// Generates the full class-conditioned dataset. Everything is drawn from
/// one seeded stream in a fixed order, so equal specs give equal bytes.
pub fn generate_dataset(spec: &SyntheticSpec) -> Result<SyntheticDataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let atoms = draw_atoms(spec.dim, spec.latent_atoms, &mut rng);
    let noise = Normal::new(0.0, spec.noise_sigma.max(f64::MIN_POSITIVE)).unwrap();

    // contiguous, disjoint atom pools per class
    let per_class = spec.latent_atoms / spec.classes;
    let pools: Vec<Vec<usize>> = (0..spec.classes)
        .map(|c| (c * per_class..(c + 1) * per_class).collect())
        .collect();

    let gen_split = |images_per_class: usize, rng: &mut ChaCha8Rng| -> Result<Vec<(FeatureSet, usize)>> {
        let mut images = Vec::with_capacity(spec.classes * images_per_class);
        for class in 0..spec.classes {
            for _ in 0..images_per_class {
                let mut data = Array2::zeros((spec.features_per_image, spec.dim));
                for mut row in data.rows_mut() {
                    let x = draw_feature(
                        &atoms,
                        &pools[class],
                        spec.atoms_per_feature,
                        &noise,
                        spec.noise_sigma,
                        rng,
                    );
                    row.assign(&x);
                }
                images.push((FeatureSet::new(data)?, class));
            }
        }
        Ok(images)
    };

    let train = gen_split(spec.train_per_class, &mut rng)?;
    let test = if spec.test_per_class > 0 {
        gen_split(spec.test_per_class, &mut rng)?
    } else {
        Vec::new()
    };
    Ok(SyntheticDataset { train, test, atoms })
}

/// Unlabeled features for the partition-resolution experiment: sparse
/// combinations of `latent_atoms` atoms at the requested dimension.
pub fn sparse_features(
    dim: usize,
    count: usize,
    latent_atoms: usize,
    atoms_per_feature: usize,
    noise_sigma: f64,
    seed: u64,
) -> Result<FeatureSet> {
    if dim == 0 || count == 0 || latent_atoms == 0 || atoms_per_feature == 0 {
        return Err(Error::InvalidParam("zero-sized synthetic feature request".into()));
    }
    if atoms_per_feature > latent_atoms {
        return Err(Error::InvalidParam(format!(
            "atoms_per_feature {atoms_per_feature} exceeds latent_atoms {latent_atoms}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let atoms = draw_atoms(dim, latent_atoms, &mut rng);
    let noise = Normal::new(0.0, noise_sigma.max(f64::MIN_POSITIVE)).unwrap();
    let pool: Vec<usize> = (0..latent_atoms).collect();
    let mut data = Array2::zeros((count, dim));
    for mut row in data.rows_mut() {
        let x = draw_feature(&atoms, &pool, atoms_per_feature, &noise, noise_sigma, &mut rng);
        row.assign(&x);
    }
    FeatureSet::new(data)
}
