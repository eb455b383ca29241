//! `gen-synthetic`: write a seeded synthetic dataset to disk.

use std::path::PathBuf;

use clap::Args;
use fvkit_core::io::write_features;
use fvkit_core::synthetic::{generate_dataset, SyntheticSpec};
use fvkit_core::FeatureSet;

use crate::config::Config;
use crate::dataset::{write_labels, LABELS_FILE};
use crate::errors::CliResult;

#[derive(Args, Debug)]
pub struct GenArgs {
    /// Output directory; `train/` and `test/` subdirectories are created.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    #[arg(long)]
    pub classes: Option<usize>,
    #[arg(long)]
    pub train_per_class: Option<usize>,
    #[arg(long)]
    pub test_per_class: Option<usize>,
    #[arg(long)]
    pub features_per_image: Option<usize>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub latent_atoms: Option<usize>,
    #[arg(long)]
    pub atoms_per_feature: Option<usize>,
    /// Per-dimension noise standard deviation.
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

pub fn run(args: GenArgs, cfg: &Config) -> CliResult<()> {
    let spec = SyntheticSpec {
        classes: cfg.resolve(args.classes, "classes", 5)?,
        train_per_class: cfg.resolve(args.train_per_class, "train-per-class", 50)?,
        test_per_class: cfg.resolve(args.test_per_class, "test-per-class", 20)?,
        features_per_image: cfg.resolve(args.features_per_image, "features-per-image", 64)?,
        dim: cfg.resolve(args.dim, "dim", 256)?,
        latent_atoms: cfg.resolve(args.latent_atoms, "latent-atoms", 100)?,
        atoms_per_feature: cfg.resolve(args.atoms_per_feature, "atoms-per-feature", 3)?,
        noise_sigma: cfg.resolve(args.noise, "noise", 0.01)?,
        seed: cfg.resolve(args.seed, "seed", 0)?,
    };
    let dataset = generate_dataset(&spec)?;

    write_split(&args.out.join("train"), &dataset.train)?;
    println!(
        "wrote {} training images to {}",
        dataset.train.len(),
        args.out.join("train").display()
    );
    if !dataset.test.is_empty() {
        write_split(&args.out.join("test"), &dataset.test)?;
        println!(
            "wrote {} test images to {}",
            dataset.test.len(),
            args.out.join("test").display()
        );
    }
    Ok(())
}

fn write_split(dir: &std::path::Path, images: &[(FeatureSet, usize)]) -> CliResult<()> {
    std::fs::create_dir_all(dir)?;
    let mut entries = Vec::with_capacity(images.len());
    for (i, (features, label)) in images.iter().enumerate() {
        let name = format!("img{i:05}.fvk");
        write_features(features, dir.join(&name))?;
        entries.push((name, *label));
    }
    write_labels(&dir.join(LABELS_FILE), &entries)
}
