//! `fvkit`: feature encoding pipeline driver.
//!
//! Exit codes: 0 success, 1 usage error, 2 missing or bad input, 3
//! numerical/convergence failure. Failures also emit one machine-readable
//! JSON line on stderr with a `category` field.

mod commands;
mod config;
mod dataset;
mod errors;
mod svg;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use config::Config;
use errors::{CliError, CliResult};

#[derive(Parser, Debug)]
#[command(name = "fvkit", version, about = "Fisher vector encoding toolkit")]
struct Cli {
    /// key=value defaults file; explicit flags override it.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a seeded synthetic dataset of per-image feature files.
    GenSynthetic(commands::gen::GenArgs),
    /// Learn a sparse-coding dictionary.
    TrainDict(commands::train::TrainDictArgs),
    /// Fit a diagonal-covariance Gaussian mixture.
    TrainGmm(commands::train::TrainGmmArgs),
    /// Fit a PCA projection.
    TrainPca(commands::train::TrainPcaArgs),
    /// Encode images into pooled, normalized vectors.
    Encode(commands::encode::EncodeArgs),
    /// Train and evaluate a linear one-vs-rest SVM on encoded vectors.
    Classify(commands::classify::ClassifyArgs),
    /// Compare partition resolution of mixtures vs a sparse dictionary.
    Resolution(commands::resolution::ResolutionArgs),
}

fn dispatch(cli: Cli) -> CliResult<()> {
    let cfg = Config::load(cli.config.as_deref())?;
    match cli.command {
        Command::GenSynthetic(args) => commands::gen::run(args, &cfg),
        Command::TrainDict(args) => commands::train::run_dict(args, &cfg),
        Command::TrainGmm(args) => commands::train::run_gmm(args, &cfg),
        Command::TrainPca(args) => commands::train::run_pca(args, &cfg),
        Command::Encode(args) => commands::encode::run(args, &cfg),
        Command::Classify(args) => commands::classify::run(args, &cfg),
        Command::Resolution(args) => commands::resolution::run(args, &cfg),
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            if matches!(err.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{err}");
                std::process::exit(0);
            }
            eprint!("{err}");
            CliError::usage(err.to_string()).report();
            std::process::exit(1);
        }
    };

    if let Err(err) = dispatch(cli) {
        err.report();
        std::process::exit(err.code);
    }
}
