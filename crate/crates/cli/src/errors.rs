//! CLI error reporting: every failure carries a machine-readable category
//! and maps onto the exit code contract (0 ok, 1 usage, 2 missing or bad
//! input, 3 numerical/convergence failure).

use std::fmt;
use std::path::Path;

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug)]
pub struct CliError {
    pub category: &'static str,
    pub message: String,
    pub code: i32,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            category: "usage",
            message: message.into(),
            code: 1,
        }
    }

    /// Emits the machine-readable line on stderr.
    pub fn report(&self) {
        let payload = serde_json::json!({
            "category": self.category,
            "message": self.message,
        });
        eprintln!("error: {payload}");
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}", self.category, self.message)
    }
}

impl From<fvkit_core::Error> for CliError {
    fn from(err: fvkit_core::Error) -> Self {
        use fvkit_core::Error as E;
        let (category, code) = match &err {
            E::Io(io) if io.kind() == std::io::ErrorKind::NotFound => ("input-not-found", 2),
            E::Io(_) => ("io", 2),
            E::Format(_) => ("bad-format", 2),
            E::Data(_) => ("bad-data", 2),
            E::Dimension(_) => ("dimension-mismatch", 2),
            E::InvalidParam(_) => ("usage", 1),
            E::Convergence { .. } => ("convergence-failure", 3),
        };
        Self {
            category,
            message: err.to_string(),
            code,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        let category = if err.kind() == std::io::ErrorKind::NotFound {
            "input-not-found"
        } else {
            "io"
        };
        Self {
            category,
            message: err.to_string(),
            code: 2,
        }
    }
}

/// Retags not-found errors from model loads so a missing model file is
/// distinguishable from missing input data.
pub fn model_context<T>(result: fvkit_core::Result<T>, path: &Path) -> CliResult<T> {
    result.map_err(|err| {
        let mut cli: CliError = err.into();
        if cli.category == "input-not-found" {
            cli.category = "model-not-found";
            cli.message = format!("model file {}: {}", path.display(), cli.message);
        }
        cli
    })
}
