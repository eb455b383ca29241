//! Flat `key = value` config files. Keys mirror the long flag names; an
//! explicit flag always wins over the config value.

use std::collections::HashMap;
use std::path::Path;
use std::str::FromStr;

use crate::errors::{CliError, CliResult};

#[derive(Debug, Default, Clone)]
pub struct Config {
    values: HashMap<String, String>,
}

impl Config {
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)?;
        let mut values = HashMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::usage(format!(
                    "{}:{}: expected key=value, got {line:?}",
                    path.display(),
                    lineno + 1
                )));
            };
            values.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(Self { values })
    }

    fn parse<T: FromStr>(&self, key: &str) -> CliResult<Option<T>> {
        match self.values.get(key) {
            None => Ok(None),
            Some(raw) => raw.parse().map(Some).map_err(|_| {
                CliError::usage(format!("config key {key}: cannot parse {raw:?}"))
            }),
        }
    }

    /// Flag wins, then the config file, then the built-in default.
    pub fn resolve<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> CliResult<T> {
        if let Some(v) = flag {
            return Ok(v);
        }
        Ok(self.parse(key)?.unwrap_or(default))
    }

    /// Like `resolve` but with no default; `None` means unset.
    pub fn resolve_opt<T: FromStr>(&self, flag: Option<T>, key: &str) -> CliResult<Option<T>> {
        if flag.is_some() {
            return Ok(flag);
        }
        self.parse(key)
    }
}

/// Comma-separated positive integer list, e.g. `100,200,500`.
pub fn parse_usize_list(raw: &str) -> CliResult<Vec<usize>> {
    raw.split(',')
        .map(|part| {
            part.trim()
                .parse()
                .map_err(|_| CliError::usage(format!("bad list entry {part:?}")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_config() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        std::fs::write(&path, "# comment\nlambda = 0.5\nseed=9\n").unwrap();
        let cfg = Config::load(Some(&path)).unwrap();
        assert_eq!(cfg.resolve(Some(0.1f64), "lambda", 0.0).unwrap(), 0.1);
        assert_eq!(cfg.resolve(None::<f64>, "lambda", 0.0).unwrap(), 0.5);
        assert_eq!(cfg.resolve(None::<u64>, "seed", 0).unwrap(), 9);
        assert_eq!(cfg.resolve(None::<u64>, "missing", 3).unwrap(), 3);
    }

    #[test]
    fn bad_lines_and_values_are_usage_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        std::fs::write(&path, "nonsense line\n").unwrap();
        assert!(Config::load(Some(&path)).is_err());
        std::fs::write(&path, "lambda = abc\n").unwrap();
        let cfg = Config::load(Some(&path)).unwrap();
        assert!(cfg.resolve(None::<f64>, "lambda", 0.0).is_err());
    }

    #[test]
    fn list_parsing() {
        assert_eq!(parse_usize_list("100, 200,500").unwrap(), vec![100, 200, 500]);
        assert!(parse_usize_list("a,b").is_err());
    }
}
