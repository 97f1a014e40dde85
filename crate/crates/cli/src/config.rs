//! Flat `key = value` run configuration with dotted keys.
//!
//! ```text
//! # comment
//! manifold.shape = disk
//! manifold.n = 2000
//! solver.tol = 1e-10
//! ```
//!
//! Values from the file are overridden by command-line flags and `--set`.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

pub const KNOWN_KEYS: &[&str] = &[
    "seed",
    "case",
    "cloud",
    "source",
    "boundary",
    "out",
    "report",
    "levels",
    "reference_factor",
    "manifold.shape",
    "manifold.a",
    "manifold.b",
    "manifold.widths",
    "manifold.z0",
    "manifold.n",
    "manifold.jitter",
    "kernel.profile",
    "kernel.t",
    "penalty.beta",
    "coupling.c_t",
    "coupling.gamma_t",
    "coupling.c_beta",
    "solver.method",
    "solver.tol",
    "solver.restart",
    "solver.max_iter_factor",
    "solver.dense_threshold",
    "guardrails.max_sqrt_t_over_beta",
    "guardrails.max_h_over_t32",
    "eval.points",
    "eval.out",
];

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("unknown config key '{0}'")]
    UnknownKey(String),
    #[error("invalid value '{value}' for {key}: expected {expected}")]
    BadValue {
        key: String,
        value: String,
        expected: &'static str,
    },
    #[error("missing required setting '{0}'")]
    Missing(&'static str),
    #[error("{0}")]
    Conflict(String),
    #[error("cannot read config file {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    values: BTreeMap<String, String>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Config::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(ConfigError::Syntax {
                    line,
                    msg: format!("expected 'key = value', found '{content}'"),
                });
            };
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() {
                return Err(ConfigError::Syntax {
                    line,
                    msg: "empty key".into(),
                });
            }
            if !KNOWN_KEYS.contains(&key) {
                return Err(ConfigError::Syntax {
                    line,
                    msg: format!("unknown key '{key}'"),
                });
            }
            cfg.values.insert(key.to_string(), value.to_string());
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<(), ConfigError> {
        if !KNOWN_KEYS.contains(&key) {
            return Err(ConfigError::UnknownKey(key.to_string()));
        }
        self.values.insert(key.to_string(), value.into());
        Ok(())
    }

    /// Applies a `KEY=VALUE` override.
    pub fn set_pair(&mut self, pair: &str) -> Result<(), ConfigError> {
        let Some((key, value)) = pair.split_once('=') else {
            return Err(ConfigError::Conflict(format!(
                "--set expects KEY=VALUE, got '{pair}'"
            )));
        };
        self.set(key.trim(), value.trim())
    }

    pub fn contains(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    pub fn get_str(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str, expected: &'static str) -> Result<Option<T>, ConfigError> {
        match self.values.get(key) {
            None => Ok(None),
            Some(v) => v.parse::<T>().map(Some).map_err(|_| ConfigError::BadValue {
                key: key.to_string(),
                value: v.clone(),
                expected,
            }),
        }
    }

    pub fn get_or<T: FromStr>(&self, key: &str, expected: &'static str, default: T) -> Result<T, ConfigError> {
        Ok(self.get(key, expected)?.unwrap_or(default))
    }

    pub fn require<T: FromStr>(&self, key: &'static str, expected: &'static str) -> Result<T, ConfigError> {
        self.get(key, expected)?.ok_or(ConfigError::Missing(key))
    }

    /// Comma-separated list.
    pub fn get_list<T: FromStr>(&self, key: &str, expected: &'static str) -> Result<Option<Vec<T>>, ConfigError> {
        let Some(v) = self.values.get(key) else {
            return Ok(None);
        };
        v.split(',')
            .map(|item| {
                item.trim().parse::<T>().map_err(|_| ConfigError::BadValue {
                    key: key.to_string(),
                    value: v.clone(),
                    expected,
                })
            })
            .collect::<Result<Vec<T>, _>>()
            .map(Some)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_dotted_keys_and_comments() {
        let cfg = Config::parse("# run\nsolver.tol = 1e-10  # tight\n\nmanifold.shape=disk\nlevels = 101, 201\n").unwrap();
        assert_eq!(cfg.get::<f64>("solver.tol", "real").unwrap(), Some(1e-10));
        assert_eq!(cfg.get_str("manifold.shape"), Some("disk"));
        assert_eq!(cfg.get_list::<usize>("levels", "integers").unwrap(), Some(vec![101, 201]));
        assert_eq!(cfg.get::<f64>("kernel.t", "real").unwrap(), None);
    }

    #[test]
    fn reports_line_of_bad_syntax() {
        match Config::parse("seed = 1\nnonsense\n") {
            Err(ConfigError::Syntax { line: 2, .. }) => {}
            other => panic!("{other:?}"),
        }
        match Config::parse("solver.tolerance = 1\n") {
            Err(ConfigError::Syntax { line: 1, msg }) => assert!(msg.contains("solver.tolerance")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn overrides_replace_file_values() {
        let mut cfg = Config::parse("kernel.t = 0.01\n").unwrap();
        cfg.set_pair("kernel.t=0.02").unwrap();
        assert_eq!(cfg.get::<f64>("kernel.t", "real").unwrap(), Some(0.02));
        assert!(cfg.set_pair("bogus=1").is_err());
        assert!(cfg.set_pair("kernel.t").is_err());
    }

    #[test]
    fn bad_value_names_the_key() {
        let cfg = Config::parse("manifold.n = lots\n").unwrap();
        let err = cfg.get::<usize>("manifold.n", "integer").unwrap_err();
        assert!(err.to_string().contains("manifold.n"));
        assert!(matches!(cfg.require::<f64>("kernel.t", "real"), Err(ConfigError::Missing("kernel.t"))));
    }
}
