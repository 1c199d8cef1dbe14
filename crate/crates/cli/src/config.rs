//! Settings resolution: built-in defaults, then the config file, then flags.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use pnc_ssi::harness::Backend;

/// Environment variable naming the default config file.
pub const CONFIG_ENV: &str = "PNC_CONFIG";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid config {path}: {message}")]
    Invalid { path: PathBuf, message: String },
    #[error("invalid value for {key}: {value:?}")]
    Value { key: &'static str, value: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Table,
    Csv,
}

/// Config file keys. Every command-line flag has one.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub backend: Option<String>,
    pub bits: Option<toml::Value>,
    pub seed: Option<u64>,
    pub format: Option<String>,
    pub verbosity: Option<u8>,
    pub scenario: Option<PathBuf>,
    pub repetitions: Option<usize>,
    pub revoke_before_charge: Option<bool>,
    pub export_trace: Option<PathBuf>,
    pub save_ledger: Option<PathBuf>,
    pub passphrase_env: Option<String>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.into(), source })?;
        toml::from_str(&text).map_err(|e| ConfigError::Invalid { path: path.into(), message: e.to_string() })
    }
}

/// Effective settings after merging.
#[derive(Debug, Clone)]
pub struct CliConfig {
    pub backend: Backend,
    pub bits: u64,
    pub seed: u64,
    pub format: Format,
    pub verbosity: u8,
    pub scenario: Option<PathBuf>,
    pub repetitions: usize,
    pub revoke_before_charge: bool,
    pub export_trace: Option<PathBuf>,
    pub save_ledger: Option<PathBuf>,
    pub passphrase_env: String,
}

impl Default for CliConfig {
    fn default() -> Self {
        Self {
            backend: Backend::Concrete,
            bits: 2048,
            seed: 1,
            format: Format::Table,
            verbosity: 0,
            scenario: None,
            repetitions: 100,
            revoke_before_charge: false,
            export_trace: None,
            save_ledger: None,
            passphrase_env: "PNC_PASSPHRASE".into(),
        }
    }
}

/// `test` and `full` name the 512 and 2048 bit profiles.
pub fn parse_bits(s: &str) -> Result<u64, ConfigError> {
    let bits = match s {
        "test" => 512,
        "full" => 2048,
        n => n.parse().map_err(|_| ConfigError::Value { key: "bits", value: s.into() })?,
    };
    if !(256..=4096).contains(&bits) {
        return Err(ConfigError::Value { key: "bits", value: s.into() });
    }
    Ok(bits)
}

pub fn parse_backend(s: &str) -> Result<Backend, ConfigError> {
    Backend::parse(s).ok_or_else(|| ConfigError::Value { key: "backend", value: s.into() })
}

pub fn parse_format(s: &str) -> Result<Format, ConfigError> {
    match s {
        "table" => Ok(Format::Table),
        "csv" => Ok(Format::Csv),
        _ => Err(ConfigError::Value { key: "format", value: s.into() }),
    }
}

impl CliConfig {
    pub fn apply_file(&mut self, f: FileConfig) -> Result<(), ConfigError> {
        if let Some(b) = f.backend {
            self.backend = parse_backend(&b)?;
        }
        if let Some(v) = f.bits {
            self.bits = match v {
                toml::Value::Integer(n) => parse_bits(&n.to_string())?,
                toml::Value::String(s) => parse_bits(&s)?,
                other => return Err(ConfigError::Value { key: "bits", value: other.to_string() }),
            };
        }
        if let Some(s) = f.seed {
            self.seed = s;
        }
        if let Some(s) = f.format {
            self.format = parse_format(&s)?;
        }
        if let Some(v) = f.verbosity {
            self.verbosity = v;
        }
        if f.scenario.is_some() {
            self.scenario = f.scenario;
        }
        if let Some(n) = f.repetitions {
            self.repetitions = n;
        }
        if let Some(r) = f.revoke_before_charge {
            self.revoke_before_charge = r;
        }
        if f.export_trace.is_some() {
            self.export_trace = f.export_trace;
        }
        if f.save_ledger.is_some() {
            self.save_ledger = f.save_ledger;
        }
        if let Some(p) = f.passphrase_env {
            self.passphrase_env = p;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bit_profiles() {
        assert_eq!(parse_bits("test").unwrap(), 512);
        assert_eq!(parse_bits("full").unwrap(), 2048);
        assert_eq!(parse_bits("1024").unwrap(), 1024);
        assert!(parse_bits("12").is_err());
        assert!(parse_bits("lots").is_err());
    }

    #[test]
    fn file_values_apply() {
        let f: FileConfig =
            toml::from_str("backend = \"symbolic\"\nbits = \"test\"\nseed = 9\nformat = \"csv\"").unwrap();
        let mut c = CliConfig::default();
        c.apply_file(f).unwrap();
        assert_eq!((c.backend, c.bits, c.seed, c.format), (Backend::Symbolic, 512, 9, Format::Csv));
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(toml::from_str::<FileConfig>("colour = true").is_err());
    }
}
