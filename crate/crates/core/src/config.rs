//! Flat `key = value` run configuration. Command-line flags override file
//! values; unknown keys are rejected.

use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: unknown key {key:?}")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: bad value {value:?} for {key:?}")]
    BadValue { line: usize, key: String, value: String },
    #[error("line {line}: duplicate key {key:?}")]
    Duplicate { line: usize, key: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, ConfigError>;

/// Every recognised key, with its default where one exists.
///
/// | key | default |
/// |---|---|
/// | `stage_checkpoint` | none |
/// | `experience_checkpoint` | none |
/// | `policy` | built-in placeholder |
/// | `rain_file` | none (synthetic rain) |
/// | `stop_k` | 2 |
/// | `rearm_after_wake` | off |
/// | `seed` | 0 |
/// | `port` | 7878 |
/// | `calibration_db_spl` | none (required to derive gain) |
/// | `target_db_spl` | 40 |
/// | `queue_capacity` | 8 |
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub stage_checkpoint: Option<PathBuf>,
    pub experience_checkpoint: Option<PathBuf>,
    pub policy: Option<PathBuf>,
    pub rain_file: Option<PathBuf>,
    pub stop_k: usize,
    pub rearm_after_wake: Option<usize>,
    pub seed: u64,
    pub port: u16,
    pub calibration_db_spl: Option<f64>,
    pub target_db_spl: f64,
    pub queue_capacity: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            stage_checkpoint: None,
            experience_checkpoint: None,
            policy: None,
            rain_file: None,
            stop_k: 2,
            rearm_after_wake: None,
            seed: 0,
            port: 7878,
            calibration_db_spl: None,
            target_db_spl: 40.0,
            queue_capacity: 8,
        }
    }
}

pub const KEYS: [&str; 11] = [
    "stage_checkpoint",
    "experience_checkpoint",
    "policy",
    "rain_file",
    "stop_k",
    "rearm_after_wake",
    "seed",
    "port",
    "calibration_db_spl",
    "target_db_spl",
    "queue_capacity",
];

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or(ConfigError::Syntax { line: line_no })?;
            let (k, v) = (k.trim(), v.trim());
            if !KEYS.contains(&k) {
                return Err(ConfigError::UnknownKey {
                    line: line_no,
                    key: k.into(),
                });
            }
            if seen.contains(&k) {
                return Err(ConfigError::Duplicate {
                    line: line_no,
                    key: k.into(),
                });
            }
            seen.push(k);
            cfg.set(k, v).map_err(|_| ConfigError::BadValue {
                line: line_no,
                key: k.into(),
                value: v.into(),
            })?;
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    fn set(&mut self, key: &str, v: &str) -> std::result::Result<(), ()> {
        fn num<T: std::str::FromStr>(v: &str) -> std::result::Result<T, ()> {
            v.parse().map_err(|_| ())
        }
        fn finite(v: &str) -> std::result::Result<f64, ()> {
            num::<f64>(v).and_then(|x| if x.is_finite() { Ok(x) } else { Err(()) })
        }
        match key {
            "stage_checkpoint" => self.stage_checkpoint = Some(v.into()),
            "experience_checkpoint" => self.experience_checkpoint = Some(v.into()),
            "policy" => self.policy = Some(v.into()),
            "rain_file" => self.rain_file = Some(v.into()),
            "stop_k" => {
                self.stop_k = num(v)?;
                if self.stop_k == 0 {
                    return Err(());
                }
            }
            "rearm_after_wake" => {
                self.rearm_after_wake = match v {
                    "off" | "none" | "0" => None,
                    _ => Some(num(v)?),
                }
            }
            "seed" => self.seed = num(v)?,
            "port" => self.port = num(v)?,
            "calibration_db_spl" => self.calibration_db_spl = Some(finite(v)?),
            "target_db_spl" => self.target_db_spl = finite(v)?,
            "queue_capacity" => self.queue_capacity = num::<usize>(v)?.max(1),
            _ => return Err(()),
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_known_keys() {
        let c = RunConfig::parse("# run\nstop_k = 3\nseed=9\ncalibration_db_spl = 85\nrearm_after_wake = off\n").unwrap();
        assert_eq!(c.stop_k, 3);
        assert_eq!(c.seed, 9);
        assert_eq!(c.calibration_db_spl, Some(85.0));
        assert_eq!(c.rearm_after_wake, None);
        assert_eq!(c.port, 7878);
    }

    #[test]
    fn rejects_unknown_duplicate_and_bad() {
        assert!(matches!(RunConfig::parse("volume = 3"), Err(ConfigError::UnknownKey { line: 1, .. })));
        assert!(matches!(RunConfig::parse("seed=1\nseed=2"), Err(ConfigError::Duplicate { line: 2, .. })));
        assert!(matches!(RunConfig::parse("stop_k = 0"), Err(ConfigError::BadValue { .. })));
        assert!(matches!(RunConfig::parse("port = 70000"), Err(ConfigError::BadValue { .. })));
        assert!(matches!(RunConfig::parse("stop_k"), Err(ConfigError::Syntax { line: 1 })));
    }
}
