//! Model checkpoint files.
//!
//! ```text
//! SOMNOCKPT 1
//! kind stage
//! hidden 16
//! ...
//! values 175
//! end
//! <values × f64 little-endian>
//! ```
//!
//! Header lines are `key value`; `kind` and `values` are mandatory and the
//! header closes with a bare `end`. Loaders validate every declared shape
//! against the payload before building a model.

use std::fs;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::stage::{FeatureNorm, StageNet, TrainConfig, N_FEATURES};

const MAGIC: &str = "SOMNOCKPT 1";

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("malformed checkpoint: {0}")]
    Malformed(String),
    #[error("checkpoint holds a {found:?} model, expected {expected:?}")]
    WrongKind { expected: String, found: String },
    #[error("checkpoint shape mismatch: header implies {expected} values, payload has {got}")]
    Shape { expected: usize, got: usize },
    #[error("checkpoint contains non-finite parameters")]
    NonFinite,
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, CheckpointError>;

/// Header fields plus a flat parameter payload.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub kind: String,
    /// Ordered header fields (excluding `kind` and `values`).
    pub fields: Vec<(String, String)>,
    pub values: Vec<f64>,
}

impl Checkpoint {
    pub fn new(kind: &str) -> Self {
        Self {
            kind: kind.to_string(),
            fields: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn field(mut self, key: &str, value: impl ToString) -> Self {
        self.fields.push((key.to_string(), value.to_string()));
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.fields
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn parse_field<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let raw = self
            .get(key)
            .ok_or_else(|| CheckpointError::Malformed(format!("missing field {key:?}")))?;
        raw.parse()
            .map_err(|_| CheckpointError::Malformed(format!("bad value {raw:?} for {key:?}")))
    }

    pub fn expect_kind(&self, kind: &str) -> Result<()> {
        if self.kind != kind {
            return Err(CheckpointError::WrongKind {
                expected: kind.into(),
                found: self.kind.clone(),
            });
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_to(&mut out).expect("writing to a Vec cannot fail");
        out
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{MAGIC}")?;
        writeln!(out, "kind {}", self.kind)?;
        for (k, v) in &self.fields {
            writeln!(out, "{k} {v}")?;
        }
        writeln!(out, "values {}", self.values.len())?;
        writeln!(out, "end")?;
        for v in &self.values {
            out.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(input: R) -> Result<Self> {
        let mut input = BufReader::new(input);
        let mut line = String::new();
        let mut next_line = |input: &mut BufReader<R>| -> Result<String> {
            line.clear();
            if input.read_line(&mut line)? == 0 {
                return Err(CheckpointError::Malformed("header ended before `end`".into()));
            }
            Ok(line.trim_end_matches(['\r', '\n']).to_string())
        };
        if next_line(&mut input)? != MAGIC {
            return Err(CheckpointError::Malformed("bad magic line".into()));
        }
        let mut kind = None;
        let mut n_values = None;
        let mut fields = Vec::new();
        loop {
            let l = next_line(&mut input)?;
            if l == "end" {
                break;
            }
            let (k, v) = l
                .split_once(' ')
                .ok_or_else(|| CheckpointError::Malformed(format!("bad header line {l:?}")))?;
            match k {
                "kind" => kind = Some(v.to_string()),
                "values" => {
                    n_values = Some(v.parse::<usize>().map_err(|_| {
                        CheckpointError::Malformed(format!("bad value count {v:?}"))
                    })?)
                }
                _ => fields.push((k.to_string(), v.to_string())),
            }
        }
        let kind = kind.ok_or_else(|| CheckpointError::Malformed("missing kind".into()))?;
        let n = n_values.ok_or_else(|| CheckpointError::Malformed("missing value count".into()))?;
        let mut payload = Vec::new();
        input.read_to_end(&mut payload)?;
        if payload.len() != n * 8 {
            return Err(CheckpointError::Shape {
                expected: n,
                got: payload.len() / 8,
            });
        }
        let values: Vec<f64> = payload
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(CheckpointError::NonFinite);
        }
        Ok(Self {
            kind,
            fields,
            values,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(fs::File::open(path)?)
    }
}

pub const STAGE_KIND: &str = "stage-mlp";

/// Serialize a staging network with the configuration that produced it.
/// The payload is the parameter vector followed by the feature mean and
/// scale.
pub fn stage_checkpoint(net: &StageNet, config: &TrainConfig) -> Checkpoint {
    let mut ck = Checkpoint::new(STAGE_KIND)
        .field("architecture", format!("{N_FEATURES}-{}-3 tanh softmax", net.hidden()))
        .field("hidden", net.hidden())
        .field("seed", config.seed)
        .field("epochs", config.epochs)
        .field("batch_size", config.batch_size)
        .field("lr", config.adam.lr)
        .field("weight_decay", config.adam.weight_decay)
        .field("beta1", config.adam.beta1)
        .field("beta2", config.adam.beta2)
        .field("eps", config.adam.eps);
    ck.values.extend_from_slice(net.params());
    ck.values.extend_from_slice(&net.norm().mean);
    ck.values.extend_from_slice(&net.norm().scale);
    ck
}

pub fn stage_from_checkpoint(ck: &Checkpoint) -> Result<StageNet> {
    ck.expect_kind(STAGE_KIND)?;
    let hidden: usize = ck.parse_field("hidden")?;
    if hidden == 0 {
        return Err(CheckpointError::Malformed("hidden width 0".into()));
    }
    let n_params = crate::stage::param_count(hidden);
    let expected = n_params + 2 * N_FEATURES;
    if ck.values.len() != expected {
        return Err(CheckpointError::Shape {
            expected,
            got: ck.values.len(),
        });
    }
    let (params, norm) = ck.values.split_at(n_params);
    let mut mean = [0.0; N_FEATURES];
    let mut scale = [0.0; N_FEATURES];
    mean.copy_from_slice(&norm[..N_FEATURES]);
    scale.copy_from_slice(&norm[N_FEATURES..]);
    if scale.iter().any(|&s| s <= 0.0) {
        return Err(CheckpointError::Malformed("feature scale must be positive".into()));
    }
    StageNet::from_parts(hidden, params.to_vec(), FeatureNorm { mean, scale })
        .map_err(|e| CheckpointError::Malformed(e.to_string()))
}

pub fn save_stage(net: &StageNet, config: &TrainConfig, path: impl AsRef<Path>) -> Result<()> {
    stage_checkpoint(net, config).save(path)
}

pub fn load_stage(path: impl AsRef<Path>) -> Result<StageNet> {
    stage_from_checkpoint(&Checkpoint::load(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stage_roundtrip_is_exact() {
        let mut net = StageNet::init(7, 11).unwrap();
        net.set_norm(FeatureNorm {
            mean: [0.1, 0.2, 0.3, 0.4, 0.5, 6.0],
            scale: [1.0, 2.0, 0.5, 0.25, 3.0, 1.5],
        });
        let bytes = stage_checkpoint(&net, &TrainConfig::default()).to_bytes();
        let back = stage_from_checkpoint(&Checkpoint::read_from(&bytes[..]).unwrap()).unwrap();
        assert_eq!(back, net);
    }

    #[test]
    fn shape_and_kind_are_checked() {
        let net = StageNet::init(4, 0).unwrap();
        let mut ck = stage_checkpoint(&net, &TrainConfig::default());
        ck.fields.iter_mut().find(|(k, _)| k == "hidden").unwrap().1 = "5".into();
        assert!(matches!(
            stage_from_checkpoint(&Checkpoint::read_from(&ck.to_bytes()[..]).unwrap()),
            Err(CheckpointError::Shape { .. })
        ));

        let other = Checkpoint::new("experience-fc");
        assert!(matches!(
            stage_from_checkpoint(&other),
            Err(CheckpointError::WrongKind { .. })
        ));

        let mut bytes = stage_checkpoint(&net, &TrainConfig::default()).to_bytes();
        bytes.truncate(bytes.len() - 3);
        assert!(matches!(
            Checkpoint::read_from(&bytes[..]),
            Err(CheckpointError::Shape { .. })
        ));
        assert!(Checkpoint::read_from(&b"SOMNOCKPT 1\nkind x\n"[..]).is_err());
    }
}
