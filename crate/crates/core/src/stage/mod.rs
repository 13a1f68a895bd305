//! 30-second epoch → W/N/R staging.
//!
//! The reference classifier is a small feed-forward network over relative
//! band powers, trained with cross-entropy and Adam. Anything implementing
//! [`StageClassifier`] can stand in for it.

mod adam;
mod features;
mod net;
mod train;

pub use adam::{AdamConfig, AdamState};
pub use features::{band_powers, welch_psd, Band, FeatureVector, BANDS, LOG_POWER_FLOOR, N_FEATURES};
pub use net::{cross_entropy, softmax, FeatureNorm, StageNet, PROB_FLOOR};
pub(crate) use net::param_count;
pub use train::{train, train_features, EpochStats, TrainConfig, TrainHistory};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::checkpoint::CheckpointError;
use crate::signal::Epoch;

#[derive(Debug, Error)]
pub enum StageError {
    #[error("training set is empty")]
    EmptyDataset,
    #[error("parameter shape mismatch: expected {expected} values, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("hidden width must be at least 1")]
    ZeroHidden,
    #[error("batch size must be at least 1")]
    ZeroBatch,
    #[error("epoch must be 3000 samples at 100 Hz, got {len} at {rate_hz} Hz")]
    BadEpoch { len: usize, rate_hz: u32 },
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
}

pub type Result<T> = std::result::Result<T, StageError>;

/// Wake, merged NREM, REM. Declaration order is the tie-break order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StageLabel {
    W,
    N,
    R,
}

impl StageLabel {
    pub const ALL: [StageLabel; 3] = [StageLabel::W, StageLabel::N, StageLabel::R];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn as_char(self) -> char {
        match self {
            StageLabel::W => 'W',
            StageLabel::N => 'N',
            StageLabel::R => 'R',
        }
    }
}

impl fmt::Display for StageLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("unknown stage label {0:?}")]
pub struct ParseStageError(pub String);

impl FromStr for StageLabel {
    type Err = ParseStageError;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "W" | "WAKE" => Ok(StageLabel::W),
            "N" | "NREM" => Ok(StageLabel::N),
            "R" | "REM" => Ok(StageLabel::R),
            _ => Err(ParseStageError(s.to_string())),
        }
    }
}

/// Outcome of mapping an external corpus label.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelMapping {
    Stage(StageLabel),
    /// Movement, unscored or unrecognized epochs are dropped from training.
    Excluded,
}

/// Map Sleep-EDF / R&K hypnogram annotations (long or short form, any case)
/// onto W/N/R. NREM depths 1–4 merge into N. Total over all strings.
pub fn map_raw_label(raw: &str) -> LabelMapping {
    let s = raw.trim().to_ascii_lowercase();
    let s = s.strip_prefix("sleep stage").map(str::trim).unwrap_or(&s);
    match s {
        "w" | "wake" => LabelMapping::Stage(StageLabel::W),
        "1" | "2" | "3" | "4" | "n1" | "n2" | "n3" | "n4" | "s1" | "s2" | "s3" | "s4" | "n"
        | "nrem" => LabelMapping::Stage(StageLabel::N),
        "r" | "rem" => LabelMapping::Stage(StageLabel::R),
        _ => LabelMapping::Excluded,
    }
}

/// Pluggable epoch classifier.
pub trait StageClassifier: Send + Sync {
    fn classify(&self, epoch: &Epoch) -> StageLabel;
}

impl StageClassifier for StageNet {
    fn classify(&self, epoch: &Epoch) -> StageLabel {
        self.predict_stage(epoch)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_mapping_covers_corpus_strings() {
        let cases = [
            ("Sleep stage W", Some(StageLabel::W)),
            ("Sleep stage 1", Some(StageLabel::N)),
            ("Sleep stage 2", Some(StageLabel::N)),
            ("Sleep stage 3", Some(StageLabel::N)),
            ("Sleep stage 4", Some(StageLabel::N)),
            ("Sleep stage R", Some(StageLabel::R)),
            ("Sleep stage ?", None),
            ("Movement time", None),
            ("W", Some(StageLabel::W)),
            ("N1", Some(StageLabel::N)),
            ("N2", Some(StageLabel::N)),
            ("N3", Some(StageLabel::N)),
            ("N4", Some(StageLabel::N)),
            ("REM", Some(StageLabel::R)),
            ("MOVEMENT", None),
            ("UNKNOWN", None),
            ("", None),
            ("garbage", None),
        ];
        for (raw, expected) in cases {
            let got = match map_raw_label(raw) {
                LabelMapping::Stage(s) => Some(s),
                LabelMapping::Excluded => None,
            };
            assert_eq!(got, expected, "{raw:?}");
        }
    }

    #[test]
    fn label_order_and_parse() {
        assert!(StageLabel::W < StageLabel::N && StageLabel::N < StageLabel::R);
        for l in StageLabel::ALL {
            assert_eq!(StageLabel::from_index(l.index()), Some(l));
            assert_eq!(l.to_string().parse::<StageLabel>().unwrap(), l);
        }
        assert!("Q".parse::<StageLabel>().is_err());
    }
}
