use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::experience::SleepExperience;
use crate::stimulus::StimulusKind;

/// Outcome of one finalized session. Contains no wall-clock data, so equal
/// inputs give byte-identical JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionReport {
    pub stimulus: StimulusKind,
    /// Which policy document chose the stimulus.
    pub policy: String,
    /// The 20 predicted stages, one letter each.
    pub stages: String,
    pub stop_epoch: Option<usize>,
    pub rearm_epochs: Vec<usize>,
    pub experience: SleepExperience,
    pub probability: f64,
    pub stop_k: usize,
    pub gain_dbfs: f64,
    pub epochs: usize,
    pub preprocessed_samples: usize,
    pub raw_chunks: u64,
    pub duration_ms: u64,
}

impl SessionReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Lower-case hex SHA-256 of [`Self::to_json`].
    pub fn sha256(&self) -> String {
        Sha256::digest(self.to_json().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}
