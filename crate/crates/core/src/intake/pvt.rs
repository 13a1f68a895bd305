//! Psychomotor vigilance task summary.

use serde::{Deserialize, Serialize};

use super::{IntakeError, Result};

/// Responses slower than this count as lapses.
pub const LAPSE_MS: f64 = 500.0;
/// Responses faster than this are false starts.
pub const FALSE_START_MS: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PvtTrial {
    Reaction(f64),
    FalseStart,
}

impl PvtTrial {
    pub fn from_ms(ms: f64) -> Self {
        if ms < FALSE_START_MS {
            PvtTrial::FalseStart
        } else {
            PvtTrial::Reaction(ms)
        }
    }

    /// Comma- or whitespace-separated milliseconds; `fs` marks a false start.
    pub fn parse_list(text: &str) -> Result<Vec<Self>> {
        text.split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(|t| {
                if t.eq_ignore_ascii_case("fs") {
                    return Ok(PvtTrial::FalseStart);
                }
                t.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .map(Self::from_ms)
                    .ok_or_else(|| IntakeError::BadItem {
                        item: "pvt.trials".into(),
                        value: t.to_string(),
                    })
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PvtResult {
    pub trials: usize,
    pub mean_rt_ms: f64,
    pub lapses: usize,
    /// Mean of `1000 / rt`, in s⁻¹.
    pub mean_reciprocal: f64,
    pub false_starts: usize,
}

pub fn score_pvt(trials: &[PvtTrial]) -> Result<PvtResult> {
    if trials.is_empty() {
        return Err(IntakeError::NoTrials);
    }
    let rts: Vec<f64> = trials
        .iter()
        .filter_map(|t| match t {
            PvtTrial::Reaction(ms) => Some(*ms),
            PvtTrial::FalseStart => None,
        })
        .collect();
    if rts.is_empty() {
        return Err(IntakeError::AllFalseStarts);
    }
    let n = rts.len() as f64;
    Ok(PvtResult {
        trials: trials.len(),
        mean_rt_ms: rts.iter().sum::<f64>() / n,
        lapses: rts.iter().filter(|&&r| r > LAPSE_MS).count(),
        mean_reciprocal: rts.iter().map(|r| 1000.0 / r).sum::<f64>() / n,
        false_starts: trials.len() - rts.len(),
    })
}
