//! Mental-state intake: PSQI, BRUMS and PVT scoring, and the rule policy
//! that turns a scored profile into a stimulus choice.
//!
//! Answers are a `key = value` document. Keys are `psqi.<item>` (`1`–`4`,
//! `5a`–`5j`, `6`–`9`), `brums.<1..24>` and `pvt.trials` (comma-separated
//! reaction times in ms; `fs` or anything under 100 ms is a false start).

mod brums;
mod policy;
mod psqi;
mod pvt;

pub use brums::{score_brums, BrumsResult, Subscale, BRUMS_ITEMS, SUBSCALES};
pub use policy::{Comparison, Condition, Policy, Rule, DEFAULT_POLICY};
pub use psqi::{score_psqi, PsqiAnswers, PsqiResult};
pub use pvt::{score_pvt, PvtResult, PvtTrial, FALSE_START_MS, LAPSE_MS};

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stimulus::StimulusKind;

#[derive(Debug, Error)]
pub enum IntakeError {
    #[error("missing answer for item {0:?}")]
    MissingItem(String),
    #[error("bad value {value:?} for item {item:?}")]
    BadItem { item: String, value: String },
    #[error("item {item:?} = {value} is outside {lo}..={hi}")]
    OutOfRange { item: String, value: f64, lo: f64, hi: f64 },
    #[error("expected {expected} BRUMS items, got {got}")]
    BrumsCount { expected: usize, got: usize },
    #[error("PVT needs at least one trial")]
    NoTrials,
    #[error("every PVT trial was a false start")]
    AllFalseStarts,
    #[error("duplicate key {0:?} in answer file")]
    DuplicateKey(String),
    #[error("line {line}: expected `key = value`")]
    BadLine { line: usize },
    #[error("policy rule {rule} (line {line}): {msg}")]
    Policy { rule: usize, line: usize, msg: String },
    #[error("policy has no DEFAULT rule")]
    MissingDefault,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, IntakeError>;

/// Raw `key = value` answers.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Answers(BTreeMap<String, String>);

impl Answers {
    pub fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or(IntakeError::BadLine { line: i + 1 })?;
            let k = k.trim().to_ascii_lowercase();
            if map.insert(k.clone(), v.trim().to_string()).is_some() {
                return Err(IntakeError::DuplicateKey(k));
            }
        }
        Ok(Self(map))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn insert(&mut self, key: &str, value: impl ToString) {
        self.0.insert(key.to_ascii_lowercase(), value.to_string());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key).ok_or_else(|| IntakeError::MissingItem(key.to_string()))
    }

    pub fn number(&self, key: &str) -> Result<f64> {
        let raw = self.require(key)?;
        raw.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| IntakeError::BadItem {
                item: key.to_string(),
                value: raw.to_string(),
            })
    }

    /// Integer item in `lo..=hi`.
    pub fn level(&self, key: &str, lo: u8, hi: u8) -> Result<u8> {
        let v = self.number(key)?;
        if v.fract() != 0.0 || v < f64::from(lo) || v > f64::from(hi) {
            return Err(IntakeError::OutOfRange {
                item: key.to_string(),
                value: v,
                lo: f64::from(lo),
                hi: f64::from(hi),
            });
        }
        Ok(v as u8)
    }
}

/// All three instruments, scored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntakeProfile {
    pub psqi: PsqiResult,
    pub brums: BrumsResult,
    pub pvt: PvtResult,
}

impl IntakeProfile {
    pub fn from_answers(answers: &Answers) -> Result<Self> {
        let psqi = score_psqi(&PsqiAnswers::from_answers(answers)?)?;
        let items = (1..=BRUMS_ITEMS)
            .map(|i| answers.level(&format!("brums.{i}"), 0, 4))
            .collect::<Result<Vec<_>>>()?;
        let brums = score_brums(&items)?;
        let trials = PvtTrial::parse_list(answers.require("pvt.trials")?)?;
        let pvt = score_pvt(&trials)?;
        Ok(Self { psqi, brums, pvt })
    }

    /// Names accepted by [`IntakeProfile::field`].
    pub fn field_names() -> Vec<String> {
        let mut names = vec!["psqi.global".to_string()];
        names.extend((1..=7).map(|i| format!("psqi.c{i}")));
        names.extend(SUBSCALES.iter().map(|s| format!("brums.{}", s.name())));
        names.extend(
            ["pvt.mean_rt", "pvt.lapses", "pvt.mean_reciprocal", "pvt.false_starts"]
                .iter()
                .map(|s| s.to_string()),
        );
        names
    }

    pub fn field(&self, name: &str) -> Option<f64> {
        if name == "psqi.global" {
            return Some(f64::from(self.psqi.global));
        }
        if let Some(c) = name.strip_prefix("psqi.c") {
            let i: usize = c.parse().ok()?;
            return self.psqi.components.get(i.checked_sub(1)?).map(|&v| f64::from(v));
        }
        if let Some(s) = name.strip_prefix("brums.") {
            let sub = SUBSCALES.iter().find(|x| x.name() == s)?;
            return Some(f64::from(self.brums.get(*sub)));
        }
        match name {
            "pvt.mean_rt" => Some(self.pvt.mean_rt_ms),
            "pvt.lapses" => Some(self.pvt.lapses as f64),
            "pvt.mean_reciprocal" => Some(self.pvt.mean_reciprocal),
            "pvt.false_starts" => Some(self.pvt.false_starts as f64),
            _ => None,
        }
    }

    /// Multi-line human-readable summary.
    pub fn summary(&self) -> String {
        let mut out = format!(
            "psqi.global = {}\npsqi.components = {:?}\n",
            self.psqi.global, self.psqi.components
        );
        for s in SUBSCALES {
            out += &format!("brums.{} = {}\n", s.name(), self.brums.get(s));
        }
        out += &format!(
            "pvt.mean_rt = {:.1}\npvt.lapses = {}\npvt.mean_reciprocal = {:.3}\npvt.false_starts = {}\n",
            self.pvt.mean_rt_ms, self.pvt.lapses, self.pvt.mean_reciprocal, self.pvt.false_starts
        );
        out
    }
}

/// First matching rule of `policy` wins; the default always matches.
pub fn select_stimulus(profile: &IntakeProfile, policy: &Policy) -> StimulusKind {
    policy.select(profile)
}
