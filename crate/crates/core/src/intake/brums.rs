//! Brunel Mood Scale: 24 items, six 4-item subscales.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::{IntakeError, Result};

pub const BRUMS_ITEMS: usize = 24;

const TABLE: &str = include_str!("../../data/brums_subscales.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Subscale {
    Anger,
    Confusion,
    Depression,
    Fatigue,
    Tension,
    Vigor,
}

pub const SUBSCALES: [Subscale; 6] = [
    Subscale::Anger,
    Subscale::Confusion,
    Subscale::Depression,
    Subscale::Fatigue,
    Subscale::Tension,
    Subscale::Vigor,
];

impl Subscale {
    pub fn name(self) -> &'static str {
        match self {
            Subscale::Anger => "anger",
            Subscale::Confusion => "confusion",
            Subscale::Depression => "depression",
            Subscale::Fatigue => "fatigue",
            Subscale::Tension => "tension",
            Subscale::Vigor => "vigor",
        }
    }

    /// 1-based item numbers, read from the shipped grouping table.
    pub fn items(self) -> [usize; 4] {
        groups()[self as usize]
    }
}

fn groups() -> &'static [[usize; 4]; 6] {
    static GROUPS: OnceLock<[[usize; 4]; 6]> = OnceLock::new();
    GROUPS.get_or_init(|| {
        let mut out = [[0; 4]; 6];
        for line in TABLE.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            let mut cols = line.split_whitespace();
            let name = cols.next().unwrap();
            let idx = SUBSCALES
                .iter()
                .position(|s| s.name() == name)
                .unwrap_or_else(|| panic!("unknown subscale {name:?} in grouping table"));
            let items: Vec<usize> = cols.map(|c| c.parse().expect("item number")).collect();
            out[idx] = items.try_into().expect("four items per subscale");
        }
        out
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BrumsResult {
    /// Ordered as [`SUBSCALES`], each 0–16.
    pub scores: [u8; 6],
}

impl BrumsResult {
    pub fn get(&self, s: Subscale) -> u8 {
        self.scores[s as usize]
    }
}

/// `items[i]` is item `i + 1`, rated 0–4.
pub fn score_brums(items: &[u8]) -> Result<BrumsResult> {
    if items.len() != BRUMS_ITEMS {
        return Err(IntakeError::BrumsCount {
            expected: BRUMS_ITEMS,
            got: items.len(),
        });
    }
    if let Some((i, &v)) = items.iter().enumerate().find(|(_, &v)| v > 4) {
        return Err(IntakeError::OutOfRange {
            item: format!("brums.{}", i + 1),
            value: f64::from(v),
            lo: 0.0,
            hi: 4.0,
        });
    }
    let mut scores = [0; 6];
    for s in SUBSCALES {
        scores[s as usize] = s.items().iter().map(|&i| items[i - 1]).sum();
    }
    Ok(BrumsResult { scores })
}
