//! Pittsburgh Sleep Quality Index, standard seven-component scoring.

use serde::{Deserialize, Serialize};

use super::{Answers, IntakeError, Result};

/// Items 5b–5j, summed into the disturbance component.
#[cfg(test)]
const DISTURBANCE_ITEMS: [&str; 9] = ["5b", "5c", "5d", "5e", "5f", "5g", "5h", "5i", "5j"];

/// The self-rated items that enter scoring.
#[derive(Debug, Clone, PartialEq)]
pub struct PsqiAnswers {
    /// Usual bedtime and getting-up time, minutes after midnight.
    pub bedtime_min: u32,
    pub wake_min: u32,
    /// Minutes to fall asleep.
    pub latency_min: f64,
    /// Hours of actual sleep.
    pub sleep_hours: f64,
    /// Items 5a–5j, each 0–3.
    pub disturbances: [u8; 10],
    pub quality: u8,
    pub medication: u8,
    pub staying_awake: u8,
    pub enthusiasm: u8,
}

fn clock(answers: &Answers, key: &str) -> Result<u32> {
    let raw = answers.require(key)?;
    let bad = || IntakeError::BadItem {
        item: key.to_string(),
        value: raw.to_string(),
    };
    let (h, m) = raw.split_once(':').ok_or_else(bad)?;
    let h: u32 = h.trim().parse().map_err(|_| bad())?;
    let m: u32 = m.trim().parse().map_err(|_| bad())?;
    if h > 23 || m > 59 {
        return Err(bad());
    }
    Ok(h * 60 + m)
}

fn nonnegative(answers: &Answers, key: &str, hi: f64) -> Result<f64> {
    let v = answers.number(key)?;
    if !(0.0..=hi).contains(&v) {
        return Err(IntakeError::OutOfRange {
            item: key.to_string(),
            value: v,
            lo: 0.0,
            hi,
        });
    }
    Ok(v)
}

impl PsqiAnswers {
    pub fn from_answers(a: &Answers) -> Result<Self> {
        let mut disturbances = [0u8; 10];
        for (d, c) in disturbances.iter_mut().zip('a'..='j') {
            *d = a.level(&format!("psqi.5{c}"), 0, 3)?;
        }
        Ok(Self {
            bedtime_min: clock(a, "psqi.1")?,
            latency_min: nonnegative(a, "psqi.2", 24.0 * 60.0)?,
            wake_min: clock(a, "psqi.3")?,
            sleep_hours: nonnegative(a, "psqi.4", 24.0)?,
            disturbances,
            quality: a.level("psqi.6", 0, 3)?,
            medication: a.level("psqi.7", 0, 3)?,
            staying_awake: a.level("psqi.8", 0, 3)?,
            enthusiasm: a.level("psqi.9", 0, 3)?,
        })
    }

    /// Hours between bedtime and getting up, wrapping past midnight.
    pub fn hours_in_bed(&self) -> f64 {
        let d = (self.wake_min + 24 * 60 - self.bedtime_min) % (24 * 60);
        f64::from(d) / 60.0
    }
}

/// Seven component scores (0–3) and their sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PsqiResult {
    pub components: [u8; 7],
    pub global: u8,
}

impl PsqiResult {
    pub fn from_components(components: [u8; 7]) -> Result<Self> {
        for (i, &c) in components.iter().enumerate() {
            if c > 3 {
                return Err(IntakeError::OutOfRange {
                    item: format!("psqi.c{}", i + 1),
                    value: f64::from(c),
                    lo: 0.0,
                    hi: 3.0,
                });
            }
        }
        Ok(Self {
            components,
            global: components.iter().sum(),
        })
    }
}

fn bucket(sum: u32, edges: [u32; 3]) -> u8 {
    edges.iter().filter(|&&e| sum >= e).count() as u8
}

pub fn score_psqi(a: &PsqiAnswers) -> Result<PsqiResult> {
    let c1 = a.quality;

    let lat = match a.latency_min {
        m if m <= 15.0 => 0,
        m if m <= 30.0 => 1,
        m if m <= 60.0 => 2,
        _ => 3,
    };
    let c2 = bucket(lat + u32::from(a.disturbances[0]), [1, 3, 5]);

    let c3 = match a.sleep_hours {
        h if h >= 7.0 => 0,
        h if h >= 6.0 => 1,
        h if h >= 5.0 => 2,
        _ => 3,
    };

    let in_bed = a.hours_in_bed();
    let efficiency = if in_bed > 0.0 {
        100.0 * a.sleep_hours / in_bed
    } else {
        0.0
    };
    let c4 = match efficiency {
        e if e >= 85.0 => 0,
        e if e >= 75.0 => 1,
        e if e >= 65.0 => 2,
        _ => 3,
    };

    let dist: u32 = a.disturbances[1..].iter().map(|&d| u32::from(d)).sum();
    let c5 = bucket(dist, [1, 10, 19]);

    let c6 = a.medication;
    let c7 = bucket(u32::from(a.staying_awake) + u32::from(a.enthusiasm), [1, 3, 5]);

    PsqiResult::from_components([c1, c2, c3, c4, c5, c6, c7])
}
