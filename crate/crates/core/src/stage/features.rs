//! Welch band-power features.

use std::sync::{Arc, OnceLock};

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::signal::Epoch;

pub const N_FEATURES: usize = 6;
/// Floor applied to total power before taking its logarithm.
pub const LOG_POWER_FLOOR: f64 = 1e-12;

const SEGMENT: usize = 400;
const HOP: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Band {
    Delta,
    Theta,
    Alpha,
    Sigma,
    Beta,
}

pub const BANDS: [Band; 5] = [Band::Delta, Band::Theta, Band::Alpha, Band::Sigma, Band::Beta];

impl Band {
    pub fn range(self) -> (f64, f64) {
        match self {
            Band::Delta => (0.5, 4.0),
            Band::Theta => (4.0, 8.0),
            Band::Alpha => (8.0, 12.0),
            Band::Sigma => (12.0, 16.0),
            Band::Beta => (16.0, 30.0),
        }
    }

    /// Half-open, except beta which also includes its 30 Hz edge.
    pub fn contains(self, f: f64) -> bool {
        let (lo, hi) = self.range();
        f >= lo && (f < hi || (self == Band::Beta && f == hi))
    }

    pub fn name(self) -> &'static str {
        match self {
            Band::Delta => "delta",
            Band::Theta => "theta",
            Band::Alpha => "alpha",
            Band::Sigma => "sigma",
            Band::Beta => "beta",
        }
    }
}

/// Relative powers of the five bands followed by log total power.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector(pub [f64; N_FEATURES]);

impl FeatureVector {
    pub fn relative(&self, band: Band) -> f64 {
        self.0[band as usize]
    }

    pub fn log_total_power(&self) -> f64 {
        self.0[5]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dominant_band(&self) -> Band {
        let mut best = Band::Delta;
        for b in BANDS {
            if self.relative(b) > self.relative(best) {
                best = b;
            }
        }
        best
    }
}

fn periodic_hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
        .collect()
}

/// One-sided Welch PSD (units²/Hz) with a periodic Hann window and per-segment
/// mean removal. Returns `(frequencies, psd)`.
pub fn welch_psd(x: &[f64], rate_hz: f64, segment: usize, hop: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(segment > 0 && hop > 0 && x.len() >= segment);
    let fft = plan(segment);
    let window = periodic_hann(segment);
    let win_power: f64 = window.iter().map(|w| w * w).sum();
    let bins = segment / 2 + 1;
    let mut psd = vec![0.0; bins];
    let mut buf = vec![Complex::new(0.0, 0.0); segment];
    let mut count = 0usize;
    let mut start = 0;
    while start + segment <= x.len() {
        let seg = &x[start..start + segment];
        let mean = seg.iter().sum::<f64>() / segment as f64;
        for ((b, &s), &w) in buf.iter_mut().zip(seg).zip(&window) {
            *b = Complex::new((s - mean) * w, 0.0);
        }
        fft.process(&mut buf);
        for (p, c) in psd.iter_mut().zip(&buf) {
            *p += c.norm_sqr();
        }
        count += 1;
        start += hop;
    }
    let scale = 1.0 / (rate_hz * win_power * count as f64);
    for (k, p) in psd.iter_mut().enumerate() {
        *p *= scale;
        let edge = k == 0 || (segment % 2 == 0 && k == segment / 2);
        if !edge {
            *p *= 2.0;
        }
    }
    let df = rate_hz / segment as f64;
    let freqs = (0..bins).map(|k| k as f64 * df).collect();
    (freqs, psd)
}

fn plan(n: usize) -> Arc<dyn Fft<f64>> {
    static STAGING: OnceLock<Arc<dyn Fft<f64>>> = OnceLock::new();
    if n == SEGMENT {
        STAGING
            .get_or_init(|| FftPlanner::new().plan_fft_forward(SEGMENT))
            .clone()
    } else {
        FftPlanner::new().plan_fft_forward(n)
    }
}

/// Band-power features of one epoch: 4 s Hann segments, 50 % overlap.
/// An all-zero epoch yields zero relative powers and a floored log power.
pub fn band_powers(epoch: &Epoch) -> FeatureVector {
    let rate = f64::from(epoch.rate_hz());
    let segment = (4 * epoch.rate_hz()) as usize;
    let (segment, hop) = if segment == SEGMENT {
        (SEGMENT, HOP)
    } else {
        (segment, segment / 2)
    };
    let (freqs, psd) = welch_psd(epoch.samples(), rate, segment, hop);
    let df = freqs[1] - freqs[0];
    let mut powers = [0.0; 5];
    for (f, p) in freqs.iter().zip(&psd) {
        if let Some(i) = BANDS.iter().position(|b| b.contains(*f)) {
            powers[i] += p * df;
        }
    }
    let total: f64 = powers.iter().sum();
    let mut out = [0.0; N_FEATURES];
    if total > 0.0 {
        for (o, p) in out.iter_mut().zip(&powers) {
            *o = p / total;
        }
    }
    out[5] = total.max(LOG_POWER_FLOOR).ln();
    FeatureVector(out)
}
