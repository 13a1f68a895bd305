//! Reference computations shared by the integration tests. None of these call
//! into the code paths they are used to check.

#![allow(dead_code)]

use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

/// Magnitude spectrum of `x` (one-sided, unwindowed) and its bin width.
pub fn magnitude_spectrum(x: &[f64], rate_hz: f64) -> (Vec<f64>, f64) {
    let n = x.len();
    let fft = FftPlanner::new().plan_fft_forward(n);
    let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
    fft.process(&mut buf);
    (buf[..n / 2 + 1].iter().map(|c| c.norm()).collect(), rate_hz / n as f64)
}

/// Brick-wall low-pass: zero every DFT bin above `cutoff_hz` and invert.
pub fn lowpass(x: &[f64], rate_hz: f64, cutoff_hz: f64) -> Vec<f64> {
    let n = x.len();
    let mut planner = FftPlanner::new();
    let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
    planner.plan_fft_forward(n).process(&mut buf);
    let keep = (cutoff_hz * n as f64 / rate_hz) as usize;
    for (k, c) in buf.iter_mut().enumerate() {
        if k.min(n - k) > keep {
            *c = Complex::new(0.0, 0.0);
        }
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    buf.iter().map(|c| c.re / n as f64).collect()
}

/// Frequency of the largest non-DC bin.
pub fn peak_frequency(x: &[f64], rate_hz: f64) -> f64 {
    let (mag, df) = magnitude_spectrum(x, rate_hz);
    let k = (1..mag.len())
        .max_by(|&a, &b| mag[a].total_cmp(&mag[b]))
        .unwrap();
    k as f64 * df
}

/// Least-squares amplitude of a sinusoid at `freq` in `y` (sampled at
/// `rate_hz`). Exact when the window holds a whole number of cycles.
pub fn tone_amplitude(y: &[f64], freq: f64, rate_hz: f64) -> f64 {
    let n = y.len() as f64;
    let w = 2.0 * PI * freq / rate_hz;
    let (s, c) = y.iter().enumerate().fold((0.0, 0.0), |(s, c), (i, &v)| {
        (s + v * (w * i as f64).sin(), c + v * (w * i as f64).cos())
    });
    2.0 / n * (s * s + c * c).sqrt()
}

/// Welch-averaged spectral flatness (geometric over arithmetic mean of the
/// PSD bins inside `[lo_hz, hi_hz]`) with Hann segments of `seg` samples.
pub fn spectral_flatness(x: &[f64], seg: usize, rate_hz: f64, lo_hz: f64, hi_hz: f64) -> f64 {
    let fft = FftPlanner::new().plan_fft_forward(seg);
    let win: Vec<f64> = (0..seg).map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / seg as f64).cos()).collect();
    let mut psd = vec![0.0; seg / 2 + 1];
    let mut count = 0;
    let mut start = 0;
    while start + seg <= x.len() {
        let mut buf: Vec<Complex<f64>> = x[start..start + seg]
            .iter()
            .zip(&win)
            .map(|(&v, &w)| Complex::new(v * w, 0.0))
            .collect();
        fft.process(&mut buf);
        for (p, c) in psd.iter_mut().zip(&buf) {
            *p += c.norm_sqr();
        }
        count += 1;
        start += seg / 2;
    }
    assert!(count > 0);
    let df = rate_hz / seg as f64;
    let inner = &psd[(lo_hz / df).ceil() as usize..=(hi_hz / df).floor() as usize];
    let log_mean = inner.iter().map(|p| p.ln()).sum::<f64>() / inner.len() as f64;
    let mean = inner.iter().sum::<f64>() / inner.len() as f64;
    log_mean.exp() / mean
}

/// `[first, last]` sample indices with nonzero value inside `x[from..to]`.
pub fn nonzero_support(x: &[f64], from: usize, to: usize) -> Option<(usize, usize)> {
    let to = to.min(x.len());
    let first = (from..to).find(|&i| x[i] != 0.0)?;
    let last = (from..to).rev().find(|&i| x[i] != 0.0)?;
    Some((first, last))
}

/// Accuracy and two-class macro F1 from an explicit 2×2 confusion matrix
/// `m[label][pred]`.
pub fn confusion_oracle(preds: &[usize], labels: &[usize]) -> (f64, f64) {
    let mut m = [[0usize; 2]; 2];
    for (&p, &l) in preds.iter().zip(labels) {
        m[l][p] += 1;
    }
    let total = preds.len();
    let acc = (m[0][0] + m[1][1]) as f64 / total as f64;
    let f1 = |c: usize| {
        let o = 1 - c;
        let (tp, fp, fn_) = (m[c][c], m[o][c], m[c][o]);
        if tp == 0 {
            0.0
        } else {
            (2 * tp) as f64 / (2 * tp + fp + fn_) as f64
        }
    };
    (acc, (f1(0) + f1(1)) / 2.0)
}

/// Central differences of `f` at `x` with step `h`.
pub fn finite_difference(x: &[f64], h: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut p = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = p[i];
            p[i] = orig + h;
            let up = f(&p);
            p[i] = orig - h;
            let down = f(&p);
            p[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// `max|a - n| / max|a|`, the gradient-check error of one configuration.
pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let diff = analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs())
        .fold(0.0, f64::max);
    let scale = analytic.iter().chain(numeric).map(|v| v.abs()).fold(1e-12, f64::max);
    diff / scale
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}
