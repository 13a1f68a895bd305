//! Kaiser-window FIR design and polyphase decimation.
//!
//! The decimator only evaluates the filter at output instants (every
//! `factor`-th input), which is the polyphase form of filter-then-downsample.
//! Taps are odd-length and symmetric, so the group delay is an integer
//! `(taps - 1) / 2` input samples; it is compensated by centring each output
//! on its input instant. Both ends are reflect-padded.

use std::f64::consts::PI;

use rayon::prelude::*;

use super::{MultiChannelRecord, Result, SignalError, SingleChannelSignal};

/// Low-pass specification in absolute frequency units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowPassDesign {
    pub rate_hz: f64,
    /// Passband edge.
    pub pass_hz: f64,
    /// Stopband edge.
    pub stop_hz: f64,
    /// Target stopband attenuation in dB.
    pub atten_db: f64,
}

impl LowPassDesign {
    /// Anti-alias design for decimating `rate_hz` by `factor`: passband to
    /// 40% of the output rate, stopband from the output Nyquist.
    pub fn anti_alias(rate_hz: u32, factor: u32) -> Self {
        let out = f64::from(rate_hz) / f64::from(factor);
        Self {
            rate_hz: f64::from(rate_hz),
            pass_hz: 0.4 * out,
            stop_hz: 0.5 * out,
            atten_db: 65.0,
        }
    }
}

/// Zeroth-order modified Bessel function of the first kind (power series).
fn bessel_i0(x: f64) -> f64 {
    let q = x * x / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        term *= q / (k as f64 * k as f64);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

fn kaiser_beta(atten_db: f64) -> f64 {
    if atten_db > 50.0 {
        0.1102 * (atten_db - 8.7)
    } else if atten_db >= 21.0 {
        0.5842 * (atten_db - 21.0).powf(0.4) + 0.07886 * (atten_db - 21.0)
    } else {
        0.0
    }
}

/// Windowed-sinc low-pass with a Kaiser window, normalized to unit DC gain.
/// Always returns an odd number of symmetric taps.
pub fn kaiser_lowpass(design: &LowPassDesign) -> Vec<f64> {
    let width = (design.stop_hz - design.pass_hz) / design.rate_hz;
    let mut taps =
        ((design.atten_db - 7.95) / (2.285 * 2.0 * PI * width)).ceil() as usize + 1;
    if taps % 2 == 0 {
        taps += 1;
    }
    let cutoff = 0.5 * (design.pass_hz + design.stop_hz) / design.rate_hz;
    let beta = kaiser_beta(design.atten_db);
    let centre = (taps - 1) as f64 / 2.0;
    let norm = bessel_i0(beta);

    let mut h: Vec<f64> = (0..taps)
        .map(|n| {
            let t = n as f64 - centre;
            let sinc = if t == 0.0 {
                2.0 * cutoff
            } else {
                (2.0 * PI * cutoff * t).sin() / (PI * t)
            };
            let r = t / centre;
            let window = bessel_i0(beta * (1.0 - r * r).max(0.0).sqrt()) / norm;
            sinc * window
        })
        .collect();
    let dc: f64 = h.iter().sum();
    h.iter_mut().for_each(|x| *x /= dc);
    h
}

/// Eight independent accumulators so the loop vectorizes.
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for i in 0..8 {
            acc[i] += x[i] * y[i];
        }
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    (acc[0] + acc[4]) + (acc[1] + acc[5]) + (acc[2] + acc[6]) + (acc[3] + acc[7]) + tail
}

/// Integer-factor decimator with a fixed anti-alias filter.
#[derive(Debug, Clone)]
pub struct Decimator {
    factor: usize,
    /// Taps in reverse order, ready for a forward dot product.
    reversed: Vec<f64>,
}

impl Decimator {
    pub fn new(rate_hz: u32, factor: u32) -> Result<Self> {
        if factor == 0 {
            return Err(SignalError::ZeroFactor);
        }
        if rate_hz == 0 {
            return Err(SignalError::InvalidRate);
        }
        if rate_hz % factor != 0 {
            return Err(SignalError::NonIntegerRatio { rate_hz, factor });
        }
        let taps = if factor == 1 {
            vec![1.0]
        } else {
            kaiser_lowpass(&LowPassDesign::anti_alias(rate_hz, factor))
        };
        Ok(Self::with_taps(factor as usize, taps))
    }

    /// Use caller-supplied taps. They must have odd length for the delay
    /// compensation to be exact.
    pub fn with_taps(factor: usize, mut taps: Vec<f64>) -> Self {
        assert!(factor > 0 && taps.len() % 2 == 1);
        taps.reverse();
        Self {
            factor,
            reversed: taps,
        }
    }

    pub fn factor(&self) -> usize {
        self.factor
    }

    pub fn filter_len(&self) -> usize {
        self.reversed.len()
    }

    pub fn taps(&self) -> Vec<f64> {
        self.reversed.iter().rev().copied().collect()
    }

    /// Decimate raw samples. Output length is `floor(len / factor)`.
    pub fn process(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.is_empty() {
            return Err(SignalError::EmptySignal);
        }
        let taps = self.reversed.len();
        if x.len() < taps {
            return Err(SignalError::TooShort {
                len: x.len(),
                needed: taps,
            });
        }
        let half = (taps - 1) / 2;
        let n = x.len();
        let mut padded = Vec::with_capacity(n + 2 * half);
        padded.extend((1..=half).rev().map(|i| x[i]));
        padded.extend_from_slice(x);
        padded.extend((1..=half).map(|i| x[n - 1 - i]));

        let out_len = n / self.factor;
        Ok((0..out_len)
            .map(|m| {
                let start = m * self.factor;
                dot(&self.reversed, &padded[start..start + taps])
            })
            .collect())
    }
}

/// Decimate a single channel by an integer factor.
pub fn decimate(signal: &SingleChannelSignal, factor: u32) -> Result<SingleChannelSignal> {
    let decimator = Decimator::new(signal.rate_hz(), factor)?;
    let out = decimator.process(signal.samples())?;
    SingleChannelSignal::new(signal.name(), out, signal.rate_hz() / factor)
}

/// Decimate every channel of a record, channels in parallel.
pub fn decimate_record(record: &MultiChannelRecord, factor: u32) -> Result<MultiChannelRecord> {
    let decimator = Decimator::new(record.rate_hz(), factor)?;
    let samples = record
        .samples()
        .par_iter()
        .map(|series| decimator.process(series))
        .collect::<Result<Vec<_>>>()?;
    MultiChannelRecord::new(
        record.channels().to_vec(),
        samples,
        record.rate_hz() / factor,
        record.reference().clone(),
    )
}
