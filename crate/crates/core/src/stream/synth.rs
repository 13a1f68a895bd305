//! Stage-scripted synthetic EEG.
//!
//! A latent source mixes one sinusoid per canonical band: the bands that
//! characterize the current stage get `dominant_uv`, the rest `other_uv`.
//! Band frequencies and phases are redrawn every 30 s. Each electrode sees the
//! source through a fixed topographic gain plus independent Gaussian noise;
//! Pz and Oz have gains +½ and −½ so the Pz-Oz derivation carries the source at
//! unit gain. Output is FCz-referenced at 1000 Hz.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{EegChunk, Result, StreamError, StreamHeader, ACQ_RATE_HZ};
use crate::signal::Reference;
use crate::stage::{Band, StageLabel, BANDS};

/// Generator amplitudes in microvolts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthParams {
    pub dominant_uv: f64,
    pub other_uv: f64,
    /// σ of the noise on the Pz-Oz derivation.
    pub noise_sigma_uv: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            dominant_uv: 30.0,
            other_uv: 5.0,
            noise_sigma_uv: 2.0,
        }
    }
}

/// Ordered `(stage, seconds)` segments plus the noise seed.
#[derive(Debug, Clone, PartialEq)]
pub struct StageScript {
    segments: Vec<(StageLabel, f64)>,
    seed: u64,
}

impl StageScript {
    pub fn new(segments: Vec<(StageLabel, f64)>, seed: u64) -> Result<Self> {
        if segments.is_empty() {
            return Err(StreamError::EmptyScript);
        }
        for (i, (_, d)) in segments.iter().enumerate() {
            if !(d.is_finite() && *d > 0.0) {
                return Err(StreamError::InvalidScript(format!(
                    "segment {i} has non-positive duration {d}"
                )));
            }
        }
        Ok(Self { segments, seed })
    }

    /// Parse `W 300` lines (blank lines and `#` comments allowed) or the
    /// inline form `W:300,N:300`.
    pub fn parse(text: &str, seed: u64) -> Result<Self> {
        let items: Vec<&str> = if text.contains('\n') || !text.contains(',') && text.contains(' ') {
            text.lines()
                .map(|l| l.split('#').next().unwrap_or("").trim())
                .filter(|l| !l.is_empty())
                .collect()
        } else {
            text.split(',').map(str::trim).filter(|s| !s.is_empty()).collect()
        };
        let mut segments = Vec::with_capacity(items.len());
        for item in items {
            let mut parts = item.split(|c: char| c == ':' || c.is_whitespace()).filter(|s| !s.is_empty());
            let (Some(label), Some(dur), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(StreamError::InvalidScript(format!("cannot parse {item:?}")));
            };
            let label: StageLabel = label
                .parse()
                .map_err(|_| StreamError::InvalidScript(format!("unknown stage {label:?}")))?;
            let dur: f64 = dur
                .parse()
                .map_err(|_| StreamError::InvalidScript(format!("bad duration {dur:?}")))?;
            segments.push((label, dur));
        }
        Self::new(segments, seed)
    }

    pub fn segments(&self) -> &[(StageLabel, f64)] {
        &self.segments
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn total_seconds(&self) -> f64 {
        self.segments.iter().map(|(_, d)| d).sum()
    }

    /// Stage active at `t` seconds, if `t` lies inside the script.
    pub fn stage_at(&self, t: f64) -> Option<StageLabel> {
        let mut end = 0.0;
        for &(label, d) in &self.segments {
            end += d;
            if t < end {
                return Some(label);
            }
        }
        None
    }

    /// Ground-truth label of every complete 30 s epoch (taken at its midpoint).
    pub fn epoch_labels(&self) -> Vec<StageLabel> {
        let n = (self.total_seconds() / 30.0).floor() as usize;
        (0..n)
            .filter_map(|i| self.stage_at(i as f64 * 30.0 + 15.0))
            .collect()
    }
}

impl fmt::Display for StageScript {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .segments
            .iter()
            .map(|(l, d)| format!("{l}:{d}"))
            .collect();
        f.write_str(&parts.join(","))
    }
}

fn dominant(stage: StageLabel, band: Band) -> bool {
    match stage {
        StageLabel::W => matches!(band, Band::Alpha | Band::Beta),
        StageLabel::N => band == Band::Delta,
        StageLabel::R => band == Band::Theta,
    }
}

#[derive(Debug, Clone, Copy)]
struct Tone {
    amp: f64,
    omega: f64,
    phase: f64,
}

/// Chunk iterator produced by [`synth_eeg`].
pub struct SynthEeg {
    script: StageScript,
    params: SynthParams,
    channels: Vec<String>,
    gains: Vec<f64>,
    fcz: usize,
    rng: ChaCha8Rng,
    /// Sample boundaries of each segment, cumulative.
    seg_ends: Vec<u64>,
    total: u64,
    cursor: u64,
    block: Option<(usize, u64)>,
    tones: Vec<Tone>,
    seq: u64,
}

/// Build a deterministic synthetic stream for `script` over `montage`.
pub fn synth_eeg(script: &StageScript, montage: &[String]) -> Result<SynthEeg> {
    synth_eeg_with(script, montage, SynthParams::default())
}

pub fn synth_eeg_with(script: &StageScript, montage: &[String], params: SynthParams) -> Result<SynthEeg> {
    let find = |name: &str| {
        montage.iter().position(|c| c == name).ok_or_else(|| {
            StreamError::InvalidScript(format!("montage lacks required channel {name}"))
        })
    };
    let pz = find("Pz")?;
    let oz = find("Oz")?;
    let fcz = find("FCz")?;
    if montage.len() > usize::from(u16::MAX) {
        return Err(StreamError::InvalidScript("too many channels".into()));
    }
    let gains = (0..montage.len())
        .map(|i| match i {
            _ if i == pz => 0.5,
            _ if i == oz => -0.5,
            _ if i == fcz => 0.2,
            _ => 0.4 * (1.3 * i as f64 + 0.5).sin(),
        })
        .collect();
    let rate = f64::from(ACQ_RATE_HZ);
    let mut acc = 0u64;
    let mut seg_ends = Vec::with_capacity(script.segments.len());
    let mut t = 0.0;
    for (_, d) in &script.segments {
        t += d;
        acc = (t * rate).round() as u64;
        seg_ends.push(acc);
    }
    Ok(SynthEeg {
        script: script.clone(),
        params,
        channels: montage.to_vec(),
        gains,
        fcz,
        rng: ChaCha8Rng::seed_from_u64(script.seed),
        seg_ends,
        total: acc,
        cursor: 0,
        block: None,
        tones: Vec::with_capacity(BANDS.len()),
        seq: 1,
    })
}

impl SynthEeg {
    pub fn header(&self) -> StreamHeader {
        StreamHeader {
            rate_hz: ACQ_RATE_HZ,
            channels: self.channels.clone(),
            reference: Reference::Channel("FCz".into()),
            n_samples: self.total,
        }
    }

    pub fn script(&self) -> &StageScript {
        &self.script
    }

    fn segment_of(&self, sample: u64) -> usize {
        self.seg_ends.partition_point(|&end| end <= sample)
    }

    fn redraw(&mut self, stage: StageLabel) {
        self.tones.clear();
        for band in BANDS {
            let (lo, hi) = band.range();
            let margin = 0.1 * (hi - lo);
            let freq = self.rng.random_range(lo + margin..hi - margin);
            let phase = self.rng.random_range(0.0..2.0 * PI);
            let amp = if dominant(stage, band) {
                self.params.dominant_uv
            } else {
                self.params.other_uv
            };
            self.tones.push(Tone {
                amp,
                omega: 2.0 * PI * freq,
                phase,
            });
        }
    }
}

impl Iterator for SynthEeg {
    type Item = Result<EegChunk>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.cursor >= self.total {
            return None;
        }
        let rate = u64::from(ACQ_RATE_HZ);
        let n = (self.total - self.cursor).min(rate) as usize;
        let n_ch = self.channels.len();
        let sigma = self.params.noise_sigma_uv / SQRT_2;
        let mut raw = vec![0f64; n_ch];
        let mut samples = vec![0f32; n_ch * n];

        for i in 0..n {
            let sample = self.cursor + i as u64;
            let seg = self.segment_of(sample);
            let seg_start = if seg == 0 { 0 } else { self.seg_ends[seg - 1] };
            let block = (seg, (sample - seg_start) / (30 * rate));
            if self.block != Some(block) {
                self.block = Some(block);
                self.redraw(self.script.segments[seg].0);
            }
            let t = sample as f64 / rate as f64;
            let source: f64 = self
                .tones
                .iter()
                .map(|tone| tone.amp * (tone.omega * t + tone.phase).sin())
                .sum();
            for (c, r) in raw.iter_mut().enumerate() {
                let noise: f64 = self.rng.sample(StandardNormal);
                *r = self.gains[c] * source + sigma * noise;
            }
            let reference = raw[self.fcz];
            for (c, r) in raw.iter().enumerate() {
                samples[c * n + i] = (r - reference) as f32;
            }
        }

        let seq = self.seq;
        self.seq += 1;
        let t0_ms = self.cursor * 1000 / rate;
        self.cursor += n as u64;
        Some(Ok(EegChunk {
            seq,
            t0_ms,
            n_channels: n_ch as u16,
            n_samples: n as u32,
            samples,
        }))
    }
}
