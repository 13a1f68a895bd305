//! The five auditory stimuli, rendered to 44.1 kHz stereo buffers.

mod wav;

pub use wav::{quantize, read_wav, wav_bytes, write_wav, StereoPcm};

use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const AUDIO_RATE_HZ: u32 = 44_100;

/// Beep carrier and schedule.
pub const BEEP_HZ: f64 = 512.0;
pub const BEEP_PERIOD_S: f64 = 5.0;
pub const BEEP_ON_S: f64 = 2.0;
pub const RAMP_S: f64 = 0.010;

/// Binaural carriers, left and right ear.
pub const BINAURAL_HZ: (f64, f64) = (250.0, 256.0);

const RAIN_CUTOFF_HZ: f64 = 1000.0;
const DROPS_PER_S: f64 = 12.0;
const DROP_DECAY_S: f64 = 0.004;

#[derive(Debug, Error)]
pub enum StimulusError {
    #[error("duration must be positive and finite, got {0}")]
    BadDuration(f64),
    #[error("gain {0} dBFS is not representable (must be finite and at most 0)")]
    BadGain(f64),
    #[error("no calibration given: measure the dB SPL your device produces at 0 dBFS and set `calibration_db_spl`")]
    MissingCalibration,
    #[error("rain asset {0:?} not found and the synthetic fallback is disabled")]
    RainMissing(Option<PathBuf>),
    #[error("unknown stimulus kind {0:?}")]
    UnknownKind(String),
    #[error("unsupported audio file: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Wav(#[from] hound::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, StimulusError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StimulusKind {
    Sham,
    RepetitiveBeep,
    BinauralBeat,
    WhiteNoise,
    RainSound,
}

impl StimulusKind {
    pub const ALL: [StimulusKind; 5] = [
        StimulusKind::Sham,
        StimulusKind::RepetitiveBeep,
        StimulusKind::BinauralBeat,
        StimulusKind::WhiteNoise,
        StimulusKind::RainSound,
    ];

    pub fn short_name(self) -> &'static str {
        match self {
            StimulusKind::Sham => "sham",
            StimulusKind::RepetitiveBeep => "rb",
            StimulusKind::BinauralBeat => "bb",
            StimulusKind::WhiteNoise => "wn",
            StimulusKind::RainSound => "rs",
        }
    }
}

impl fmt::Display for StimulusKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StimulusKind::Sham => "Sham",
            StimulusKind::RepetitiveBeep => "RepetitiveBeep",
            StimulusKind::BinauralBeat => "BinauralBeat",
            StimulusKind::WhiteNoise => "WhiteNoise",
            StimulusKind::RainSound => "RainSound",
        })
    }
}

impl FromStr for StimulusKind {
    type Err = StimulusError;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        Ok(match key.as_str() {
            "sham" | "silence" => StimulusKind::Sham,
            "rb" | "beep" | "repetitivebeep" => StimulusKind::RepetitiveBeep,
            "bb" | "binaural" | "binauralbeat" => StimulusKind::BinauralBeat,
            "wn" | "whitenoise" | "noise" => StimulusKind::WhiteNoise,
            "rs" | "rain" | "rainsound" => StimulusKind::RainSound,
            _ => return Err(StimulusError::UnknownKind(s.to_string())),
        })
    }
}

/// Rendered stereo audio. Both channels have equal length and
/// `|sample| ≤ 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct StimulusBuffer {
    pub kind: StimulusKind,
    pub rate_hz: u32,
    pub left: Vec<f64>,
    pub right: Vec<f64>,
    pub duration_s: f64,
    pub gain_dbfs: f64,
    /// Set when a rain buffer came from the synthetic fallback.
    pub synthetic_rain: bool,
}

impl StimulusBuffer {
    pub fn len(&self) -> usize {
        self.left.len()
    }

    pub fn is_empty(&self) -> bool {
        self.left.is_empty()
    }

    pub fn peak(&self) -> f64 {
        self.left
            .iter()
            .chain(&self.right)
            .fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn rms(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        let ss: f64 = self.left.iter().chain(&self.right).map(|x| x * x).sum();
        (ss / (2 * self.len()) as f64).sqrt()
    }
}

/// Where rain comes from.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SynthOptions {
    pub rain_file: Option<PathBuf>,
    /// Refuse to synthesize rain when the asset is missing.
    pub no_rain_fallback: bool,
}

/// `10^(dB/20)`.
pub fn db_to_amplitude(db: f64) -> f64 {
    10f64.powf(db / 20.0)
}

/// Convert a target loudness into a digital gain using the device
/// calibration (dB SPL produced by a 0 dBFS signal). Gains above 0 dBFS are
/// clamped with a warning.
pub fn db_target_to_gain(target_db_spl: f64, calibration_db_spl: Option<f64>) -> Result<f64> {
    let cal = calibration_db_spl.ok_or(StimulusError::MissingCalibration)?;
    if !cal.is_finite() || !target_db_spl.is_finite() {
        return Err(StimulusError::BadGain(target_db_spl - cal));
    }
    if !(40.0..=45.0).contains(&target_db_spl) {
        warn!("target {target_db_spl} dB SPL is outside the 40-45 dB playback range");
    }
    let gain = target_db_spl - cal;
    if gain > 0.0 {
        warn!("target {target_db_spl} dB SPL needs {gain:+.1} dBFS; clamping to 0 dBFS");
        return Ok(0.0);
    }
    Ok(gain)
}

fn sample_count(duration_s: f64) -> Result<usize> {
    if !(duration_s.is_finite() && duration_s > 0.0) {
        return Err(StimulusError::BadDuration(duration_s));
    }
    Ok((duration_s * f64::from(AUDIO_RATE_HZ)).round() as usize)
}

fn sine(freq: f64, n: usize) -> Vec<f64> {
    let w = 2.0 * PI * freq / f64::from(AUDIO_RATE_HZ);
    (0..n).map(|i| (w * i as f64).sin()).collect()
}

/// On/off envelope of the beep train: raised-cosine ramps lie inside each
/// on-window, so the signal is exactly zero outside `[5k, 5k + 2)` s.
pub fn beep_envelope(n: usize) -> Vec<f64> {
    let rate = f64::from(AUDIO_RATE_HZ);
    let period = (BEEP_PERIOD_S * rate).round() as usize;
    let on = (BEEP_ON_S * rate).round() as usize;
    let ramp = (RAMP_S * rate).round() as usize;
    (0..n)
        .map(|i| {
            let w = i % period;
            if w >= on {
                0.0
            } else if w < ramp {
                0.5 - 0.5 * (PI * w as f64 / ramp as f64).cos()
            } else if on - w < ramp {
                0.5 - 0.5 * (PI * (on - w) as f64 / ramp as f64).cos()
            } else {
                1.0
            }
        })
        .collect()
}

fn gaussian(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

fn synthetic_rain(n: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rate = f64::from(AUDIO_RATE_HZ);
    let a = (-2.0 * PI * RAIN_CUTOFF_HZ / rate).exp();
    let lowpass = |x: Vec<f64>| -> Vec<f64> {
        let mut y = 0.0;
        x.into_iter()
            .map(|v| {
                y = (1.0 - a) * v + a * y;
                y
            })
            .collect()
    };
    let mut left = lowpass(gaussian(&mut rng, n));
    let mut right = lowpass(gaussian(&mut rng, n));
    let n_drops = (n as f64 / rate * DROPS_PER_S).round() as usize;
    let decay = (DROP_DECAY_S * rate).round() as usize;
    for _ in 0..n_drops {
        let at = rng.random_range(0..n);
        let amp: f64 = rng.random_range(0.05..0.4);
        let pan: f64 = rng.random();
        for k in 0..(6 * decay).min(n - at) {
            let burst: f64 = rng.sample::<f64, _>(StandardNormal) * amp * (-(k as f64) / decay as f64).exp();
            left[at + k] += burst * (1.0 - pan);
            right[at + k] += burst * pan;
        }
    }
    (left, right)
}

fn rain_from_file(path: &Path, n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let pcm = read_wav(path)?;
    if pcm.rate_hz != AUDIO_RATE_HZ {
        return Err(StimulusError::Unsupported(format!(
            "{}: {} Hz, expected {AUDIO_RATE_HZ} Hz",
            path.display(),
            pcm.rate_hz
        )));
    }
    if pcm.left.is_empty() {
        return Err(StimulusError::Unsupported(format!("{}: no samples", path.display())));
    }
    // loop the asset to the requested length
    let take = |ch: &[f64]| (0..n).map(|i| ch[i % ch.len()]).collect();
    Ok((take(&pcm.left), take(&pcm.right)))
}

/// Render with default options (synthetic rain fallback enabled).
pub fn synth(kind: StimulusKind, duration_s: f64, seed: u64, gain_dbfs: f64) -> Result<StimulusBuffer> {
    synth_with(kind, duration_s, seed, gain_dbfs, &SynthOptions::default())
}

/// Render `kind` and peak-normalize it to `gain_dbfs`. Deterministic given
/// the arguments (and the rain file contents).
pub fn synth_with(
    kind: StimulusKind,
    duration_s: f64,
    seed: u64,
    gain_dbfs: f64,
    options: &SynthOptions,
) -> Result<StimulusBuffer> {
    if !gain_dbfs.is_finite() || gain_dbfs > 0.0 {
        return Err(StimulusError::BadGain(gain_dbfs));
    }
    let n = sample_count(duration_s)?;
    let mut synthetic_rain_used = false;
    let (left, right) = match kind {
        StimulusKind::Sham => (vec![0.0; n], vec![0.0; n]),
        StimulusKind::RepetitiveBeep => {
            let tone: Vec<f64> = sine(BEEP_HZ, n)
                .iter()
                .zip(beep_envelope(n))
                .map(|(s, e)| s * e)
                .collect();
            (tone.clone(), tone)
        }
        StimulusKind::BinauralBeat => (sine(BINAURAL_HZ.0, n), sine(BINAURAL_HZ.1, n)),
        StimulusKind::WhiteNoise => {
            let noise = gaussian(&mut ChaCha8Rng::seed_from_u64(seed), n);
            (noise.clone(), noise)
        }
        StimulusKind::RainSound => match options.rain_file.as_deref().filter(|p| p.exists()) {
            Some(path) => rain_from_file(path, n)?,
            None if options.no_rain_fallback => {
                return Err(StimulusError::RainMissing(options.rain_file.clone()))
            }
            None => {
                if let Some(p) = &options.rain_file {
                    warn!("rain asset {} not found; using synthetic rain", p.display());
                }
                synthetic_rain_used = true;
                synthetic_rain(n, seed)
            }
        },
    };
    let mut buf = StimulusBuffer {
        kind,
        rate_hz: AUDIO_RATE_HZ,
        left,
        right,
        duration_s,
        gain_dbfs,
        synthetic_rain: synthetic_rain_used,
    };
    let peak = buf.peak();
    if peak > 0.0 {
        let scale = db_to_amplitude(gain_dbfs) / peak;
        buf.left.iter_mut().chain(buf.right.iter_mut()).for_each(|x| {
            *x = (*x * scale).clamp(-1.0, 1.0);
        });
    }
    Ok(buf)
}
