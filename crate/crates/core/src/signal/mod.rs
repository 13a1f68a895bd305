//! Deterministic EEG preprocessing: anti-aliased decimation, re-referencing,
//! bipolar Pz-Oz derivation and 30-second epoching.
//!
//! Every function here is pure; records are immutable once built and all
//! samples are microvolts stored as `f64`.

mod fir;

pub use fir::{decimate, decimate_record, kaiser_lowpass, Decimator, LowPassDesign};

use std::collections::HashSet;
use std::fmt;

use thiserror::Error;

/// Length of one staging epoch in seconds.
pub const EPOCH_SECONDS: u32 = 30;
/// Sampling rate the staging model consumes.
pub const STAGING_RATE_HZ: u32 = 100;
/// Samples in one epoch at [`STAGING_RATE_HZ`].
pub const EPOCH_SAMPLES: usize = (EPOCH_SECONDS * STAGING_RATE_HZ) as usize;
/// Name of the derived staging channel.
pub const PZ_OZ: &str = "Pz-Oz";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SignalError {
    #[error("sampling rate {rate_hz} Hz is not divisible by decimation factor {factor}")]
    NonIntegerRatio { rate_hz: u32, factor: u32 },
    #[error("decimation factor must be >= 1")]
    ZeroFactor,
    #[error("signal is empty")]
    EmptySignal,
    #[error("signal has {len} samples but the anti-alias filter needs at least {needed}")]
    TooShort { len: usize, needed: usize },
    #[error("unknown channel {name:?}; available: {}", available.join(", "))]
    UnknownChannel { name: String, available: Vec<String> },
    #[error("duplicate channel name {0:?}")]
    DuplicateChannel(String),
    #[error("channel {channel:?} has {len} samples, expected {expected}")]
    LengthMismatch { channel: String, len: usize, expected: usize },
    #[error("{0} contains non-finite samples")]
    NonFinite(String),
    #[error("sampling rate must be positive")]
    InvalidRate,
    #[error("epoch at {rate_hz} Hz must hold {expected} samples, got {len}")]
    EpochLength { rate_hz: u32, expected: usize, len: usize },
    #[error("expected a {expected} Hz signal, got {actual} Hz")]
    WrongRate { expected: u32, actual: u32 },
    #[error("record has {names} channel names but {series} sample series")]
    ShapeMismatch { names: usize, series: usize },
}

pub type Result<T> = std::result::Result<T, SignalError>;

/// The common reference a record's potentials are expressed against.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Reference {
    /// Unreferenced (amplifier-ground) potentials.
    Raw,
    Channel(String),
}

impl fmt::Display for Reference {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Reference::Raw => f.write_str("raw"),
            Reference::Channel(name) => f.write_str(name),
        }
    }
}

impl Reference {
    pub fn parse(s: &str) -> Self {
        if s.eq_ignore_ascii_case("raw") {
            Reference::Raw
        } else {
            Reference::Channel(s.to_string())
        }
    }
}

/// Labeled multichannel EEG in microvolts.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiChannelRecord {
    channels: Vec<String>,
    samples: Vec<Vec<f64>>,
    rate_hz: u32,
    reference: Reference,
}

impl MultiChannelRecord {
    pub fn new(
        channels: Vec<String>,
        samples: Vec<Vec<f64>>,
        rate_hz: u32,
        reference: Reference,
    ) -> Result<Self> {
        if rate_hz == 0 {
            return Err(SignalError::InvalidRate);
        }
        if channels.len() != samples.len() {
            return Err(SignalError::ShapeMismatch {
                names: channels.len(),
                series: samples.len(),
            });
        }
        let mut seen = HashSet::with_capacity(channels.len());
        for name in &channels {
            if !seen.insert(name.as_str()) {
                return Err(SignalError::DuplicateChannel(name.clone()));
            }
        }
        if let Some(first) = samples.first() {
            let expected = first.len();
            for (name, series) in channels.iter().zip(&samples) {
                if series.len() != expected {
                    return Err(SignalError::LengthMismatch {
                        channel: name.clone(),
                        len: series.len(),
                        expected,
                    });
                }
            }
        }
        if let Reference::Channel(r) = &reference {
            if !seen.contains(r.as_str()) {
                return Err(SignalError::UnknownChannel {
                    name: r.clone(),
                    available: channels,
                });
            }
        }
        Ok(Self {
            channels,
            samples,
            rate_hz,
            reference,
        })
    }

    pub fn channels(&self) -> &[String] {
        &self.channels
    }

    pub fn samples(&self) -> &[Vec<f64>] {
        &self.samples
    }

    pub fn rate_hz(&self) -> u32 {
        self.rate_hz
    }

    pub fn reference(&self) -> &Reference {
        &self.reference
    }

    /// Samples per channel.
    pub fn len(&self) -> usize {
        self.samples.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn channel_index(&self, name: &str) -> Result<usize> {
        self.channels
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| SignalError::UnknownChannel {
                name: name.to_string(),
                available: self.channels.clone(),
            })
    }

    pub fn channel(&self, name: &str) -> Result<&[f64]> {
        Ok(&self.samples[self.channel_index(name)?])
    }

    pub fn into_parts(self) -> (Vec<String>, Vec<Vec<f64>>, u32, Reference) {
        (self.channels, self.samples, self.rate_hz, self.reference)
    }
}

/// One derived channel (e.g. Pz-Oz).
#[derive(Debug, Clone, PartialEq)]
pub struct SingleChannelSignal {
    name: String,
    samples: Vec<f64>,
    rate_hz: u32,
}

impl SingleChannelSignal {
    pub fn new(name: impl Into<String>, samples: Vec<f64>, rate_hz: u32) -> Result<Self> {
        let name = name.into();
        if rate_hz == 0 {
            return Err(SignalError::InvalidRate);
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(SignalError::NonFinite(name));
        }
        Ok(Self {
            name,
            samples,
            rate_hz,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn rate_hz(&self) -> u32 {
        self.rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }
}

/// A 30-second single-channel window, the unit of sleep staging.
#[derive(Debug, Clone, PartialEq)]
pub struct Epoch {
    index: usize,
    samples: Vec<f64>,
    rate_hz: u32,
}

impl Epoch {
    pub fn new(index: usize, samples: Vec<f64>, rate_hz: u32) -> Result<Self> {
        if rate_hz == 0 {
            return Err(SignalError::InvalidRate);
        }
        let expected = (rate_hz * EPOCH_SECONDS) as usize;
        if samples.len() != expected {
            return Err(SignalError::EpochLength {
                rate_hz,
                expected,
                len: samples.len(),
            });
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(SignalError::NonFinite(format!("epoch {index}")));
        }
        Ok(Self {
            index,
            samples,
            rate_hz,
        })
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn rate_hz(&self) -> u32 {
        self.rate_hz
    }

    pub fn with_index(mut self, index: usize) -> Self {
        self.index = index;
        self
    }
}

/// Subtract `new_ref` from every channel. The target channel becomes zero.
pub fn rereference(record: &MultiChannelRecord, new_ref: &str) -> Result<MultiChannelRecord> {
    let ref_idx = record.channel_index(new_ref)?;
    let reference = &record.samples[ref_idx];
    let samples = record
        .samples
        .iter()
        .enumerate()
        .map(|(i, series)| {
            if i == ref_idx {
                vec![0.0; series.len()]
            } else {
                series.iter().zip(reference).map(|(x, r)| x - r).collect()
            }
        })
        .collect();
    Ok(MultiChannelRecord {
        channels: record.channels.clone(),
        samples,
        rate_hz: record.rate_hz,
        reference: Reference::Channel(new_ref.to_string()),
    })
}

/// Bipolar Pz − Oz derivation. Any common reference cancels.
pub fn derive_pz_oz(record: &MultiChannelRecord) -> Result<SingleChannelSignal> {
    let pz = record.channel("Pz")?;
    let oz = record.channel("Oz")?;
    let samples = pz.iter().zip(oz).map(|(p, o)| p - o).collect();
    SingleChannelSignal::new(PZ_OZ, samples, record.rate_hz)
}

/// Split a 100 Hz signal into consecutive non-overlapping 30 s epochs.
/// The trailing partial window is dropped.
pub fn epoch_split(signal: &SingleChannelSignal) -> Result<Vec<Epoch>> {
    if signal.rate_hz != STAGING_RATE_HZ {
        return Err(SignalError::WrongRate {
            expected: STAGING_RATE_HZ,
            actual: signal.rate_hz,
        });
    }
    Ok(signal
        .samples
        .chunks_exact(EPOCH_SAMPLES)
        .enumerate()
        .map(|(index, window)| Epoch {
            index,
            samples: window.to_vec(),
            rate_hz: STAGING_RATE_HZ,
        })
        .collect())
}

/// Staging front end for one raw window: re-reference to Pz, take
/// Pz-Oz, decimate to 100 Hz.
pub fn preprocess(record: &MultiChannelRecord) -> Result<SingleChannelSignal> {
    let factor = record.rate_hz / STAGING_RATE_HZ;
    if factor == 0 || record.rate_hz % STAGING_RATE_HZ != 0 {
        return Err(SignalError::NonIntegerRatio {
            rate_hz: record.rate_hz,
            factor: factor.max(1),
        });
    }
    let referenced = rereference(record, "Pz")?;
    let bipolar = derive_pz_oz(&referenced)?;
    if factor == 1 {
        return Ok(bipolar);
    }
    decimate(&bipolar, factor)
}
