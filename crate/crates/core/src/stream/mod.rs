//! EEG ingestion: replay files, the stage-scripted synthetic generator and
//! the framed wire protocol.
//!
//! Every source yields 1-second [`EegChunk`]s numbered from `seq = 1`; the
//! stream header travels separately (file preamble or `seq = 0` hello frame).

mod frame;
mod net;
mod replay;
mod synth;

pub use frame::{
    decode_frame, encode_chunk, encode_hello, Frame, FrameError, FrameReader, FrameScanner,
    FRAME_MAGIC, MAX_PAYLOAD,
};
pub use net::{serve, spawn_producer, ChunkQueue, SeqChecker, StreamClient};
pub use replay::{replay_file, write_replay_file, Pacing, Replay, ReplayWriter};
pub use synth::{synth_eeg, synth_eeg_with, StageScript, SynthEeg, SynthParams};

use std::io;

use thiserror::Error;

use crate::signal::{MultiChannelRecord, Reference, SignalError};

/// Magic tag opening replay-file headers.
pub const FILE_MAGIC: &str = "SOMNO1";

/// Acquisition rate of the synthetic generator.
pub const ACQ_RATE_HZ: u32 = 1000;

/// The 64-electrode 10-10 montage. `FCz` is the recording reference and is
/// carried as an explicit (all-zero when FCz-referenced) channel.
pub const MONTAGE_64: [&str; 64] = [
    "Fp1", "Fp2", "AF7", "AF3", "AFz", "AF4", "AF8", "F7", "F5", "F3", "F1", "Fz", "F2", "F4",
    "F6", "F8", "FT7", "FC5", "FC3", "FC1", "FCz", "FC2", "FC4", "FC6", "FT8", "T7", "C5", "C3",
    "C1", "Cz", "C2", "C4", "C6", "T8", "TP7", "CP5", "CP3", "CP1", "CPz", "CP2", "CP4", "CP6",
    "TP8", "P7", "P5", "P3", "P1", "Pz", "P2", "P4", "P6", "P8", "PO7", "PO3", "POz", "PO4",
    "PO8", "O1", "Oz", "O2", "FT9", "FT10", "TP9", "TP10",
];

pub fn montage_64() -> Vec<String> {
    MONTAGE_64.iter().map(|s| s.to_string()).collect()
}

#[derive(Debug, Error)]
pub enum StreamError {
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("header declares {declared} channels but the name line lists {found}")]
    ChannelCountMismatch { declared: usize, found: usize },
    #[error("truncated payload: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: u64, found: u64 },
    #[error("invalid chunk: {0}")]
    InvalidChunk(String),
    #[error("invalid stage script: {0}")]
    InvalidScript(String),
    #[error("stage script is empty")]
    EmptyScript,
    #[error("sequence gap: expected seq {expected}, received {received}")]
    SeqGap { expected: u64, received: u64 },
    #[error("stream ended before the hello frame")]
    MissingHello,
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, StreamError>;

/// Stream metadata shared by replay files and the hello frame.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamHeader {
    pub rate_hz: u32,
    pub channels: Vec<String>,
    pub reference: Reference,
    /// Samples per channel in the whole stream.
    pub n_samples: u64,
}

impl StreamHeader {
    /// `SOMNO1 <rate> <n_channels> <n_samples> <reference>\n<names…>\n`
    pub fn to_text(&self) -> String {
        format!(
            "{FILE_MAGIC} {} {} {} {}\n{}\n",
            self.rate_hz,
            self.channels.len(),
            self.n_samples,
            self.reference,
            self.channels.join(" ")
        )
    }

    /// Parse the two header lines (without trailing newlines).
    pub fn parse(first: &str, names: &str) -> Result<Self> {
        let fields: Vec<&str> = first.split_whitespace().collect();
        if fields.len() != 5 {
            return Err(StreamError::MalformedHeader(format!(
                "expected 5 fields, got {}",
                fields.len()
            )));
        }
        if fields[0] != FILE_MAGIC {
            return Err(StreamError::MalformedHeader(format!(
                "bad magic {:?}",
                fields[0]
            )));
        }
        let num = |i: usize, what: &str| -> Result<u64> {
            fields[i]
                .parse::<u64>()
                .map_err(|_| StreamError::MalformedHeader(format!("bad {what} {:?}", fields[i])))
        };
        let rate_hz = num(1, "rate")?;
        let declared = num(2, "channel count")? as usize;
        let n_samples = num(3, "sample count")?;
        if rate_hz == 0 || rate_hz > u64::from(u32::MAX) {
            return Err(StreamError::MalformedHeader(format!("bad rate {rate_hz}")));
        }
        if declared == 0 || declared > usize::from(u16::MAX) {
            return Err(StreamError::MalformedHeader(format!(
                "bad channel count {declared}"
            )));
        }
        let channels: Vec<String> = names.split_whitespace().map(str::to_string).collect();
        if channels.len() != declared {
            return Err(StreamError::ChannelCountMismatch {
                declared,
                found: channels.len(),
            });
        }
        let reference = Reference::parse(fields[4]);
        if let Reference::Channel(r) = &reference {
            if !channels.contains(r) {
                return Err(StreamError::MalformedHeader(format!(
                    "reference {r:?} is not a listed channel"
                )));
            }
        }
        Ok(Self {
            rate_hz: rate_hz as u32,
            channels,
            reference,
            n_samples,
        })
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let first = lines
            .next()
            .ok_or_else(|| StreamError::MalformedHeader("missing header line".into()))?;
        let names = lines
            .next()
            .ok_or_else(|| StreamError::MalformedHeader("missing channel-name line".into()))?;
        Self::parse(first, names)
    }
}

/// One transport unit: `n_channels × n_samples` microvolt values,
/// channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct EegChunk {
    pub seq: u64,
    pub t0_ms: u64,
    pub n_channels: u16,
    pub n_samples: u32,
    pub samples: Vec<f32>,
}

impl EegChunk {
    pub fn new(seq: u64, t0_ms: u64, n_channels: u16, n_samples: u32, samples: Vec<f32>) -> Result<Self> {
        let chunk = Self {
            seq,
            t0_ms,
            n_channels,
            n_samples,
            samples,
        };
        chunk.validate()?;
        Ok(chunk)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_channels == 0 {
            return Err(StreamError::InvalidChunk("zero channels".into()));
        }
        if self.n_samples == 0 {
            return Err(StreamError::InvalidChunk("zero samples".into()));
        }
        let expected = usize::from(self.n_channels) * self.n_samples as usize;
        if self.samples.len() != expected {
            return Err(StreamError::InvalidChunk(format!(
                "{} values for {}×{}",
                self.samples.len(),
                self.n_channels,
                self.n_samples
            )));
        }
        Ok(())
    }

    pub fn channel(&self, c: usize) -> &[f32] {
        let n = self.n_samples as usize;
        &self.samples[c * n..(c + 1) * n]
    }
}

/// Concatenate chunks into a record, widening to `f64`.
pub fn chunks_to_record(header: &StreamHeader, chunks: &[EegChunk]) -> Result<MultiChannelRecord> {
    let n_ch = header.channels.len();
    let total: usize = chunks.iter().map(|c| c.n_samples as usize).sum();
    let mut samples = vec![Vec::with_capacity(total); n_ch];
    for chunk in chunks {
        if usize::from(chunk.n_channels) != n_ch {
            return Err(StreamError::InvalidChunk(format!(
                "chunk {} has {} channels, stream has {n_ch}",
                chunk.seq, chunk.n_channels
            )));
        }
        for (c, series) in samples.iter_mut().enumerate() {
            series.extend(chunk.channel(c).iter().map(|&x| f64::from(x)));
        }
    }
    Ok(MultiChannelRecord::new(
        header.channels.clone(),
        samples,
        header.rate_hz,
        header.reference.clone(),
    )?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn montage_has_unique_names_and_key_channels() {
        let mut names = MONTAGE_64.to_vec();
        names.sort_unstable();
        names.dedup();
        assert_eq!(names.len(), 64);
        for key in ["Pz", "Oz", "FCz"] {
            assert!(MONTAGE_64.contains(&key));
        }
    }

    #[test]
    fn header_roundtrip_and_errors() {
        let h = StreamHeader {
            rate_hz: 1000,
            channels: vec!["Pz".into(), "Oz".into(), "FCz".into()],
            reference: Reference::Channel("FCz".into()),
            n_samples: 42,
        };
        assert_eq!(StreamHeader::from_text(&h.to_text()).unwrap(), h);

        assert!(matches!(
            StreamHeader::parse("SOMNO1 1000 3 42 FCz", "Pz Oz"),
            Err(StreamError::ChannelCountMismatch {
                declared: 3,
                found: 2
            })
        ));
        assert!(matches!(
            StreamHeader::parse("SOMNO2 1000 1 42 raw", "Pz"),
            Err(StreamError::MalformedHeader(_))
        ));
        assert!(matches!(
            StreamHeader::parse("SOMNO1 x 1 42 raw", "Pz"),
            Err(StreamError::MalformedHeader(_))
        ));
        assert!(matches!(
            StreamHeader::parse("SOMNO1 1000 1 42 Cz", "Pz"),
            Err(StreamError::MalformedHeader(_))
        ));
    }

    #[test]
    fn chunk_validation() {
        assert!(EegChunk::new(1, 0, 0, 10, vec![]).is_err());
        assert!(EegChunk::new(1, 0, 2, 3, vec![0.0; 5]).is_err());
        let c = EegChunk::new(1, 0, 2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!(c.channel(1), &[4.0, 5.0, 6.0]);
    }
}
