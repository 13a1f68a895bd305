//! 16-bit stereo PCM WAV output.

use std::io::{Cursor, Seek, Write};
use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use super::{Result, StimulusBuffer, StimulusError};

/// Decoded stereo audio scaled to `[-1, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StereoPcm {
    pub rate_hz: u32,
    pub left: Vec<f64>,
    pub right: Vec<f64>,
}

/// Scale by 32768, round half away from zero, clamp to the i16 range.
pub fn quantize(x: f64) -> i16 {
    (x * 32768.0).round().clamp(-32768.0, 32767.0) as i16
}

fn spec(rate_hz: u32) -> WavSpec {
    WavSpec {
        channels: 2,
        sample_rate: rate_hz,
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    }
}

fn encode<W: Write + Seek>(buffer: &StimulusBuffer, out: W) -> Result<()> {
    let mut w = WavWriter::new(out, spec(buffer.rate_hz))?;
    {
        let mut samples = w.get_i16_writer((2 * buffer.len()) as u32);
        for (l, r) in buffer.left.iter().zip(&buffer.right) {
            samples.write_sample(quantize(*l));
            samples.write_sample(quantize(*r));
        }
        samples.flush()?;
    }
    w.finalize()?;
    Ok(())
}

/// The exact bytes [`write_wav`] would produce.
pub fn wav_bytes(buffer: &StimulusBuffer) -> Result<Vec<u8>> {
    let mut cur = Cursor::new(Vec::new());
    encode(buffer, &mut cur)?;
    Ok(cur.into_inner())
}

pub fn write_wav(buffer: &StimulusBuffer, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, wav_bytes(buffer)?)?;
    Ok(())
}

/// Read 16-bit integer WAV (mono is duplicated to both channels).
pub fn read_wav(path: impl AsRef<Path>) -> Result<StereoPcm> {
    let mut r = WavReader::open(path.as_ref())?;
    let s = r.spec();
    if s.sample_format != SampleFormat::Int || s.bits_per_sample != 16 || !(1..=2).contains(&s.channels) {
        return Err(StimulusError::Unsupported(format!(
            "{}: need 16-bit PCM mono or stereo",
            path.as_ref().display()
        )));
    }
    let raw: Vec<i16> = r.samples::<i16>().collect::<std::result::Result<_, _>>()?;
    let to_f = |v: i16| f64::from(v) / 32768.0;
    let (left, right) = if s.channels == 2 {
        raw.chunks_exact(2).map(|p| (to_f(p[0]), to_f(p[1]))).unzip()
    } else {
        raw.iter().map(|&v| (to_f(v), to_f(v))).unzip()
    };
    Ok(StereoPcm {
        rate_hz: s.sample_rate,
        left,
        right,
    })
}
