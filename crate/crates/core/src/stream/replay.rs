//! Replay files: a two-line text header followed by little-endian `f32`
//! samples, channel-interleaved (all channels of sample 0, then sample 1, …).

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::thread;
use std::time::{Duration, Instant};

use log::warn;

use super::{EegChunk, Result, StreamError, StreamHeader};

/// How fast a replay emits chunks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Pacing {
    #[default]
    Unpaced,
    /// One chunk per wall-clock second.
    Realtime,
    /// One chunk per given interval.
    Every(Duration),
}

impl Pacing {
    fn interval(self) -> Option<Duration> {
        match self {
            Pacing::Unpaced => None,
            Pacing::Realtime => Some(Duration::from_secs(1)),
            Pacing::Every(d) => Some(d),
        }
    }
}

/// Iterator over the 1-second chunks of a replay file.
pub struct Replay {
    header: StreamHeader,
    reader: BufReader<File>,
    pacing: Pacing,
    started: Option<Instant>,
    next_seq: u64,
    full_chunks: u64,
    row: Vec<u8>,
}

/// Open a replay file and validate its header and payload size.
pub fn replay_file(path: impl AsRef<Path>, pacing: Pacing) -> Result<Replay> {
    let file = File::open(path.as_ref())?;
    let file_len = file.metadata()?.len();
    let mut reader = BufReader::new(file);

    let mut first = String::new();
    let mut names = String::new();
    let mut header_bytes = read_line(&mut reader, &mut first)?;
    header_bytes += read_line(&mut reader, &mut names)?;
    let header = StreamHeader::parse(first.trim_end(), names.trim_end())?;

    let n_ch = header.channels.len() as u64;
    let expected = header.n_samples * n_ch * 4;
    let found = file_len - header_bytes;
    if found < expected {
        return Err(StreamError::TruncatedPayload { expected, found });
    }
    if found > expected {
        warn!("{} trailing bytes after the declared payload are ignored", found - expected);
    }

    let rate = u64::from(header.rate_hz);
    let full_chunks = header.n_samples / rate;
    let leftover = header.n_samples % rate;
    if leftover > 0 {
        warn!(
            "final partial second ({leftover} of {rate} samples) is dropped from replay"
        );
    }

    let row = vec![0u8; header.rate_hz as usize * n_ch as usize * 4];
    Ok(Replay {
        header,
        reader,
        pacing,
        started: None,
        next_seq: 1,
        full_chunks,
        row,
    })
}

fn read_line(reader: &mut impl BufRead, out: &mut String) -> Result<u64> {
    // header lines are short; cap the read so a binary file cannot balloon memory
    let mut limited = reader.take(1 << 20);
    let n = limited.read_line(out).map_err(|e| match e.kind() {
        std::io::ErrorKind::InvalidData => StreamError::MalformedHeader("header is not UTF-8".into()),
        _ => StreamError::Io(e),
    })?;
    if n == 0 || !out.ends_with('\n') {
        return Err(StreamError::MalformedHeader("unterminated header line".into()));
    }
    Ok(n as u64)
}

impl Replay {
    pub fn header(&self) -> &StreamHeader {
        &self.header
    }

    /// Number of chunks the replay will yield.
    pub fn chunk_count(&self) -> u64 {
        self.full_chunks
    }
}

impl Iterator for Replay {
    type Item = Result<EegChunk>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.next_seq > self.full_chunks {
            return None;
        }
        if let Some(interval) = self.pacing.interval() {
            let start = *self.started.get_or_insert_with(Instant::now);
            let due = start + interval * (self.next_seq - 1) as u32;
            let now = Instant::now();
            if due > now {
                thread::sleep(due - now);
            }
        }
        if let Err(e) = self.reader.read_exact(&mut self.row) {
            self.next_seq = u64::MAX;
            return Some(Err(e.into()));
        }
        let n_ch = self.header.channels.len();
        let n = self.header.rate_hz as usize;
        let mut samples = vec![0f32; n_ch * n];
        for (t, frame) in self.row.chunks_exact(4 * n_ch).enumerate() {
            for (c, b) in frame.chunks_exact(4).enumerate() {
                samples[c * n + t] = f32::from_le_bytes(b.try_into().unwrap());
            }
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        Some(Ok(EegChunk {
            seq,
            t0_ms: (seq - 1) * 1000,
            n_channels: n_ch as u16,
            n_samples: n as u32,
            samples,
        }))
    }
}

/// Streaming writer for replay files. The header must declare the exact
/// number of samples that will be written.
pub struct ReplayWriter<W: Write> {
    out: W,
    n_channels: usize,
    remaining: u64,
}

impl ReplayWriter<BufWriter<File>> {
    pub fn create(path: impl AsRef<Path>, header: &StreamHeader) -> Result<Self> {
        Self::new(BufWriter::new(File::create(path)?), header)
    }
}

impl<W: Write> ReplayWriter<W> {
    pub fn new(mut out: W, header: &StreamHeader) -> Result<Self> {
        out.write_all(header.to_text().as_bytes())?;
        Ok(Self {
            out,
            n_channels: header.channels.len(),
            remaining: header.n_samples,
        })
    }

    pub fn write_chunk(&mut self, chunk: &EegChunk) -> Result<()> {
        chunk.validate()?;
        if usize::from(chunk.n_channels) != self.n_channels {
            return Err(StreamError::InvalidChunk(format!(
                "chunk has {} channels, file has {}",
                chunk.n_channels, self.n_channels
            )));
        }
        let n = chunk.n_samples as usize;
        if n as u64 > self.remaining {
            return Err(StreamError::InvalidChunk(
                "more samples than the header declares".into(),
            ));
        }
        let mut buf = Vec::with_capacity(n * self.n_channels * 4);
        for t in 0..n {
            for c in 0..self.n_channels {
                buf.extend_from_slice(&chunk.samples[c * n + t].to_le_bytes());
            }
        }
        self.out.write_all(&buf)?;
        self.remaining -= n as u64;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        if self.remaining != 0 {
            return Err(StreamError::InvalidChunk(format!(
                "{} declared samples were never written",
                self.remaining
            )));
        }
        self.out.flush()?;
        Ok(self.out)
    }
}

/// Write a whole chunk stream to a replay file.
pub fn write_replay_file<I>(path: impl AsRef<Path>, header: &StreamHeader, chunks: I) -> Result<()>
where
    I: IntoIterator<Item = Result<EegChunk>>,
{
    let mut writer = ReplayWriter::create(path, header)?;
    for chunk in chunks {
        writer.write_chunk(&chunk?)?;
    }
    writer.finish()?;
    Ok(())
}
