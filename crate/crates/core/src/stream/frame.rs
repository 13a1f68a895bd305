//! Wire framing.
//!
//! ```text
//! "SOM1" | u32 LE payload length | payload | u32 LE CRC-32(payload)
//! data payload:  u64 seq | u64 t0_ms | u16 n_channels | u32 n_samples | f32 LE × n
//! hello payload: u64 0   | UTF-8 stream header text
//! ```

use std::io::Read;

use thiserror::Error;

use super::{EegChunk, StreamError, StreamHeader};

pub const FRAME_MAGIC: [u8; 4] = *b"SOM1";
/// Upper bound on a declared payload length.
pub const MAX_PAYLOAD: usize = 64 << 20;

const PREFIX: usize = 8;
const TRAILER: usize = 4;
const DATA_HEAD: usize = 8 + 8 + 2 + 4;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FrameError {
    #[error("bad frame magic")]
    BadMagic,
    #[error("CRC mismatch: frame says {expected:#010x}, payload hashes to {actual:#010x}")]
    CrcMismatch { expected: u32, actual: u32 },
    #[error("declared payload length {len} exceeds limit {max}")]
    LengthOverflow { len: usize, max: usize },
    #[error("malformed payload: {0}")]
    Malformed(String),
    #[error("incomplete frame: need {needed} bytes")]
    Incomplete { needed: usize },
    #[error("cannot encode chunk: {0}")]
    InvalidChunk(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Frame {
    Hello(StreamHeader),
    Data(EegChunk),
}

fn wrap(payload: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(PREFIX + payload.len() + TRAILER);
    out.extend_from_slice(&FRAME_MAGIC);
    out.extend_from_slice(&(payload.len() as u32).to_le_bytes());
    out.extend_from_slice(payload);
    out.extend_from_slice(&crc32fast::hash(payload).to_le_bytes());
    out
}

pub fn encode_chunk(chunk: &EegChunk) -> Result<Vec<u8>, FrameError> {
    chunk
        .validate()
        .map_err(|e| FrameError::InvalidChunk(e.to_string()))?;
    if chunk.seq == 0 {
        return Err(FrameError::InvalidChunk("seq 0 is reserved for hello".into()));
    }
    let len = DATA_HEAD + 4 * chunk.samples.len();
    if len > MAX_PAYLOAD {
        return Err(FrameError::LengthOverflow {
            len,
            max: MAX_PAYLOAD,
        });
    }
    let mut payload = Vec::with_capacity(len);
    payload.extend_from_slice(&chunk.seq.to_le_bytes());
    payload.extend_from_slice(&chunk.t0_ms.to_le_bytes());
    payload.extend_from_slice(&chunk.n_channels.to_le_bytes());
    payload.extend_from_slice(&chunk.n_samples.to_le_bytes());
    for x in &chunk.samples {
        payload.extend_from_slice(&x.to_le_bytes());
    }
    Ok(wrap(&payload))
}

pub fn encode_hello(header: &StreamHeader) -> Vec<u8> {
    let text = header.to_text();
    let mut payload = Vec::with_capacity(8 + text.len());
    payload.extend_from_slice(&0u64.to_le_bytes());
    payload.extend_from_slice(text.as_bytes());
    wrap(&payload)
}

fn le_u64(b: &[u8]) -> u64 {
    u64::from_le_bytes(b[..8].try_into().unwrap())
}

fn le_u32(b: &[u8]) -> u32 {
    u32::from_le_bytes(b[..4].try_into().unwrap())
}

fn parse_payload(payload: &[u8]) -> Result<Frame, FrameError> {
    if payload.len() < 8 {
        return Err(FrameError::Malformed("payload shorter than seq".into()));
    }
    let seq = le_u64(payload);
    if seq == 0 {
        let text = std::str::from_utf8(&payload[8..])
            .map_err(|_| FrameError::Malformed("hello header is not UTF-8".into()))?;
        let header = StreamHeader::from_text(text).map_err(|e| match e {
            StreamError::MalformedHeader(m) => FrameError::Malformed(m),
            other => FrameError::Malformed(other.to_string()),
        })?;
        return Ok(Frame::Hello(header));
    }
    if payload.len() < DATA_HEAD {
        return Err(FrameError::Malformed("data payload shorter than header".into()));
    }
    let t0_ms = le_u64(&payload[8..]);
    let n_channels = u16::from_le_bytes([payload[16], payload[17]]);
    let n_samples = le_u32(&payload[18..]);
    let count = usize::from(n_channels) * n_samples as usize;
    if count == 0 {
        return Err(FrameError::Malformed("empty chunk".into()));
    }
    let body = &payload[DATA_HEAD..];
    if body.len() != 4 * count {
        return Err(FrameError::Malformed(format!(
            "{} sample bytes for {n_channels}×{n_samples}",
            body.len()
        )));
    }
    let samples = body
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
        .collect();
    Ok(Frame::Data(EegChunk {
        seq,
        t0_ms,
        n_channels,
        n_samples,
        samples,
    }))
}

/// Decode one frame at the start of `buf`. Returns the frame and the number
/// of bytes it occupied. Never reads past the declared frame length.
pub fn decode_frame(buf: &[u8]) -> Result<(Frame, usize), FrameError> {
    if buf.len() < FRAME_MAGIC.len() {
        if FRAME_MAGIC.starts_with(buf) {
            return Err(FrameError::Incomplete { needed: PREFIX });
        }
        return Err(FrameError::BadMagic);
    }
    if buf[..4] != FRAME_MAGIC {
        return Err(FrameError::BadMagic);
    }
    if buf.len() < PREFIX {
        return Err(FrameError::Incomplete { needed: PREFIX });
    }
    let len = le_u32(&buf[4..]) as usize;
    if len > MAX_PAYLOAD {
        return Err(FrameError::LengthOverflow {
            len,
            max: MAX_PAYLOAD,
        });
    }
    let total = PREFIX + len + TRAILER;
    if buf.len() < total {
        return Err(FrameError::Incomplete { needed: total });
    }
    let payload = &buf[PREFIX..PREFIX + len];
    let expected = le_u32(&buf[PREFIX + len..]);
    let actual = crc32fast::hash(payload);
    if expected != actual {
        return Err(FrameError::CrcMismatch { expected, actual });
    }
    Ok((parse_payload(payload)?, total))
}

/// Incremental decoder that resynchronizes on the next magic after any
/// damaged frame. A rejected frame only advances the cursor one byte past its
/// magic, so frames embedded in the damaged region are still found.
#[derive(Debug, Default)]
pub struct FrameScanner {
    buf: Vec<u8>,
    pos: usize,
    skipped: u64,
    closed: bool,
}

impl FrameScanner {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, bytes: &[u8]) {
        if self.pos > 0 && self.pos * 2 >= self.buf.len() {
            self.buf.drain(..self.pos);
            self.pos = 0;
        }
        self.buf.extend_from_slice(bytes);
    }

    /// Mark end of input: a frame still waiting for bytes is now reported as
    /// incomplete and scanning resumes one byte past its magic.
    pub fn close(&mut self) {
        self.closed = true;
    }

    /// Bytes discarded while hunting for a magic.
    pub fn skipped_bytes(&self) -> u64 {
        self.skipped
    }

    /// Bytes buffered but not yet consumed.
    pub fn pending(&self) -> usize {
        self.buf.len() - self.pos
    }

    /// Next complete frame or error, or `None` when more input is needed.
    pub fn next_frame(&mut self) -> Option<Result<Frame, FrameError>> {
        loop {
            let window = &self.buf[self.pos..];
            let found = window.windows(4).position(|w| w == FRAME_MAGIC);
            match found {
                Some(offset) => {
                    self.pos += offset;
                    self.skipped += offset as u64;
                }
                None => {
                    // keep a possible partial magic at the tail
                    let keep = window.len().min(3);
                    let drop = window.len() - keep;
                    let tail = &window[drop..];
                    let partial = (1..=tail.len())
                        .rev()
                        .find(|&k| FRAME_MAGIC.starts_with(&tail[tail.len() - k..]))
                        .unwrap_or(0);
                    let advance = window.len() - partial;
                    self.pos += advance;
                    self.skipped += advance as u64;
                    return None;
                }
            }
            match decode_frame(&self.buf[self.pos..]) {
                Ok((frame, used)) => {
                    self.pos += used;
                    return Some(Ok(frame));
                }
                Err(e @ FrameError::Incomplete { .. }) => {
                    if !self.closed {
                        return None;
                    }
                    self.pos += 1;
                    self.skipped += 1;
                    return Some(Err(e));
                }
                Err(FrameError::BadMagic) => {
                    self.pos += 1;
                    self.skipped += 1;
                    continue;
                }
                Err(e) => {
                    self.pos += 1;
                    self.skipped += 1;
                    return Some(Err(e));
                }
            }
        }
    }

    /// Drain every frame currently decodable.
    pub fn drain(&mut self) -> Vec<Result<Frame, FrameError>> {
        std::iter::from_fn(|| self.next_frame()).collect()
    }
}

/// Blocking frame iterator over any byte source.
pub struct FrameReader<R> {
    inner: R,
    scanner: FrameScanner,
    eof: bool,
    buf: Box<[u8]>,
}

impl<R: Read> FrameReader<R> {
    pub fn new(inner: R) -> Self {
        Self {
            inner,
            scanner: FrameScanner::new(),
            eof: false,
            buf: vec![0u8; 64 * 1024].into_boxed_slice(),
        }
    }

    pub fn scanner(&self) -> &FrameScanner {
        &self.scanner
    }
}

impl<R: Read> Iterator for FrameReader<R> {
    type Item = Result<Frame, StreamError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            if let Some(item) = self.scanner.next_frame() {
                return Some(item.map_err(StreamError::from));
            }
            if self.eof {
                return None;
            }
            match self.inner.read(&mut self.buf) {
                Ok(0) => {
                    self.eof = true;
                    self.scanner.close();
                }
                Ok(n) => self.scanner.push(&self.buf[..n]),
                Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
                Err(e) => {
                    self.eof = true;
                    self.scanner.close();
                    return Some(Err(e.into()));
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::Reference;

    fn chunk(seq: u64) -> EegChunk {
        EegChunk::new(seq, seq * 1000, 2, 3, vec![1.0, -2.5, 3.0, 0.0, f32::MAX, -0.0]).unwrap()
    }

    #[test]
    fn roundtrip_data_and_hello() {
        let c = chunk(7);
        let bytes = encode_chunk(&c).unwrap();
        let (frame, used) = decode_frame(&bytes).unwrap();
        assert_eq!(used, bytes.len());
        assert_eq!(frame, Frame::Data(c));

        let h = StreamHeader {
            rate_hz: 1000,
            channels: vec!["Pz".into(), "Oz".into()],
            reference: Reference::Raw,
            n_samples: 3000,
        };
        let (frame, _) = decode_frame(&encode_hello(&h)).unwrap();
        assert_eq!(frame, Frame::Hello(h));
    }

    #[test]
    fn encode_rejects_invalid() {
        let zero = EegChunk {
            seq: 1,
            t0_ms: 0,
            n_channels: 0,
            n_samples: 3,
            samples: vec![],
        };
        assert!(matches!(encode_chunk(&zero), Err(FrameError::InvalidChunk(_))));
        let mut c = chunk(1);
        c.seq = 0;
        assert!(matches!(encode_chunk(&c), Err(FrameError::InvalidChunk(_))));
    }

    #[test]
    fn distinct_errors() {
        let mut bytes = encode_chunk(&chunk(1)).unwrap();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert_eq!(decode_frame(&bad).unwrap_err(), FrameError::BadMagic);

        let last = bytes.len() - 1;
        bytes[last] ^= 0xFF;
        assert!(matches!(
            decode_frame(&bytes).unwrap_err(),
            FrameError::CrcMismatch { .. }
        ));

        let mut huge = FRAME_MAGIC.to_vec();
        huge.extend_from_slice(&u32::MAX.to_le_bytes());
        assert!(matches!(
            decode_frame(&huge).unwrap_err(),
            FrameError::LengthOverflow { .. }
        ));

        let ok = encode_chunk(&chunk(1)).unwrap();
        assert!(matches!(
            decode_frame(&ok[..ok.len() - 1]).unwrap_err(),
            FrameError::Incomplete { .. }
        ));
    }

    #[test]
    fn decoder_ignores_trailing_bytes() {
        let mut bytes = encode_chunk(&chunk(3)).unwrap();
        let n = bytes.len();
        bytes.extend_from_slice(&[0xAA; 100]);
        let (_, used) = decode_frame(&bytes).unwrap();
        assert_eq!(used, n);
    }

    #[test]
    fn scanner_resyncs_after_crc_error() {
        let mut stream = Vec::new();
        stream.extend(encode_chunk(&chunk(1)).unwrap());
        let mut broken = encode_chunk(&chunk(2)).unwrap();
        let mid = broken.len() / 2;
        broken[mid] ^= 0x01;
        stream.extend(broken);
        stream.extend(encode_chunk(&chunk(3)).unwrap());

        let mut scanner = FrameScanner::new();
        // feed in small pieces to exercise partial frames
        let mut results = Vec::new();
        for piece in stream.chunks(5) {
            scanner.push(piece);
            results.extend(scanner.drain());
        }
        assert_eq!(results.len(), 3);
        assert_eq!(results[0], Ok(Frame::Data(chunk(1))));
        assert!(matches!(results[1], Err(FrameError::CrcMismatch { .. })));
        assert_eq!(results[2], Ok(Frame::Data(chunk(3))));
    }

    #[test]
    fn corrupted_length_does_not_swallow_later_frames() {
        let mut broken = encode_chunk(&chunk(1)).unwrap();
        broken[4..8].copy_from_slice(&1_000_000u32.to_le_bytes());
        let mut stream = broken;
        stream.extend(encode_chunk(&chunk(2)).unwrap());
        stream.extend(encode_chunk(&chunk(3)).unwrap());
        let frames: Vec<_> = FrameReader::new(&stream[..]).collect();
        let data: Vec<u64> = frames
            .iter()
            .filter_map(|f| match f {
                Ok(Frame::Data(c)) => Some(c.seq),
                _ => None,
            })
            .collect();
        assert_eq!(data, vec![2, 3]);
    }

    #[test]
    fn scanner_skips_leading_garbage() {
        let mut stream = vec![0x00, b'S', b'O', 0x13];
        stream.extend(encode_chunk(&chunk(4)).unwrap());
        let mut scanner = FrameScanner::new();
        scanner.push(&stream);
        assert_eq!(scanner.drain(), vec![Ok(Frame::Data(chunk(4)))]);
        assert_eq!(scanner.skipped_bytes(), 4);
    }
}
