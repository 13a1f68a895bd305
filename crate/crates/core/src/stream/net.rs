//! Bounded producer queues and the TCP transport.

use std::io::{BufWriter, Write};
use std::net::{TcpListener, TcpStream, ToSocketAddrs};
use std::sync::mpsc::{sync_channel, Receiver, SyncSender};
use std::thread::{self, JoinHandle};

use log::{info, warn};

use super::{encode_chunk, encode_hello, EegChunk, Frame, FrameReader, Result, StreamError, StreamHeader};

/// Receiving end of a bounded producer thread. The producer blocks while the
/// queue is full.
pub struct ChunkQueue {
    rx: Receiver<Result<EegChunk>>,
    handle: Option<JoinHandle<()>>,
}

/// Run `source` on its own thread, handing chunks over a queue of
/// `capacity` slots.
pub fn spawn_producer<I>(source: I, capacity: usize) -> ChunkQueue
where
    I: Iterator<Item = Result<EegChunk>> + Send + 'static,
{
    let (tx, rx) = sync_channel(capacity.max(1));
    let handle = thread::spawn(move || pump(source, &tx));
    ChunkQueue {
        rx,
        handle: Some(handle),
    }
}

fn pump<I: Iterator<Item = Result<EegChunk>>>(source: I, tx: &SyncSender<Result<EegChunk>>) {
    for item in source {
        let stop = item.is_err();
        if tx.send(item).is_err() || stop {
            break;
        }
    }
}

impl Iterator for ChunkQueue {
    type Item = Result<EegChunk>;

    fn next(&mut self) -> Option<Self::Item> {
        match self.rx.recv() {
            Ok(item) => Some(item),
            Err(_) => {
                if let Some(h) = self.handle.take() {
                    let _ = h.join();
                }
                None
            }
        }
    }
}

/// Enforces gap-free `seq` numbering starting at 1.
#[derive(Debug, Clone)]
pub struct SeqChecker {
    expected: u64,
}

impl Default for SeqChecker {
    fn default() -> Self {
        Self { expected: 1 }
    }
}

impl SeqChecker {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn check(&mut self, chunk: &EegChunk) -> Result<()> {
        if chunk.seq != self.expected {
            return Err(StreamError::SeqGap {
                expected: self.expected,
                received: chunk.seq,
            });
        }
        self.expected += 1;
        Ok(())
    }
}

/// Accept one client on `listener` and stream `header` followed by every
/// chunk of `source`. Returns the number of data frames sent.
pub fn serve<I>(listener: &TcpListener, header: &StreamHeader, source: I, capacity: usize) -> Result<u64>
where
    I: Iterator<Item = Result<EegChunk>> + Send + 'static,
{
    let (socket, peer) = listener.accept()?;
    info!("client connected from {peer}");
    socket.set_nodelay(true)?;
    let mut out = BufWriter::new(socket);
    out.write_all(&encode_hello(header))?;
    out.flush()?;
    let mut sent = 0;
    for chunk in spawn_producer(source, capacity) {
        let frame = encode_chunk(&chunk?)?;
        out.write_all(&frame)?;
        out.flush()?;
        sent += 1;
    }
    Ok(sent)
}

/// Client side of the stream protocol. Frames are decoded on a reader thread
/// and delivered through a bounded queue; any sequence gap ends the stream
/// with [`StreamError::SeqGap`].
pub struct StreamClient {
    header: StreamHeader,
    queue: ChunkQueue,
}

impl StreamClient {
    pub fn connect(addr: impl ToSocketAddrs, capacity: usize) -> Result<Self> {
        let socket = TcpStream::connect(addr)?;
        Self::from_stream(socket, capacity)
    }

    pub fn from_stream(socket: TcpStream, capacity: usize) -> Result<Self> {
        let mut frames = FrameReader::new(socket);
        let header = loop {
            match frames.next() {
                Some(Ok(Frame::Hello(h))) => break h,
                Some(Ok(Frame::Data(_))) => return Err(StreamError::MissingHello),
                Some(Err(StreamError::Frame(e))) => warn!("discarding damaged frame: {e}"),
                Some(Err(e)) => return Err(e),
                None => return Err(StreamError::MissingHello),
            }
        };
        let chunks = ChunkFrames {
            frames,
            seq: SeqChecker::new(),
            done: false,
        };
        Ok(Self {
            header,
            queue: spawn_producer(chunks, capacity),
        })
    }

    pub fn header(&self) -> &StreamHeader {
        &self.header
    }
}

impl Iterator for StreamClient {
    type Item = Result<EegChunk>;

    fn next(&mut self) -> Option<Self::Item> {
        self.queue.next()
    }
}

struct ChunkFrames {
    frames: FrameReader<TcpStream>,
    seq: SeqChecker,
    done: bool,
}

impl Iterator for ChunkFrames {
    type Item = Result<EegChunk>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        loop {
            match self.frames.next()? {
                Ok(Frame::Data(chunk)) => {
                    if let Err(e) = self.seq.check(&chunk) {
                        self.done = true;
                        return Some(Err(e));
                    }
                    return Some(Ok(chunk));
                }
                Ok(Frame::Hello(_)) => warn!("ignoring repeated hello frame"),
                // the lost frame surfaces as a sequence gap on the next one
                Err(StreamError::Frame(e)) => warn!("discarding damaged frame: {e}"),
                Err(e) => {
                    self.done = true;
                    return Some(Err(e));
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chunk(seq: u64) -> EegChunk {
        EegChunk::new(seq, (seq - 1) * 1000, 1, 2, vec![seq as f32, -(seq as f32)]).unwrap()
    }

    #[test]
    fn seq_checker_detects_gap() {
        let mut s = SeqChecker::new();
        s.check(&chunk(1)).unwrap();
        s.check(&chunk(2)).unwrap();
        assert!(matches!(
            s.check(&chunk(4)),
            Err(StreamError::SeqGap {
                expected: 3,
                received: 4
            })
        ));
    }

    #[test]
    fn producer_queue_preserves_order() {
        let source = (1..=50).map(|i| Ok(chunk(i)));
        let seqs: Vec<u64> = spawn_producer(source, 2).map(|c| c.unwrap().seq).collect();
        assert_eq!(seqs, (1..=50).collect::<Vec<_>>());
    }
}
