//! A framed TCP connection with byte accounting shared by the client and
//! the server.

use super::metrics::{ByteCount, CountingStream};
use super::wire::{self, Message, WireError};
use std::io::BufReader;
use std::net::TcpStream;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

pub struct FramedConn {
    reader: BufReader<CountingStream<TcpStream>>,
    writer: CountingStream<TcpStream>,
    bytes_in: Arc<AtomicU64>,
    bytes_out: Arc<AtomicU64>,
}

impl FramedConn {
    pub fn new(stream: TcpStream) -> std::io::Result<Self> {
        let bytes_in = Arc::new(AtomicU64::new(0));
        let bytes_out = Arc::new(AtomicU64::new(0));
        let write_half = stream.try_clone()?;
        Ok(FramedConn {
            reader: BufReader::new(CountingStream::new(
                stream,
                bytes_in.clone(),
                Arc::new(AtomicU64::new(0)),
            )),
            writer: CountingStream::new(write_half, Arc::new(AtomicU64::new(0)), bytes_out.clone()),
            bytes_in,
            bytes_out,
        })
    }

    pub fn send(&mut self, msg: &Message) -> Result<(), WireError> {
        wire::write_message(&mut self.writer, msg)
    }

    /// Receive one message along with its framed length in bytes.
    pub fn recv_with_len(&mut self) -> Result<(Message, usize), WireError> {
        wire::read_message_with_len(&mut self.reader)
    }

    pub fn recv(&mut self) -> Result<Message, WireError> {
        self.recv_with_len().map(|(m, _)| m)
    }

    pub fn bytes(&self) -> ByteCount {
        ByteCount {
            sent: self.bytes_out.load(Ordering::Relaxed),
            received: self.bytes_in.load(Ordering::Relaxed),
        }
    }
}
