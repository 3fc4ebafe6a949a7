//! Emulated test harness: a TCP server exposing a bank of virtual chips
//! behind the serial framing, plus the collector that dumps their power-up
//! contents to text files.

pub mod collector;
pub mod dump;
pub mod protocol;
pub mod server;

use thiserror::Error;

pub use collector::{collect, CollectOptions, CollectSummary, HarnessClient};
pub use dump::{DumpError, DumpFile};
pub use protocol::{
    decode_request, decode_response, encode_request, encode_response, Command, DeviceErrorCode, ProtocolError,
    ReadRequest, ResponseFrame,
};
pub use server::{serve, BankConfig, ChipBank, Server, Session, ShutdownHandle};

#[derive(Debug, Error)]
pub enum ChipnetError {
    #[error("protocol error: {0}")]
    Protocol(#[from] ProtocolError),
    #[error("connection lost: {0}")]
    ConnectionLost(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Dump(#[from] DumpError),
    #[error("configuration: {0}")]
    Config(String),
}

impl ChipnetError {
    /// Socket failures mid-session are reported as a lost connection.
    pub(crate) fn from_io(e: std::io::Error) -> Self {
        use std::io::ErrorKind::*;
        match e.kind() {
            UnexpectedEof | ConnectionReset | ConnectionAborted | BrokenPipe | ConnectionRefused | TimedOut => {
                ChipnetError::ConnectionLost(e.to_string())
            }
            _ => ChipnetError::Io(e),
        }
    }
}
