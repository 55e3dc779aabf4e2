//! Datagram format and receive-side buffering between recorder and display.

mod codec;
pub mod crc16;
mod jitter;
pub mod transport;

pub use codec::{
    decode_datagram, decode_frame, encode_datagram, encode_frame, FrameFlags, WireError,
    DATAGRAM_LEN, MAGIC, VERSION,
};
pub use jitter::{
    ClockSync, JitterBuffer, JitterBufferConfig, JitterConfigError, JitterStats, Playout,
    SharedJitterBuffer,
};
pub use transport::{LinkStats, LoopbackFaults, LoopbackLink, TransportError, UdpReceiver, UdpSender, DEFAULT_PORT};
