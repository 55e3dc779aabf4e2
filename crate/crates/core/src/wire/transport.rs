//! Datagram transports: a seeded in-process loopback with fault injection and
//! plain UDP sockets.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::io;
use std::net::{SocketAddr, ToSocketAddrs, UdpSocket};
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::codec::{encode_datagram, FrameFlags, WireError, DATAGRAM_LEN};
use crate::model::ForceFrame;

pub const DEFAULT_PORT: u16 = 47533;

/// Fault model for the loopback link. Probabilities are per datagram.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LoopbackFaults {
    pub loss: f64,
    pub duplicate: f64,
    /// Extra delay drawn uniformly from `[0, jitter_ms]`.
    pub jitter_ms: f64,
    pub base_delay_ms: f64,
}

impl LoopbackFaults {
    pub fn lossless() -> Self {
        Self::default()
    }

    pub fn is_lossless(&self) -> bool {
        self.loss == 0.0 && self.duplicate == 0.0 && self.jitter_ms == 0.0
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize)]
pub struct LinkStats {
    pub sent: u64,
    pub dropped: u64,
    pub duplicated: u64,
    pub delivered: u64,
}

/// Simulated datagram link on a virtual microsecond clock.
#[derive(Debug)]
pub struct LoopbackLink {
    faults: LoopbackFaults,
    rng: ChaCha8Rng,
    in_flight: BinaryHeap<Reverse<(u64, u64, Vec<u8>)>>,
    order: u64,
    stats: LinkStats,
}

impl LoopbackLink {
    pub fn new(faults: LoopbackFaults, rng: ChaCha8Rng) -> Self {
        LoopbackLink {
            faults,
            rng,
            in_flight: BinaryHeap::new(),
            order: 0,
            stats: LinkStats::default(),
        }
    }

    pub fn seeded(faults: LoopbackFaults, seed: u64) -> Self {
        Self::new(faults, ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn stats(&self) -> LinkStats {
        self.stats
    }

    fn delay_us(&mut self) -> u64 {
        let jitter = if self.faults.jitter_ms > 0.0 {
            self.rng.random_range(0.0..=self.faults.jitter_ms)
        } else {
            0.0
        };
        ((self.faults.base_delay_ms + jitter) * 1000.0).round() as u64
    }

    fn enqueue(&mut self, bytes: &[u8], now_us: u64) {
        let arrival = now_us + self.delay_us();
        self.order += 1;
        self.in_flight
            .push(Reverse((arrival, self.order, bytes.to_vec())));
    }

    pub fn send(&mut self, bytes: &[u8], now_us: u64) {
        self.stats.sent += 1;
        if self.faults.loss > 0.0 && self.rng.random_bool(self.faults.loss.min(1.0)) {
            self.stats.dropped += 1;
            return;
        }
        self.enqueue(bytes, now_us);
        if self.faults.duplicate > 0.0 && self.rng.random_bool(self.faults.duplicate.min(1.0)) {
            self.stats.duplicated += 1;
            self.enqueue(bytes, now_us);
        }
    }

    /// Datagrams arriving at or before `now_us`, in arrival order.
    pub fn deliver(&mut self, now_us: u64) -> Vec<(u64, Vec<u8>)> {
        let mut out = Vec::new();
        while self
            .in_flight
            .peek()
            .is_some_and(|Reverse((at, _, _))| *at <= now_us)
        {
            let Reverse((at, _, bytes)) = self.in_flight.pop().expect("peeked");
            out.push((at, bytes));
        }
        self.stats.delivered += out.len() as u64;
        out
    }

    pub fn in_flight(&self) -> usize {
        self.in_flight.len()
    }
}

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("cannot bind {addr}: {source}")]
    Bind { addr: String, source: io::Error },
    #[error("cannot reach {addr}: {source}")]
    Connect { addr: String, source: io::Error },
    #[error("send failed: {0}")]
    Send(io::Error),
    #[error("receive failed: {0}")]
    Recv(io::Error),
    #[error(transparent)]
    Wire(#[from] WireError),
}

/// Sending half of a UDP stream.
#[derive(Debug)]
pub struct UdpSender {
    socket: UdpSocket,
    peer: SocketAddr,
}

impl UdpSender {
    pub fn connect(addr: &str) -> Result<Self, TransportError> {
        let connect_err = |source| TransportError::Connect {
            addr: addr.to_string(),
            source,
        };
        let peer = addr
            .to_socket_addrs()
            .map_err(connect_err)?
            .next()
            .ok_or_else(|| connect_err(io::Error::new(io::ErrorKind::NotFound, "no address")))?;
        let local: SocketAddr = if peer.is_ipv4() {
            "0.0.0.0:0".parse().expect("valid")
        } else {
            "[::]:0".parse().expect("valid")
        };
        let socket = UdpSocket::bind(local).map_err(|source| TransportError::Bind {
            addr: local.to_string(),
            source,
        })?;
        socket.connect(peer).map_err(connect_err)?;
        Ok(UdpSender { socket, peer })
    }

    pub fn peer(&self) -> SocketAddr {
        self.peer
    }

    pub fn send(&self, frame: &ForceFrame, flags: FrameFlags) -> Result<(), TransportError> {
        let bytes = encode_datagram(frame, flags)?;
        self.send_raw(&bytes)
    }

    pub fn send_raw(&self, bytes: &[u8]) -> Result<(), TransportError> {
        self.socket.send(bytes).map_err(TransportError::Send)?;
        Ok(())
    }

    /// Sends a datagram and waits briefly for an ICMP port-unreachable. Only
    /// detects a missing listener where the peer's host answers with ICMP
    /// (loopback and most LANs).
    pub fn probe(&self, frame: &ForceFrame, wait: Duration) -> Result<(), TransportError> {
        let refused = |source| TransportError::Connect {
            addr: self.peer.to_string(),
            source,
        };
        self.send(frame, FrameFlags::NONE).map_err(|e| match e {
            TransportError::Send(source) => refused(source),
            other => other,
        })?;
        std::thread::sleep(wait);
        self.socket.set_nonblocking(true).map_err(refused)?;
        let mut buf = [0u8; 1];
        let result = self.socket.recv(&mut buf);
        self.socket.set_nonblocking(false).map_err(refused)?;
        match result {
            Err(e) if e.kind() == io::ErrorKind::ConnectionRefused => Err(refused(e)),
            _ => Ok(()),
        }
    }
}

/// Receiving half of a UDP stream.
#[derive(Debug)]
pub struct UdpReceiver {
    socket: UdpSocket,
}

impl UdpReceiver {
    pub fn bind(addr: &str) -> Result<Self, TransportError> {
        let socket = UdpSocket::bind(addr).map_err(|source| TransportError::Bind {
            addr: addr.to_string(),
            source,
        })?;
        Ok(UdpReceiver { socket })
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.socket.local_addr()
    }

    pub fn try_clone(&self) -> io::Result<UdpReceiver> {
        Ok(UdpReceiver {
            socket: self.socket.try_clone()?,
        })
    }

    /// Waits up to `timeout` for one datagram. Oversized datagrams are
    /// returned truncated to 64 bytes so the decoder rejects them by length.
    pub fn recv_timeout(&self, timeout: Duration) -> Result<Option<Vec<u8>>, TransportError> {
        self.socket
            .set_read_timeout(Some(timeout.max(Duration::from_micros(1))))
            .map_err(TransportError::Recv)?;
        let mut buf = [0u8; 64];
        match self.socket.recv(&mut buf) {
            Ok(n) => Ok(Some(buf[..n].to_vec())),
            Err(e)
                if matches!(
                    e.kind(),
                    io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut
                ) =>
            {
                Ok(None)
            }
            // a previous sender on this port went away; not our problem
            Err(e) if e.kind() == io::ErrorKind::ConnectionRefused => Ok(None),
            Err(e) => Err(TransportError::Recv(e)),
        }
    }
}

const _: () = assert!(DATAGRAM_LEN < 64);
