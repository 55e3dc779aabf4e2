//! Fixed 24-byte datagram.
//!
//! ```text
//! 0..2   magic 0x4D 0x53 ("MS")
//! 2      version 0x01
//! 3      flags (bit 0: last frame of stream, other bits zero)
//! 4..8   seq, u32 big-endian
//! 8..16  timestamp_us, u64 big-endian
//! 16..22 three forces, u16 big-endian millinewtons (0..=10000)
//! 22..24 CRC-16/CCITT-FALSE over bytes 0..22, big-endian
//! ```

use thiserror::Error;

use super::crc16;
use crate::model::{ForceFrame, CHANNELS, FULL_SCALE_N};

pub const DATAGRAM_LEN: usize = 24;
pub const MAGIC: [u8; 2] = [0x4D, 0x53];
pub const VERSION: u8 = 0x01;

const FLAG_LAST: u8 = 0x01;
const MAX_MILLINEWTONS: u16 = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FrameFlags {
    pub last_of_stream: bool,
}

impl FrameFlags {
    pub const NONE: FrameFlags = FrameFlags {
        last_of_stream: false,
    };
    pub const LAST: FrameFlags = FrameFlags {
        last_of_stream: true,
    };

    fn bits(self) -> u8 {
        if self.last_of_stream {
            FLAG_LAST
        } else {
            0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WireError {
    #[error("channel {channel} force {force_n} N cannot be encoded (range 0..=10 N)")]
    Range { channel: usize, force_n: f64 },
    #[error("datagram is {0} bytes, expected 24")]
    FrameLength(usize),
    #[error("bad datagram header")]
    BadHeader,
    #[error("datagram checksum mismatch")]
    Corrupt,
}

pub fn encode_frame(frame: &ForceFrame) -> Result<[u8; DATAGRAM_LEN], WireError> {
    encode_datagram(frame, FrameFlags::NONE)
}

/// Forces are rounded to the nearest millinewton; frames already on the
/// millinewton grid round-trip exactly.
pub fn encode_datagram(
    frame: &ForceFrame,
    flags: FrameFlags,
) -> Result<[u8; DATAGRAM_LEN], WireError> {
    let mut out = [0u8; DATAGRAM_LEN];
    out[0..2].copy_from_slice(&MAGIC);
    out[2] = VERSION;
    out[3] = flags.bits();
    out[4..8].copy_from_slice(&frame.seq.to_be_bytes());
    out[8..16].copy_from_slice(&frame.timestamp_us.to_be_bytes());
    for (i, &force) in frame.forces.iter().enumerate() {
        if !(0.0..=FULL_SCALE_N).contains(&force) {
            return Err(WireError::Range {
                channel: i + 1,
                force_n: force,
            });
        }
        let mn = (force * 1000.0).round() as u16;
        out[16 + 2 * i..18 + 2 * i].copy_from_slice(&mn.to_be_bytes());
    }
    let crc = crc16::checksum(&out[..22]);
    out[22..24].copy_from_slice(&crc.to_be_bytes());
    Ok(out)
}

pub fn decode_frame(bytes: &[u8]) -> Result<ForceFrame, WireError> {
    decode_datagram(bytes).map(|(frame, _)| frame)
}

pub fn decode_datagram(bytes: &[u8]) -> Result<(ForceFrame, FrameFlags), WireError> {
    let bytes: &[u8; DATAGRAM_LEN] = bytes
        .try_into()
        .map_err(|_| WireError::FrameLength(bytes.len()))?;
    if bytes[0..2] != MAGIC || bytes[2] != VERSION || bytes[3] & !FLAG_LAST != 0 {
        return Err(WireError::BadHeader);
    }
    let stored = u16::from_be_bytes([bytes[22], bytes[23]]);
    if crc16::checksum(&bytes[..22]) != stored {
        return Err(WireError::Corrupt);
    }
    let seq = u32::from_be_bytes(bytes[4..8].try_into().expect("4 bytes"));
    let timestamp_us = u64::from_be_bytes(bytes[8..16].try_into().expect("8 bytes"));
    let mut forces = [0.0; CHANNELS];
    for (i, force) in forces.iter_mut().enumerate() {
        let mn = u16::from_be_bytes([bytes[16 + 2 * i], bytes[17 + 2 * i]]);
        if mn > MAX_MILLINEWTONS {
            return Err(WireError::Corrupt);
        }
        *force = mn as f64 / 1000.0;
    }
    let flags = FrameFlags {
        last_of_stream: bytes[3] & FLAG_LAST != 0,
    };
    Ok((
        ForceFrame {
            seq,
            timestamp_us,
            forces,
        },
        flags,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_of_known_frame() {
        let bytes = encode_frame(&ForceFrame::new(1, 1000, [1.0, 0.0, 0.0])).unwrap();
        assert_eq!(
            &bytes[..22],
            &[
                0x4D, 0x53, 0x01, 0x00, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0x03, 0xE8, 0x03, 0xE8, 0,
                0, 0, 0
            ]
        );
    }

    #[test]
    fn zero_frame_payload() {
        let bytes = encode_frame(&ForceFrame::zero(0, 0)).unwrap();
        assert!(bytes[4..22].iter().all(|&b| b == 0));
    }

    #[test]
    fn last_flag_round_trip() {
        let f = ForceFrame::new(9, 90_000, [0.5, 0.25, 10.0]);
        let bytes = encode_datagram(&f, FrameFlags::LAST).unwrap();
        assert_eq!(bytes[3], 0x01);
        assert_eq!(decode_datagram(&bytes).unwrap(), (f, FrameFlags::LAST));
    }

    #[test]
    fn out_of_range_force() {
        let err = encode_frame(&ForceFrame::new(0, 0, [0.0, 10.5, 0.0])).unwrap_err();
        assert_eq!(
            err,
            WireError::Range {
                channel: 2,
                force_n: 10.5
            }
        );
    }

    #[test]
    fn decode_errors() {
        let good = encode_frame(&ForceFrame::new(3, 7, [1.0, 2.0, 3.0])).unwrap();
        assert_eq!(decode_frame(&good[..23]), Err(WireError::FrameLength(23)));

        let mut flipped = good;
        flipped[17] ^= 0x04;
        assert_eq!(decode_frame(&flipped), Err(WireError::Corrupt));

        let mut magic = good;
        magic[0] = 0x00;
        assert_eq!(decode_frame(&magic), Err(WireError::BadHeader));

        let mut version = good;
        version[2] = 2;
        assert_eq!(decode_frame(&version), Err(WireError::BadHeader));

        let mut reserved = good;
        reserved[3] = 0x80;
        assert_eq!(decode_frame(&reserved), Err(WireError::BadHeader));
    }

    #[test]
    fn oversized_force_with_valid_crc_is_rejected() {
        let mut bytes = encode_frame(&ForceFrame::zero(0, 0)).unwrap();
        bytes[16..18].copy_from_slice(&10_001u16.to_be_bytes());
        let crc = crc16::checksum(&bytes[..22]);
        bytes[22..24].copy_from_slice(&crc.to_be_bytes());
        assert_eq!(decode_frame(&bytes), Err(WireError::Corrupt));
    }

    #[test]
    fn forces_round_to_millinewtons() {
        let f = ForceFrame::new(0, 0, [10.0 * 2048.0 / 4095.0, 0.0, 0.0]);
        let back = decode_frame(&encode_frame(&f).unwrap()).unwrap();
        assert_eq!(back.forces[0], 5.001);
    }
}
