//! Encodes one frame, dumps the datagram, then pushes a short stream through
//! a lossy loopback link into the jitter buffer.

use musinger::model::ForceFrame;
use musinger::wire::{
    decode_datagram, encode_datagram, FrameFlags, JitterBuffer, JitterBufferConfig, LoopbackFaults, LoopbackLink, Playout,
};

fn main() {
    let frame = ForceFrame::new(42, 1_234_567, [2.5, 0.0, 9.999]);
    let bytes = encode_datagram(&frame, FrameFlags::LAST).unwrap();
    let hex: Vec<String> = bytes.iter().map(|b| format!("{b:02x}")).collect();
    println!("datagram: {}", hex.join(" "));
    println!("decoded:  {:?}", decode_datagram(&bytes).unwrap());

    let mut corrupt = bytes;
    corrupt[17] ^= 0x01;
    println!("one flipped bit: {}", decode_datagram(&corrupt).unwrap_err());

    let faults = LoopbackFaults { loss: 0.1, duplicate: 0.1, jitter_ms: 40.0, base_delay_ms: 2.0 };
    let mut link = LoopbackLink::seeded(faults, 7);
    let mut buffer = JitterBuffer::new(JitterBufferConfig::default());
    let mut line = String::new();
    for tick in 0..60u64 {
        let now = tick * 10_000;
        if tick < 40 {
            let f = ForceFrame::new(tick as u32, now, [tick as f64 / 10.0, 0.0, 0.0]);
            link.send(&encode_datagram(&f, FrameFlags::NONE).unwrap(), now);
        }
        for (at, d) in link.deliver(now) {
            let (f, flags) = decode_datagram(&d).unwrap();
            buffer.push_with_flags(f, flags, at);
        }
        line.push(match buffer.pop(now) {
            Playout::Frame(_) => '#',
            Playout::Held(_) => 'h',
            _ => '.',
        });
    }
    println!("playout:  {line}");
    println!("link:     {:?}", link.stats());
    println!("buffer:   {:?}", buffer.stats());
}
