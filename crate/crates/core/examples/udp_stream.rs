//! Sends a melody to a receiver over real UDP on localhost, both ends in one
//! process, and reports what arrived.

use std::thread;
use std::time::Duration;

use musinger::melody::builtin_melody;
use musinger::model::MelodyId;
use musinger::pipeline::flagged;
use musinger::recorder::{encode_pattern, SensorConfig};
use musinger::wire::{decode_datagram, FrameFlags, UdpReceiver, UdpSender};

fn main() {
    let rx = UdpReceiver::bind("127.0.0.1:0").unwrap();
    let addr = rx.local_addr().unwrap().to_string();
    let frames = flagged(encode_pattern(&builtin_melody(MelodyId::A), &SensorConfig::default()).unwrap());
    let n = frames.len();

    let sender = thread::spawn(move || {
        let tx = UdpSender::connect(&addr).unwrap();
        for (f, flags) in frames {
            tx.send(&f, flags).unwrap();
            // ten times real time
            thread::sleep(Duration::from_millis(1));
        }
    });

    let (mut got, mut active) = (0, 0);
    while let Some(bytes) = rx.recv_timeout(Duration::from_secs(2)).unwrap() {
        let (frame, flags) = decode_datagram(&bytes).unwrap();
        got += 1;
        active += !frame.is_silent() as u32;
        if flags == FrameFlags::LAST {
            break;
        }
    }
    sender.join().unwrap();
    println!("sent {n} frames, received {got} ({active} with force)");
}
