//! Samples a few scripted key taps through the sensor model and prints the
//! resulting force frames.

use musinger::model::Channel;
use musinger::recorder::{fsr_response, sample_taps, SensorConfig, TapEvent};

fn main() {
    let sensor = SensorConfig::default();
    let ch = |n| Channel::from_number(n).unwrap();
    let events = [
        TapEvent::press(ch(1), 6.0, 0),
        TapEvent::press(ch(3), 0.1, 20_000), // below threshold, reads as zero
        TapEvent::release(ch(1), 45_000),
        TapEvent::release(ch(3), 60_000),
    ];
    let frames = sample_taps(events, &sensor, 0, 80_000).unwrap();
    println!("{:>4} {:>8}  {:>7} {:>7} {:>7}", "seq", "t_us", "ch1", "ch2", "ch3");
    for f in &frames {
        println!("{:>4} {:>8}  {:>7.3} {:>7.3} {:>7.3}", f.seq, f.timestamp_us, f.forces[0], f.forces[1], f.forces[2]);
    }
    println!("6 N reads {} counts on a {}-bit ADC", fsr_response(6.0, &sensor).unwrap(), sensor.adc_bits);
}
