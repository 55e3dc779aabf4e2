//! Real-time streaming between processes, and the console bridge plumbing
//! shared by other subcommands.

use std::io::{IsTerminal, Read};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc;
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use clap::Args;
use serde_json::json;

use super::play::{load_pattern, send_remote, write_history};
use super::{interrupted, watch_interrupt, CliError, CliResult, Ctx, FaultArgs, MelodyArg};
use crate::bridge::{BridgeError, BridgeMessage, BridgeServer};
use crate::display::{extract_onsets, LinkageDisplay, StateHistory};
use crate::melody::Classifier;
use crate::model::{monotonic_now, Channel, MelodyId, CHANNELS};
use crate::pipeline::{align_onsets, PipelineConfig};
use crate::recorder::{TapEvent, TapSampler};
use crate::rng::substream;
use crate::wire::{decode_datagram, ClockSync, FrameFlags, JitterBuffer, LoopbackLink, Playout, TransportError, UdpReceiver, UdpSender};

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("role").required(true).args(["listen", "connect"]))]
pub struct StreamArgs {
    /// Receive and render
    #[arg(long, value_name = "ADDR:PORT")]
    pub listen: Option<String>,
    /// Record and send
    #[arg(long, value_name = "ADDR:PORT")]
    pub connect: Option<String>,
    #[command(flatten)]
    pub faults: FaultArgs,
    /// Listener: state-history CSV
    #[arg(long, value_name = "PATH", requires = "listen")]
    pub out: Option<PathBuf>,
    /// Listener: stop after this many seconds even without end of stream
    #[arg(long, value_name = "S", requires = "listen")]
    pub max_seconds: Option<f64>,
    /// Sender: bundled melody instead of live taps
    #[arg(long, value_enum, requires = "connect", conflicts_with = "file")]
    pub melody: Option<MelodyArg>,
    /// Sender: MRF1 file instead of live taps
    #[arg(long, value_name = "PATH", requires = "connect")]
    pub file: Option<PathBuf>,
    /// Sender: auto-release delay for key taps
    #[arg(long, value_name = "MS", default_value_t = 120)]
    pub release_ms: u64,
    /// Sender: force of a key or pad tap
    #[arg(long, value_name = "N", default_value_t = 10.0)]
    pub force: f64,
    /// Console bridge port (listener: display view; sender: tapper view)
    #[arg(long, value_name = "PORT")]
    pub ui_port: Option<u16>,
    /// Console static assets
    #[arg(long, value_name = "DIR", requires = "ui_port")]
    pub ui_dir: Option<PathBuf>,
}

pub fn open_bridge(port: u16, ui_dir: Option<&Path>) -> Result<BridgeServer, CliError> {
    BridgeServer::start(&format!("127.0.0.1:{port}"), ui_dir).map_err(|e| match e {
        BridgeError::MissingUi(_) => CliError::MissingUi(e.to_string()),
        BridgeError::Bind { .. } => CliError::Network(e.to_string()),
    })
}

/// Broadcasts recorded states paced at `speed` × real time.
pub fn replay_history(bridge: &BridgeServer, history: &StateHistory, speed: f64, stop: impl Fn() -> bool) {
    let period_us = (history.tick_period_ms() * 1000.0 / speed.max(1e-3)) as u64;
    let start = monotonic_now();
    for (tick, states) in history.ticks.iter().enumerate() {
        if stop() {
            return;
        }
        let due = start + tick as u64 * period_us;
        let now = monotonic_now();
        if due > now {
            thread::sleep(Duration::from_micros(due - now));
        }
        bridge.broadcast(&BridgeMessage::state(tick as u64, states));
    }
}

pub fn run(ctx: &mut Ctx, a: &StreamArgs) -> CliResult {
    let cfg = ctx.pipeline_config(Some(&a.faults))?;
    if let Some(addr) = &a.listen {
        listen(ctx, a, addr, &cfg)
    } else {
        let addr = a.connect.as_deref().expect("clap enforces a role");
        if a.melody.is_some() || a.file.is_some() {
            let pattern = load_pattern(a.melody, a.file.as_deref())?;
            send_remote(ctx, addr, &pattern, &cfg.sensor)
        } else {
            send_taps(ctx, a, addr, &cfg)
        }
    }
}

fn listen(ctx: &mut Ctx, a: &StreamArgs, addr: &str, cfg: &PipelineConfig) -> CliResult {
    let receiver = UdpReceiver::bind(addr).map_err(|e| CliError::Network(e.to_string()))?;
    let local = receiver.local_addr()?;
    let bridge = a.ui_port.map(|p| open_bridge(p, a.ui_dir.as_deref())).transpose()?;
    watch_interrupt();
    writeln!(ctx.err, "listening on {local}")?;

    let stop = Arc::new(AtomicBool::new(false));
    let (tx, rx) = mpsc::channel::<(u64, Vec<u8>)>();
    let recv_thread = {
        let stop = stop.clone();
        thread::spawn(move || -> Result<(), TransportError> {
            while !stop.load(Ordering::Relaxed) {
                if let Some(bytes) = receiver.recv_timeout(Duration::from_millis(20))? {
                    if tx.send((monotonic_now(), bytes)).is_err() {
                        break;
                    }
                }
            }
            Ok(())
        })
    };

    let mut link = LoopbackLink::new(cfg.faults, substream(ctx.seed, "listen-link"));
    let mut buffer = JitterBuffer::with_sync(cfg.jitter, ClockSync::FirstArrival);
    let mut display = LinkageDisplay::new(cfg.display).map_err(|e| CliError::Input(e.to_string()))?;
    let mut history = StateHistory::new(cfg.display.tick_rate_hz);
    let tick_us = 1_000_000 / cfg.display.tick_rate_hz as u64;
    let dt = cfg.display.tick_period_s();
    let tail_ticks = (cfg.jitter.gap_timeout_ms + cfg.tail_ms) as u64 * 1000 / tick_us;
    let started = monotonic_now();
    let deadline = a.max_seconds.map(|s| started + (s * 1e6) as u64);
    let mut ticks_after_end = None::<u64>;
    let mut next_tick = started;

    loop {
        let now = monotonic_now();
        if next_tick > now {
            thread::sleep(Duration::from_micros(next_tick - now));
        }
        let now = next_tick;
        next_tick += tick_us;
        if interrupted() || deadline.is_some_and(|d| now >= d) {
            break;
        }
        while let Ok((arrival, bytes)) = rx.try_recv() {
            link.send(&bytes, arrival);
        }
        for (at, bytes) in link.deliver(now) {
            match decode_datagram(&bytes) {
                Ok((frame, flags)) => {
                    buffer.push_with_flags(frame, flags, at);
                }
                Err(e) => {
                    log::debug!("malformed datagram: {e}");
                    buffer.note_malformed();
                }
            }
        }
        let playout = buffer.pop(now);
        if playout == Playout::Stalled {
            continue;
        }
        let states = display.render_tick(&playout.forces(), dt);
        history.push(states);
        if let Some(b) = &bridge {
            b.broadcast(&BridgeMessage::state(history.len() as u64 - 1, &states));
        }
        if buffer.end_of_stream() {
            let n = ticks_after_end.get_or_insert(0);
            *n += 1;
            if *n >= tail_ticks {
                break;
            }
        }
    }
    stop.store(true, Ordering::Relaxed);
    match recv_thread.join() {
        Ok(Ok(())) => {}
        Ok(Err(e)) => return Err(CliError::Network(e.to_string())),
        Err(_) => return Err(CliError::Network("receive thread panicked".into())),
    }

    if let Some(path) = &a.out {
        write_history(path, &history)?;
    }
    let onsets = align_onsets(&extract_onsets(&history, cfg.display.depth_max_mm), cfg.render_latency_ms());
    let classified = Classifier::builtin().classify(&onsets, &MelodyId::ALL).ok();
    let s = buffer.stats();
    let l = link.stats();
    if ctx.json {
        writeln!(
            ctx.out,
            "{}",
            json!({
                "ticks": history.len(),
                "end_of_stream": buffer.end_of_stream(),
                "link": l,
                "jitter": s,
                "onsets": onsets.len(),
                "classified": classified.map(|m| m.to_string()),
            })
        )?;
    } else {
        writeln!(ctx.out, "received {} datagrams ({} malformed), end of stream: {}", s.received + s.malformed, s.malformed, buffer.end_of_stream())?;
        if !cfg.faults.is_lossless() {
            writeln!(ctx.out, "injected: dropped {} duplicated {}", l.dropped, l.duplicated)?;
        }
        writeln!(ctx.out, "played {} concealed {} silent {} late {} duplicates {}", s.played, s.held, s.silent, s.late, s.duplicates)?;
        writeln!(ctx.out, "onsets: {}", onsets.len())?;
        match classified {
            Some(m) => writeln!(ctx.out, "classified: {m} ({})", m.title())?,
            None => writeln!(ctx.out, "classified: -")?,
        }
    }
    Ok(())
}

enum Input {
    Key(Channel),
    Done,
}

fn key_channel(b: u8) -> Option<Channel> {
    match b.to_ascii_lowercase() {
        b'j' => Channel::from_number(1),
        b'k' => Channel::from_number(2),
        b'l' => Channel::from_number(3),
        _ => None,
    }
}

/// Puts a terminal into unbuffered, no-echo mode until dropped.
struct RawTerminal(Option<String>);

impl RawTerminal {
    fn enter() -> Self {
        if !std::io::stdin().is_terminal() {
            return RawTerminal(None);
        }
        let saved = std::process::Command::new("stty")
            .arg("-g")
            .stdin(std::process::Stdio::inherit())
            .output()
            .ok()
            .filter(|o| o.status.success())
            .map(|o| String::from_utf8_lossy(&o.stdout).trim().to_string());
        if saved.is_some() {
            let _ = std::process::Command::new("stty").args(["-icanon", "-echo", "min", "1"]).stdin(std::process::Stdio::inherit()).status();
        }
        RawTerminal(saved)
    }
}

impl Drop for RawTerminal {
    fn drop(&mut self) {
        if let Some(s) = &self.0 {
            let _ = std::process::Command::new("stty").arg(s).stdin(std::process::Stdio::inherit()).status();
        }
    }
}

fn send_taps(ctx: &mut Ctx, a: &StreamArgs, addr: &str, cfg: &PipelineConfig) -> CliResult {
    let network = |e: TransportError| CliError::Network(e.to_string());
    let sender = UdpSender::connect(addr).map_err(network)?;
    let bridge = a.ui_port.map(|p| open_bridge(p, a.ui_dir.as_deref())).transpose()?;
    watch_interrupt();
    let (tx, rx) = mpsc::channel::<Input>();

    let _raw = bridge.is_none().then(RawTerminal::enter);
    if bridge.is_none() {
        writeln!(ctx.err, "tap j / k / l for channels 1-3; q or end of input to finish")?;
        let tx = tx.clone();
        // detached: a blocking stdin read cannot be cancelled
        thread::spawn(move || {
            let mut stdin = std::io::stdin().lock();
            let mut byte = [0u8; 1];
            loop {
                match stdin.read(&mut byte) {
                    Ok(1) if byte[0] == b'q' => break,
                    Ok(1) => {
                        if let Some(ch) = key_channel(byte[0]) {
                            if tx.send(Input::Key(ch)).is_err() {
                                return;
                            }
                        }
                    }
                    _ => break,
                }
            }
            let _ = tx.send(Input::Done);
        });
    }
    if let Some(b) = &bridge {
        writeln!(ctx.err, "tapper console at http://{}/", b.local_addr())?;
    }

    let mut sampler = TapSampler::new(cfg.sensor, monotonic_now()).map_err(|e| CliError::Input(e.to_string()))?;
    let release_us = a.release_ms * 1000;
    let mut auto_release: [Option<u64>; CHANNELS] = [None; CHANNELS];
    let mut done = false;
    let mut sent = 0usize;
    let mut probed = false;
    let period = Duration::from_micros(1_000_000 / cfg.sensor.sample_rate_hz as u64);
    loop {
        let now = monotonic_now();
        if let Some(b) = &bridge {
            while let Some(msg) = b.try_recv() {
                // the browser clock is not ours; stamp on arrival
                if let Some(mut e) = msg.tap_event() {
                    e.timestamp_us = now;
                    sampler.push(e);
                }
            }
        }
        while let Ok(input) = rx.try_recv() {
            match input {
                Input::Key(ch) => {
                    let slot = &mut auto_release[ch.index()];
                    if slot.is_none() {
                        sampler.push(TapEvent::press(ch, a.force, now));
                    }
                    *slot = Some(now + release_us);
                }
                Input::Done => done = true,
            }
        }
        for ch in Channel::ALL {
            if let Some(due) = auto_release[ch.index()] {
                if due <= now {
                    sampler.push(TapEvent::release(ch, due));
                    auto_release[ch.index()] = None;
                }
            }
        }
        let finishing = (done && auto_release.iter().all(Option::is_none)) || interrupted();
        let frames = sampler.poll(now);
        for frame in &frames {
            if !probed {
                sender.probe(frame, Duration::from_millis(20)).map_err(network)?;
                probed = true;
            } else {
                sender.send(frame, FrameFlags::NONE).map_err(network)?;
            }
            sent += 1;
        }
        if finishing {
            let last = sampler.poll(sampler.next_frame_time_us());
            for frame in &last {
                sender.send(frame, FrameFlags::LAST).map_err(network)?;
                sent += 1;
            }
            break;
        }
        thread::sleep(period / 2);
    }
    if ctx.json {
        writeln!(ctx.out, "{}", json!({ "sent": sent, "peer": sender.peer().to_string() }))?;
    } else {
        writeln!(ctx.out, "sent {sent} frames to {}", sender.peer())?;
    }
    Ok(())
}
