use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::Args;
use serde_json::json;

use super::live::{open_bridge, replay_history};
use super::{interrupted, watch_interrupt, CliError, CliResult, Ctx, FaultArgs, MelodyArg};
use crate::display::StateHistory;
use crate::melody::{builtin_melody, parse_rhythm_file, Classifier};
use crate::model::{monotonic_now, MelodyId, RhythmPattern};
use crate::pipeline::{flagged, run_loopback};
use crate::recorder::encode_pattern;
use crate::wire::{TransportError, UdpSender};

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["melody", "file"]))]
pub struct PlayArgs {
    /// Bundled melody
    #[arg(long, value_enum)]
    pub melody: Option<MelodyArg>,
    /// MRF1 rhythm file
    #[arg(long, value_name = "PATH")]
    pub file: Option<PathBuf>,
    #[command(flatten)]
    pub faults: FaultArgs,
    /// Stream to a remote listener instead of the loopback link
    #[arg(long, value_name = "ADDR:PORT", conflicts_with = "loopback")]
    pub connect: Option<String>,
    /// State-history CSV
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Serve the console bridge on this port and replay the rendering there
    #[arg(long, value_name = "PORT")]
    pub ui_port: Option<u16>,
    /// Console static assets
    #[arg(long, value_name = "DIR", requires = "ui_port")]
    pub ui_dir: Option<PathBuf>,
}

pub fn load_pattern(melody: Option<MelodyArg>, file: Option<&Path>) -> Result<RhythmPattern, CliError> {
    match (melody, file) {
        (Some(m), _) => Ok(builtin_melody(m.into())),
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
            parse_rhythm_file(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
        }
        (None, None) => Err(CliError::Input("give --melody or --file".into())),
    }
}

pub fn write_history(path: &Path, history: &StateHistory) -> CliResult {
    let file = File::create(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    history.write_csv(BufWriter::new(file)).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn network(e: TransportError) -> CliError {
    CliError::Network(e.to_string())
}

pub fn run(ctx: &mut Ctx, a: &PlayArgs) -> CliResult {
    let pattern = load_pattern(a.melody, a.file.as_deref())?;
    let cfg = ctx.pipeline_config(Some(&a.faults))?;
    if let Some(addr) = &a.connect {
        return send_remote(ctx, addr, &pattern, &cfg.sensor);
    }

    let report = run_loopback(&pattern, &cfg, ctx.seed).map_err(|e| CliError::Input(e.to_string()))?;
    if let Some(path) = &a.out {
        write_history(path, &report.history)?;
    }
    let classified = Classifier::builtin().classify(&report.onsets, &MelodyId::ALL).ok();
    if ctx.json {
        let onsets: Vec<_> = report
            .onsets
            .onsets
            .iter()
            .map(|o| json!({ "time_ms": o.time_ms, "channel": o.channel.number(), "duration_ms": o.duration_ms, "intensity": o.intensity }))
            .collect();
        writeln!(
            ctx.out,
            "{}",
            json!({
                "pipeline": report,
                "onsets_in": pattern.len(),
                "onsets": onsets,
                "classified": classified.map(|m| m.to_string()),
            })
        )?;
    } else {
        let l = report.link;
        let j = report.jitter;
        writeln!(ctx.out, "frames {} over {} ticks", report.frames, report.ticks)?;
        writeln!(ctx.out, "link: sent {} dropped {} duplicated {} delivered {}", l.sent, l.dropped, l.duplicated, l.delivered)?;
        writeln!(
            ctx.out,
            "buffer: played {} held {} silent {} late {} duplicates {} malformed {}",
            j.played, j.held, j.silent, j.late, j.duplicates, j.malformed
        )?;
        writeln!(ctx.out, "onsets: {} rendered of {} ({:.0} ms alignment)", report.onsets.len(), pattern.len(), report.latency_ms)?;
        match classified {
            Some(m) => writeln!(ctx.out, "classified: {m} ({})", m.title())?,
            None => writeln!(ctx.out, "classified: -")?,
        }
    }
    if let Some(port) = a.ui_port {
        let bridge = open_bridge(port, a.ui_dir.as_deref())?;
        watch_interrupt();
        writeln!(ctx.err, "console at http://{}/ ; waiting for a client", bridge.local_addr())?;
        if bridge.wait_for_client(Duration::from_secs(60)) {
            replay_history(&bridge, &report.history, 1.0, interrupted);
        }
    }
    Ok(())
}

/// Streams the pattern to a remote listener in real time.
pub(super) fn send_remote(ctx: &mut Ctx, addr: &str, pattern: &RhythmPattern, sensor: &crate::recorder::SensorConfig) -> CliResult {
    let frames = flagged(encode_pattern(pattern, sensor).map_err(|e| CliError::Input(e.to_string()))?);
    let sender = UdpSender::connect(addr).map_err(network)?;
    watch_interrupt();
    let origin = monotonic_now();
    if let Some((first, _)) = frames.first() {
        // well under the receiver's buffering so frames after the probe are not late
        sender.probe(first, Duration::from_millis(20)).map_err(network)?;
    }
    for (frame, flags) in frames.iter().skip(1) {
        if interrupted() {
            writeln!(ctx.err, "interrupted")?;
            break;
        }
        let due = origin + frame.timestamp_us;
        let now = monotonic_now();
        if due > now {
            std::thread::sleep(Duration::from_micros(due - now));
        }
        sender.send(frame, *flags).map_err(|e| match e {
            TransportError::Send(source) => TransportError::Connect { addr: addr.to_string(), source },
            other => other,
        }).map_err(network)?;
    }
    if ctx.json {
        writeln!(ctx.out, "{}", json!({ "sent": frames.len(), "peer": sender.peer().to_string() }))?;
    } else {
        writeln!(ctx.out, "sent {} frames to {}", frames.len(), sender.peer())?;
    }
    Ok(())
}
