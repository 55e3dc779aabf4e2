use std::fs::OpenOptions;
use std::io::BufRead;
use std::path::PathBuf;
use std::sync::mpsc::{self, Receiver};
use std::sync::{Mutex, OnceLock};
use std::time::Duration;

use clap::{Args, ValueEnum};
use rand::Rng;
use serde_json::json;

use super::live::{open_bridge, replay_history};
use super::{interrupted, watch_interrupt, CliError, CliResult, ConditionArg, Ctx, FaultArgs};
use crate::bridge::{BridgeMessage, BridgeServer};
use crate::experiment::{
    build_session_plan, overall_accuracy, run_session, write_trial_log, AnswerError, AnswerSource, ClassifierAnswers,
    ExperimentError, PresentError, Presenter, SessionConfig, Stimulus,
};
use crate::model::{Condition, MelodyId, RhythmPattern};
use crate::pipeline::LoopbackPresenter;
use crate::rng::substream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AnswerMode {
    /// Rhythm classifier on the rendered onsets
    Machine,
    /// Browser console via the bridge
    Ui,
    /// Letters typed on standard input
    Stdin,
}

#[derive(Debug, Args)]
pub struct TrialArgs {
    #[arg(long, default_value = "p1")]
    pub participant: String,
    #[arg(long, value_enum, default_value = "none")]
    pub condition: ConditionArg,
    #[arg(long, value_enum, default_value = "machine")]
    pub answers: AnswerMode,
    /// Presentations of each melody
    #[arg(long, default_value_t = 3)]
    pub reps: usize,
    /// Trial log to append to
    #[arg(long, value_name = "PATH", default_value = "trials.csv")]
    pub log: PathBuf,
    /// Seconds to wait for each answer
    #[arg(long, value_name = "S", default_value_t = 60.0)]
    pub timeout: f64,
    #[command(flatten)]
    pub faults: FaultArgs,
    /// Console bridge port (required for --answers ui)
    #[arg(long, value_name = "PORT")]
    pub ui_port: Option<u16>,
    /// Console static assets
    #[arg(long, value_name = "DIR", requires = "ui_port")]
    pub ui_dir: Option<PathBuf>,
    /// Playback speed of the rendering sent to the console
    #[arg(long, default_value_t = 1.0)]
    pub speed: f64,
}

/// Lines of standard input, read on a background thread shared by all sessions.
fn stdin_lines() -> &'static Mutex<Receiver<String>> {
    static LINES: OnceLock<Mutex<Receiver<String>>> = OnceLock::new();
    LINES.get_or_init(|| {
        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            for line in std::io::stdin().lock().lines() {
                let Ok(line) = line else { break };
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Mutex::new(rx)
    })
}

struct StdinAnswers;

impl AnswerSource for StdinAnswers {
    fn answer(&mut self, stimulus: &Stimulus, timeout: Duration) -> Result<MelodyId, AnswerError> {
        let lines = stdin_lines().lock().unwrap();
        let deadline = std::time::Instant::now() + timeout;
        loop {
            eprint!("trial {}: which melody? [A-D] ", stimulus.trial_index + 1);
            let left = deadline.saturating_duration_since(std::time::Instant::now());
            match lines.recv_timeout(left) {
                Ok(line) => match line.trim().parse::<MelodyId>() {
                    Ok(m) => return Ok(m),
                    Err(_) => eprintln!("answer with A, B, C or D"),
                },
                Err(mpsc::RecvTimeoutError::Timeout) => return Err(AnswerError::Timeout),
                Err(mpsc::RecvTimeoutError::Disconnected) => {
                    return Err(AnswerError::Unavailable("standard input closed".into()))
                }
            }
        }
    }
}

struct UiAnswers<'a>(&'a BridgeServer);

impl AnswerSource for UiAnswers<'_> {
    fn answer(&mut self, stimulus: &Stimulus, timeout: Duration) -> Result<MelodyId, AnswerError> {
        let bridge = self.0;
        if bridge.client_count() == 0 {
            return Err(AnswerError::Unavailable("console disconnected".into()));
        }
        bridge.drain();
        bridge.broadcast(&BridgeMessage::Prompt { trial_index: stimulus.trial_index });
        let deadline = std::time::Instant::now() + timeout;
        loop {
            let left = deadline.saturating_duration_since(std::time::Instant::now());
            if left.is_zero() {
                return Err(AnswerError::Timeout);
            }
            if let Some(BridgeMessage::Answer { melody }) = bridge.recv_timeout(left.min(Duration::from_millis(100))) {
                return Ok(melody);
            }
            if bridge.client_count() == 0 {
                return Err(AnswerError::Unavailable("console disconnected".into()));
            }
        }
    }
}

/// Renders through the loopback pipeline and replays the linkage motion on
/// the console.
struct ConsolePresenter<'a> {
    inner: LoopbackPresenter,
    bridge: &'a BridgeServer,
    speed: f64,
}

impl Presenter for ConsolePresenter<'_> {
    fn present(&mut self, trial_index: u32, pattern: &RhythmPattern, condition: Condition) -> Result<Option<RhythmPattern>, PresentError> {
        let perceived = self.inner.present(trial_index, pattern, condition)?;
        let report = self.inner.reports.last().expect("just presented");
        replay_history(self.bridge, &report.history, self.speed, interrupted);
        Ok(perceived)
    }
}

pub fn run(ctx: &mut Ctx, a: &TrialArgs) -> CliResult {
    if a.participant.is_empty() || a.participant.contains([',', '"', '\n']) {
        return Err(CliError::Input("participant id must be non-empty without commas or quotes".into()));
    }
    if !(a.timeout.is_finite() && a.timeout > 0.0) {
        return Err(CliError::Input("--timeout must be positive".into()));
    }
    let cfg = ctx.pipeline_config(Some(&a.faults))?;
    let condition: Condition = a.condition.into();
    let plan = build_session_plan(&MelodyId::ALL, a.reps, ctx.seed).map_err(|e| CliError::Input(e.to_string()))?;
    let presenter_seed: u64 = substream(ctx.seed, "presenter").random();
    let mut presenter = LoopbackPresenter::new(cfg, presenter_seed);
    let session = SessionConfig { answer_timeout: Duration::from_secs_f64(a.timeout) };

    let outcome = match a.answers {
        AnswerMode::Machine => run_session(&a.participant, &plan, condition, &mut presenter, &mut ClassifierAnswers::default(), &session),
        AnswerMode::Stdin => run_session(&a.participant, &plan, condition, &mut presenter, &mut StdinAnswers, &session),
        AnswerMode::Ui => {
            let port = a.ui_port.ok_or_else(|| CliError::MissingUi("--answers ui needs --ui-port".into()))?;
            let bridge = open_bridge(port, a.ui_dir.as_deref())?;
            watch_interrupt();
            writeln!(ctx.err, "console at http://{}/ ; waiting for the subject view", bridge.local_addr())?;
            if !bridge.wait_for_client(session.answer_timeout) {
                return Err(CliError::MissingUi(format!("no console connected within {} s", a.timeout)));
            }
            let mut console = ConsolePresenter { inner: presenter, bridge: &bridge, speed: a.speed };
            run_session(&a.participant, &plan, condition, &mut console, &mut UiAnswers(&bridge), &session)
        }
    }
    .map_err(|e| match e {
        ExperimentError::AnswerUnavailable(why) if a.answers == AnswerMode::Ui => CliError::MissingUi(why),
        other => CliError::Input(other.to_string()),
    })?;

    let fresh = std::fs::metadata(&a.log).map(|m| m.len() == 0).unwrap_or(true);
    let file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(&a.log)
        .map_err(|e| CliError::Input(format!("{}: {e}", a.log.display())))?;
    write_trial_log(file, &outcome.records, fresh).map_err(|e| CliError::Input(e.to_string()))?;

    let accuracy = overall_accuracy(&outcome.records).ok();
    if ctx.json {
        writeln!(
            ctx.out,
            "{}",
            json!({
                "participant": a.participant,
                "condition": condition,
                "records": outcome.records.len(),
                "invalid": outcome.invalid,
                "accuracy": accuracy,
                "log": a.log.display().to_string(),
            })
        )?;
    } else {
        writeln!(
            ctx.out,
            "{} trials logged to {} ({} / {})",
            outcome.records.len(),
            a.log.display(),
            a.participant,
            condition
        )?;
        if !outcome.invalid.is_empty() {
            writeln!(ctx.out, "unanswered trials excluded: {:?}", outcome.invalid)?;
        }
        if let Some(acc) = accuracy {
            writeln!(ctx.out, "accuracy: {:.3}", acc)?;
        }
    }
    Ok(())
}
