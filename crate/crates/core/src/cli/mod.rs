//! `musinger` command line. Exit codes: 0 success, 2 input or parse error,
//! 3 network error, 4 console UI unavailable.

mod analyze;
mod kinematics;
mod live;
mod play;
mod trial;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::OnceLock;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{load_config, ConfigError};
use crate::model::{Condition, MelodyId};
use crate::pipeline::PipelineConfig;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NETWORK: i32 = 3;
pub const EXIT_NO_UI: i32 = 4;

#[derive(Debug)]
pub enum CliError {
    /// Output reader went away; not worth reporting.
    BrokenPipe,
    Input(String),
    Network(String),
    MissingUi(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::BrokenPipe => EXIT_OK,
            CliError::Input(_) => EXIT_INPUT,
            CliError::Network(_) => EXIT_NETWORK,
            CliError::MissingUi(_) => EXIT_NO_UI,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::BrokenPipe => "",
            CliError::Input(m) | CliError::Network(m) | CliError::MissingUi(m) => m,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        if e.kind() == std::io::ErrorKind::BrokenPipe {
            return CliError::BrokenPipe;
        }
        CliError::Input(e.to_string())
    }
}

pub type CliResult = Result<(), CliError>;

#[derive(Debug, Parser)]
#[command(name = "musinger", version, about = "Rhythm capture, streaming and tactile rendering")]
pub struct Cli {
    /// Key-value config file (falls back to $MUSINGER_CONFIG)
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Seed for every random choice
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Machine-readable output
    #[arg(long, global = true)]
    pub json: bool,
    /// More log output (-v info, -vv debug)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Stream a melody through the display simulator
    Play(play::PlayArgs),
    /// Live streaming between two processes
    Stream(live::StreamArgs),
    /// Run one blind recognition session
    Trial(trial::TrialArgs),
    /// Confusion matrices, accuracy and ANOVA for a trial log
    Analyze(analyze::AnalyzeArgs),
    /// Forward/inverse kinematics and workspace queries
    #[command(allow_negative_numbers = true)]
    Kinematics(kinematics::KinematicsArgs),
}

/// Fault injection on the in-process loopback link.
#[derive(Debug, Clone, Args)]
pub struct FaultArgs {
    /// Use the in-process loopback link
    #[arg(long)]
    pub loopback: bool,
    /// Datagram loss probability
    #[arg(long, value_name = "P")]
    pub loss: Option<f64>,
    /// Uniform extra delay up to MS milliseconds
    #[arg(long, value_name = "MS")]
    pub jitter: Option<f64>,
    /// Datagram duplication probability
    #[arg(long, value_name = "P")]
    pub dup: Option<f64>,
}

impl FaultArgs {
    fn apply(&self, cfg: &mut PipelineConfig) -> CliResult {
        let prob = |name: &str, p: f64| {
            if (0.0..=1.0).contains(&p) {
                Ok(p)
            } else {
                Err(CliError::Input(format!("--{name} must be within 0..1, got {p}")))
            }
        };
        if let Some(p) = self.loss {
            cfg.faults.loss = prob("loss", p)?;
        }
        if let Some(p) = self.dup {
            cfg.faults.duplicate = prob("dup", p)?;
        }
        if let Some(ms) = self.jitter {
            if !(ms.is_finite() && ms >= 0.0) {
                return Err(CliError::Input(format!("--jitter must be non-negative, got {ms}")));
            }
            cfg.faults.jitter_ms = ms;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MelodyArg {
    #[value(name = "A", alias = "a")]
    A,
    #[value(name = "B", alias = "b")]
    B,
    #[value(name = "C", alias = "c")]
    C,
    #[value(name = "D", alias = "d")]
    D,
}

impl From<MelodyArg> for MelodyId {
    fn from(m: MelodyArg) -> Self {
        match m {
            MelodyArg::A => MelodyId::A,
            MelodyArg::B => MelodyId::B,
            MelodyArg::C => MelodyId::C,
            MelodyArg::D => MelodyId::D,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ConditionArg {
    None,
    White,
}

impl From<ConditionArg> for Condition {
    fn from(c: ConditionArg) -> Self {
        match c {
            ConditionArg::None => Condition::NoNoise,
            ConditionArg::White => Condition::WhiteNoise,
        }
    }
}

/// Shared context for subcommands.
pub struct Ctx<'a> {
    pub seed: u64,
    pub json: bool,
    pub config_path: Option<&'a Path>,
    pub out: &'a mut dyn Write,
    pub err: &'a mut dyn Write,
}

impl Ctx<'_> {
    fn pipeline_config(&self, faults: Option<&FaultArgs>) -> Result<PipelineConfig, CliError> {
        let mut cfg = load_config(self.config_path)?;
        if let Some(f) = faults {
            f.apply(&mut cfg)?;
        }
        Ok(cfg)
    }
}

static INTERRUPTED: AtomicBool = AtomicBool::new(false);

/// Installs the Ctrl-C handler once per process.
fn watch_interrupt() {
    static INSTALLED: OnceLock<()> = OnceLock::new();
    INSTALLED.get_or_init(|| {
        if let Err(e) = ctrlc::set_handler(|| INTERRUPTED.store(true, Ordering::SeqCst)) {
            log::warn!("cannot install interrupt handler: {e}");
        }
    });
    INTERRUPTED.store(false, Ordering::SeqCst);
}

fn interrupted() -> bool {
    INTERRUPTED.load(Ordering::SeqCst)
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp_millis()
        .try_init();
}

/// Parses `args` (including the program name) and runs the subcommand.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    init_logging(cli.verbose);
    let mut ctx = Ctx { seed: cli.seed, json: cli.json, config_path: cli.config.as_deref(), out, err };
    let result = match &cli.command {
        Command::Play(a) => play::run(&mut ctx, a),
        Command::Stream(a) => live::run(&mut ctx, a),
        Command::Trial(a) => trial::run(&mut ctx, a),
        Command::Analyze(a) => analyze::run(&mut ctx, a),
        Command::Kinematics(a) => kinematics::run(&mut ctx, a),
    };
    match result {
        Ok(()) | Err(CliError::BrokenPipe) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(ctx.err, "musinger: {}", e.message());
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        super::Cli::command().debug_assert();
    }
}
