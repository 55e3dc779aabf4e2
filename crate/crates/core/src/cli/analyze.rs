use std::fs::File;
use std::path::PathBuf;

use clap::Args;

use super::{CliError, CliResult, Ctx};
use crate::experiment::{read_trial_log, AnalysisReport};

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Trial log CSV
    pub log: PathBuf,
}

pub fn run(ctx: &mut Ctx, a: &AnalyzeArgs) -> CliResult {
    let file = File::open(&a.log).map_err(|e| CliError::Input(format!("{}: {e}", a.log.display())))?;
    let records = read_trial_log(file).map_err(|e| CliError::Input(format!("{}: {e}", a.log.display())))?;
    let report = AnalysisReport::from_records(&records).map_err(|e| CliError::Input(e.to_string()))?;
    if ctx.json {
        writeln!(ctx.out, "{}", report.to_json())?;
    } else {
        write!(ctx.out, "{report}")?;
    }
    Ok(())
}
