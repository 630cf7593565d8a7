//! The experiment trait and its registry.  Every experiment kind sits behind
//! the same interface, registered by name; the CLI builds its subcommands
//! from the registry and dispatches by lookup.

use std::path::PathBuf;
use thiserror::Error;

use crate::config::ExperimentConfig;
use crate::record::ResultRecord;

/// Harness-level errors, mapped to process exit codes:
/// config 2, numeric 3, finding 4.
#[derive(Debug, Error)]
pub enum LabError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("finding: {0}")]
    Finding(String),
}

impl LabError {
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Config(_) => 2,
            LabError::Numeric(_) => 3,
            LabError::Finding(_) => 4,
        }
    }

    /// Core domain errors signal bad inputs (config); the rest are numeric.
    pub fn from_core(e: anderson_core::CoreError) -> Self {
        match e {
            anderson_core::CoreError::Domain(msg) => LabError::Config(msg),
            other => LabError::Numeric(other.to_string()),
        }
    }

    pub fn config(e: impl std::fmt::Display) -> Self {
        LabError::Config(e.to_string())
    }

    pub fn numeric(e: impl std::fmt::Display) -> Self {
        LabError::Numeric(e.to_string())
    }
}

/// Run-time context shared by experiments.
#[derive(Clone, Debug)]
pub struct RunContext {
    pub out_dir: PathBuf,
}

impl RunContext {
    /// Output directory resolution: explicit flag, then the environment
    /// default, then ./runs.
    pub fn resolve(flag: Option<PathBuf>) -> Self {
        let out_dir = flag
            .or_else(|| std::env::var_os("ANDERSON_LAB_OUT").map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("runs"));
        RunContext { out_dir }
    }
}

/// One experiment kind: a named strategy over validated configs.
pub trait Experiment: Sync + Send {
    /// Registry key; doubles as the CLI subcommand.
    fn name(&self) -> &'static str;

    /// One-line description for the CLI.
    fn describe(&self) -> &'static str;

    fn run(&self, cfg: &ExperimentConfig, ctx: &RunContext) -> Result<ResultRecord, LabError>;
}

/// All registered experiments.
pub fn registry() -> Vec<Box<dyn Experiment>> {
    use crate::experiments::*;
    vec![
        Box::new(spectrum::Spectrum),
        Box::new(lifshitz::Lifshitz),
        Box::new(wegner_mc::WegnerMc),
        Box::new(dynloc::Dynloc),
        Box::new(decompose::Decompose),
        Box::new(sperner::Sperner),
        Box::new(cone_check::ConeCheck),
        Box::new(msa_plan::MsaPlan),
        Box::new(combine::Combine),
        Box::new(annulus::Annulus),
    ]
}

/// Look an experiment up by its registered name.
pub fn find(name: &str) -> Option<Box<dyn Experiment>> {
    registry().into_iter().find(|e| e.name() == name)
}

/// Shared entry point: validate the config kind against the requested
/// strategy, run it, stamp the wall clock, write the record.  Findings stay
/// on the record; callers translate them into exit status 4.
pub fn execute(
    name: &str,
    cfg: &ExperimentConfig,
    ctx: &RunContext,
) -> Result<ResultRecord, LabError> {
    let exp = find(name).ok_or_else(|| LabError::Config(format!("unknown experiment {name}")))?;
    if cfg.spec.kind_name() != name {
        return Err(LabError::Config(format!(
            "config kind {} does not match subcommand {name}",
            cfg.spec.kind_name()
        )));
    }
    let started = std::time::Instant::now();
    let mut record = exp.run(cfg, ctx)?;
    record.wall_clock_ms = started.elapsed().as_millis();
    record.write_json(&ctx.out_dir)?;
    Ok(record)
}
