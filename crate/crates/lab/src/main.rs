//! Command-line entry point.  Subcommands are generated from the experiment
//! registry; each takes a JSON config plus seed/output/threads overrides.
//!
//! Exit codes: 0 success, 2 config error, 3 numeric failure, 4 a
//! lemma-violation finding was recorded.

use anderson_lab::config::ExperimentConfig;
use anderson_lab::experiment::{execute, registry, LabError, RunContext};
use anderson_lab::sweep::{run_sweep, SweepConfig, SweepOutcome};
use clap::{Arg, ArgAction, Command};
use std::path::PathBuf;

fn main() {
    std::process::exit(run());
}

fn run() -> i32 {
    let mut cmd = Command::new("anderson-lab")
        .about("finite-volume experiments for non-stationary Anderson models")
        .subcommand_required(true)
        .arg_required_else_help(true);
    for exp in registry() {
        cmd = cmd.subcommand(experiment_command(exp.name(), exp.describe()));
    }
    cmd = cmd.subcommand(
        experiment_command("sweep", "run a list of configs with derived per-entry seeds")
            .arg(
                Arg::new("parallelism")
                    .long("parallelism")
                    .value_parser(clap::value_parser!(usize))
                    .help("worker threads for sweep entries (alias of --threads)"),
            ),
    );

    let matches = cmd.get_matches();
    let (name, sub) = matches.subcommand().expect("subcommand required");

    let threads = sub
        .get_one::<usize>("threads")
        .copied()
        .or_else(|| sub.try_get_one::<usize>("parallelism").ok().flatten().copied());
    if let Some(k) = threads {
        // ignore failure: the global pool can only be set once per process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(k).build_global();
    }
    let ctx = RunContext::resolve(sub.get_one::<PathBuf>("out").cloned());
    let config_path = sub.get_one::<PathBuf>("config").expect("required");

    if name == "sweep" {
        return run_sweep_command(config_path, &ctx);
    }

    let mut cfg = match ExperimentConfig::load(config_path) {
        Ok(cfg) => cfg,
        Err(e) => return report_error(e),
    };
    if let Some(seed) = sub.get_one::<u64>("seed") {
        cfg.seed = *seed;
    }
    match execute(name, &cfg, &ctx) {
        Ok(record) => {
            println!("{}", serde_json::to_string_pretty(&record).unwrap());
            if record.findings.is_empty() {
                0
            } else {
                eprintln!("findings recorded: {}", record.findings.join("; "));
                4
            }
        }
        Err(e) => report_error(e),
    }
}

fn experiment_command(name: &'static str, about: &'static str) -> Command {
    Command::new(name)
        .about(about)
        .arg(
            Arg::new("config")
                .long("config")
                .required(true)
                .value_parser(clap::value_parser!(PathBuf))
                .help("JSON experiment configuration"),
        )
        .arg(
            Arg::new("seed")
                .long("seed")
                .value_parser(clap::value_parser!(u64))
                .help("override the config seed"),
        )
        .arg(
            Arg::new("out")
                .long("out")
                .value_parser(clap::value_parser!(PathBuf))
                .help("output directory (default $ANDERSON_LAB_OUT or ./runs)"),
        )
        .arg(
            Arg::new("threads")
                .long("threads")
                .value_parser(clap::value_parser!(usize))
                .action(ArgAction::Set)
                .help("worker threads"),
        )
}

fn run_sweep_command(path: &PathBuf, ctx: &RunContext) -> i32 {
    let sweep = match SweepConfig::load(path) {
        Ok(s) => s,
        Err(e) => return report_error(e),
    };
    let outcomes = run_sweep(&sweep, ctx);
    let mut worst = 0;
    for (idx, outcome) in outcomes.iter().enumerate() {
        match outcome {
            SweepOutcome::Done(rec) => {
                println!(
                    "entry {idx}: ok kind={} fingerprint={} findings={}",
                    rec.kind,
                    rec.config_fingerprint,
                    rec.findings.len()
                );
                if !rec.findings.is_empty() {
                    worst = worst.max(4);
                }
            }
            SweepOutcome::Failed(e) => {
                eprintln!("entry {idx}: {e}");
                worst = worst.max(e.exit_code());
            }
        }
    }
    worst
}

fn report_error(e: LabError) -> i32 {
    eprintln!("{e}");
    e.exit_code()
}
