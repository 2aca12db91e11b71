//! `estimate`: runs one configured experiment and writes its artifacts.
//!
//! ```text
//! estimate <config> [--out DIR] [--seed N] [--threads N] [--verbose]
//! ```
//!
//! Config schema (TOML):
//!
//! | key | type | notes |
//! |---|---|---|
//! | `experiment` | string | required; one of `skorokhod-demo`, `penalization-sweep`, `mortensen`, `viscosity-sweep`, `filtering`, `identification`, `boundary-table` |
//! | `seed` | integer | required for `filtering` |
//! | `output` | path | default `out/<experiment>` |
//! | `[scenario] preset` | string | a builtin scenario name |
//! | `[scenario.inline]` | table | a full scenario; see `ProblemSpec` |
//! | `[grid]` | `xmax`, `nx`, `t_end`, `nt` | overrides the scenario grid |
//! | `[params]` | `eps`, `kappa`, `window`, `control_step`, `levels`, `particles`, `radius`, `small_noise_eps` | experiment knobs |
//!
//! Unknown keys are rejected. Exit status: 0 when every check passes, 1 on
//! a failed check or numerical error, 2 on a config error, 3 on IO errors.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::Parser;
use mortensen::experiment::{run, ExperimentConfig};
use mortensen::Error;

#[derive(Debug, Parser)]
#[command(name = "estimate", version, about = "Run a state-estimation experiment from a TOML config")]
struct Args {
    /// Experiment config file.
    config: PathBuf,
    /// Output directory (overrides `output` in the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed (overrides `seed` in the config).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for parallel sections.
    #[arg(long)]
    threads: Option<usize>,
    /// Echo the run log to stderr.
    #[arg(long)]
    verbose: bool,
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<Error>() {
        Some(e) if e.is_io() => 3,
        Some(e) if e.is_numeric() => 1,
        Some(_) => 2,
        None => 1,
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    match real_main(&args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn real_main(args: &Args) -> anyhow::Result<bool> {
    if let Some(n) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let mut cfg = ExperimentConfig::from_path(&args.config)?;
    if args.seed.is_some() {
        cfg.seed = args.seed;
    }
    let out = args
        .out
        .clone()
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| PathBuf::from("out").join(cfg.experiment.as_str()));
    let summary = run(&cfg, &out)?;
    if args.verbose {
        if let Ok(log) = std::fs::read_to_string(out.join("run.log")) {
            eprint!("{log}");
        }
    }
    for c in &summary.checks {
        println!("{} {}", if c.passed { "pass" } else { "FAIL" }, c.name);
    }
    println!("wrote {} files to {}", summary.files.len(), out.display());
    Ok(summary.passed())
}
