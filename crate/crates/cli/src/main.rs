#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Experiment driver.
//!
//! Exit codes: 0 success, 1 configuration error, 2 a model assumption or
//! contract failed, 3 a verification check failed.

mod config;
mod error;
mod output;
mod run;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use levy_ou::par::Execution;

use crate::config::ExperimentConfig;
use crate::error::{CliError, EXIT_VERIFICATION_FAILED};
use crate::output::{Manifest, Output};
use crate::run::{output_dir, run, Command, Context};

#[derive(Parser)]
#[command(name = "levy-ou", version, about = "Simulate and verify Lévy-driven OU systems and stable integrals")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Args)]
struct RunArgs {
    /// TOML experiment configuration.
    config: PathBuf,
    /// Dotted overrides, e.g. `--set simulate.reps=100`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Output directory; defaults to the config's `output_dir`, then `$LEVYOU_OUT`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; results do not depend on this.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Sub {
    /// Path ensembles of the projected or ε-split process.
    Simulate(RunArgs),
    /// Regularity criteria and classification of a model.
    Criteria(RunArgs),
    /// Maximal-jump law and large-jump coordinate counts.
    VerifyJumps(RunArgs),
    /// Sup bound for the small-jump remainder on coordinate windows.
    VerifySupbound(RunArgs),
    /// Marginal law of the truncated series against the direct sampler.
    VerifyMarginal(RunArgs),
    /// Stable-integral paths and distribution checks.
    StableIntegral(RunArgs),
    /// Recompute the sup-bound calibration constant.
    Calibrate(RunArgs),
    /// Repeat the run recorded in a manifest.
    Rerun {
        manifest: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

fn execute(cmd: Command, cfg: ExperimentConfig, base: &Path, common: &Common) -> Result<bool, CliError> {
    let dir = output_dir(common.out.as_deref(), &cfg);
    let manifest = Manifest::new(cmd.name(), &cfg);
    let mut out = Output::create(&dir, &manifest.config_hash)?;
    std::fs::write(dir.join("manifest.toml"), manifest.to_text())?;
    let ctx = Context { cfg, base: base.to_path_buf(), exec: Execution::default() };
    let mut go = || run(cmd, &ctx, &mut out);
    let passed = match common.workers {
        Some(0) => return Err(CliError::Config("--workers must be at least 1".into())),
        Some(n) => rayon_pool(n)?.install(go)?,
        None => go()?,
    };
    for f in out.written() {
        println!("{}", dir.join(f).display());
    }
    Ok(passed)
}

#[cfg(feature = "parallel")]
fn rayon_pool(n: usize) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))
}

#[cfg(not(feature = "parallel"))]
struct Inline;

#[cfg(not(feature = "parallel"))]
impl Inline {
    fn install<R>(&self, f: impl FnOnce() -> R) -> R {
        f()
    }
}

#[cfg(not(feature = "parallel"))]
fn rayon_pool(_: usize) -> Result<Inline, CliError> {
    Ok(Inline)
}

fn dispatch(cli: Cli) -> Result<bool, CliError> {
    let (cmd, args) = match cli.command {
        Sub::Simulate(a) => (Command::Simulate, a),
        Sub::Criteria(a) => (Command::Criteria, a),
        Sub::VerifyJumps(a) => (Command::VerifyJumps, a),
        Sub::VerifySupbound(a) => (Command::VerifySupbound, a),
        Sub::VerifyMarginal(a) => (Command::VerifyMarginal, a),
        Sub::StableIntegral(a) => (Command::StableIntegral, a),
        Sub::Calibrate(a) => (Command::Calibrate, a),
        Sub::Rerun { manifest, common } => {
            let m = Manifest::load(&manifest)?;
            let cmd = Command::from_name(&m.command)
                .ok_or_else(|| CliError::Config(format!("manifest names unknown command {}", m.command)))?;
            let cfg = ExperimentConfig::parse(&m.config_text(), &[])?;
            if cfg.hash() != m.config_hash {
                return Err(CliError::Config("manifest config does not match its hash".into()));
            }
            let base = manifest.parent().map(Path::to_path_buf).unwrap_or_default();
            return execute(cmd, cfg, &base, &common);
        }
    };
    let cfg = ExperimentConfig::load(&args.config, &args.overrides)?;
    let base = args.config.parent().map(Path::to_path_buf).unwrap_or_default();
    execute(cmd, cfg, &base, &args.common)
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("levy-ou: verification failed");
            ExitCode::from(EXIT_VERIFICATION_FAILED)
        }
        Err(e) => {
            eprintln!("levy-ou: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
