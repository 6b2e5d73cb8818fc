//! Command-line front end: argument parsing, seed resolution and reporting.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use anyhow::Context;
use battbayes_core::app::config::{resolve_seed, Overrides, SEED_ENV};
use battbayes_core::app::workflow::{self, CaseResult};
use battbayes_core::app::{AppError, RunConfig, SplitMode};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DOMAIN: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "battbayes", version, about = "Bayesian battery capacity fade estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit the fade law to the training split and write posteriors.
    Train(Common),
    /// Predict the held-out split of a previous `train`.
    Test(Common),
    /// Fade posterior for the `[estimate]` duty and climate.
    Estimate(Common),
    /// Fade posteriors for every `[[scenario.cases]]` entry.
    Scenario(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `out` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// RNG seed; overrides the config and BATT_BAYES_SEED.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    iterations: Option<usize>,
    /// Fraction of iterations discarded as burn-in.
    #[arg(long = "burn-in")]
    burn_in: Option<f64>,
    /// Training fraction.
    #[arg(long)]
    split: Option<f64>,
    #[arg(long = "split-mode", value_parser = parse_mode)]
    split_mode: Option<SplitMode>,
}

fn parse_mode(s: &str) -> Result<SplitMode, String> {
    s.parse()
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            iterations: self.iterations,
            burn_in: self.burn_in,
            split: self.split,
            split_mode: self.split_mode,
            out: self.out.clone(),
        }
    }

    fn load(&self, env_seed: Option<&str>) -> anyhow::Result<(RunConfig, u64)> {
        let mut cfg = RunConfig::load(&self.config)?;
        cfg.apply(&self.overrides());
        let seed = resolve_seed(self.seed, cfg.seed, env_seed)?;
        Ok((cfg, seed))
    }
}

/// Parses `argv` (including the program name) and runs the command, writing
/// reports to `out` and diagnostics to `err`. Returns the process exit code.
pub fn run<I, T>(argv: I, env_seed: Option<&str>, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let rendered = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{rendered}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{rendered}");
                    EXIT_USAGE
                }
            };
        }
    };
    match execute(&cli.command, env_seed, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e:#}");
            if matches!(e.downcast_ref::<AppError>(), Some(AppError::MissingTrained(_))) {
                let _ = writeln!(err, "hint: run `battbayes train` with the same --config/--out first");
            }
            EXIT_DOMAIN
        }
    }
}

/// Entry point for the binary: real argv, real environment, real stdio.
pub fn main_exit_code() -> i32 {
    let env_seed = std::env::var(SEED_ENV).ok();
    run(std::env::args_os(), env_seed.as_deref(), &mut std::io::stdout(), &mut std::io::stderr())
}

fn execute(command: &Command, env_seed: Option<&str>, out: &mut dyn Write) -> anyhow::Result<()> {
    match command {
        Command::Train(c) => {
            let (cfg, seed) = c.load(env_seed)?;
            let r = workflow::train(&cfg, seed)?;
            writeln!(out, "trained on {} units ({} held out), seed {seed}", r.train_units, r.test_units)?;
            writeln!(out, "{:<8} {:>12} {:>12} {:>12} {:>12} {:>8}", "param", "mean", "sd", "ci_low", "ci_high", "ess")?;
            for p in &r.parameters {
                writeln!(
                    out,
                    "{:<8} {:>12.4} {:>12.4} {:>12.4} {:>12.4} {:>8.0}",
                    p.variable, p.mean, p.sd, p.ci_low, p.ci_high, p.ess
                )?;
            }
            writeln!(out, "training fit: R2 {:.4}, RMSD {:.2}%", r.metrics.r2, r.metrics.rmsd_pct)?;
            writeln!(out, "wrote {}", r.out.display())?;
        }
        Command::Test(c) => {
            let (cfg, seed) = c.load(env_seed)?;
            let r = workflow::test(&cfg, seed)?;
            writeln!(out, "test on {} units: R2 {:.4}, RMSD {:.2}%", r.metrics.n, r.metrics.r2, r.metrics.rmsd_pct)?;
            writeln!(out, "wrote {}", r.out.display())?;
        }
        Command::Estimate(c) => {
            let (cfg, seed) = c.load(env_seed)?;
            let r = workflow::estimate(&cfg, seed)?;
            report_cases(out, std::slice::from_ref(&r))?;
            let dir = cfg.out_dir()?.join("estimate");
            writeln!(out, "wrote {}", dir.display())?;
        }
        Command::Scenario(c) => {
            let (cfg, seed) = c.load(env_seed)?;
            let results = workflow::scenario(&cfg, seed).context("scenario sweep failed")?;
            report_cases(out, &results)?;
            writeln!(out, "wrote {}", cfg.out_dir()?.join("scenario").display())?;
        }
    }
    Ok(())
}

fn report_cases(out: &mut dyn Write, results: &[CaseResult]) -> std::io::Result<()> {
    writeln!(out, "{:<16} {:>10} {:>10} {:>10} {:>10}", "case", "fade_%", "sd", "ci_low", "ci_high")?;
    for r in results {
        writeln!(
            out,
            "{:<16} {:>10.3} {:>10.3} {:>10.3} {:>10.3}",
            r.name, r.fade.mean, r.fade.sd, r.fade.ci_low, r.fade.ci_high
        )?;
    }
    Ok(())
}
