//! Command-line front-end.
//!
//! Exit codes: 0 success (including expected equalities), 1 failed
//! verification or runtime error, 2 usage or configuration error.

pub mod commands;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::error::Error;
use crate::estimators::Order;
use crate::hit_models::HitKind;
use commands::RunError;
use config::{ConfigError, Overrides, RunConfig};
use output::OutputDir;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "trackfit", version, about = "Standard vs weighted least-squares track fits on a toy silicon tracker")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate one tracker and write histograms and a summary.
    Simulate(Common),
    /// Repeat the simulation for a range of layer counts.
    Sweep(SweepArgs),
    /// Check the covariance identities and variance inequalities.
    Verify(Common),
    /// Tabulate the analytic and exactly convolved line-shapes.
    Lineshape(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// JSON configuration file; every key is optional.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n_layers: Option<usize>,
    #[arg(long)]
    n_tracks: Option<usize>,
    #[arg(long, value_parser = parse_hit_kind)]
    hit_kind: Option<HitKind>,
    #[arg(long, value_parser = parse_order)]
    order: Option<Order>,
    #[arg(long)]
    p_good: Option<f64>,
    #[arg(long)]
    sigma_good: Option<f64>,
    #[arg(long)]
    sigma_bad: Option<f64>,
    /// Output directory [default: ./out/<unix-seconds>-<seed>].
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    n_min: Option<usize>,
    #[arg(long)]
    n_max: Option<usize>,
}

fn parse_hit_kind(s: &str) -> Result<HitKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_order(s: &str) -> Result<Order, String> {
    let v: u8 = s.parse().map_err(|_| format!("expected 2 or 3, got `{s}`"))?;
    Order::try_from(v).map_err(|e| e.to_string())
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            n_layers: self.n_layers,
            n_tracks: self.n_tracks,
            hit_kind: self.hit_kind,
            order: self.order,
            p_good: self.p_good,
            sigma_good: self.sigma_good,
            sigma_bad: self.sigma_bad,
        }
    }

    fn config(&self) -> Result<RunConfig, ConfigError> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        cfg.apply(&self.overrides());
        Ok(cfg)
    }
}

fn exit_code_for(e: &RunError) -> i32 {
    match e {
        RunError::Model(Error::InvalidParameter { .. } | Error::InvalidGrid(_) | Error::TooManyLayers { .. }) => {
            EXIT_USAGE
        }
        _ => EXIT_FAILED,
    }
}

/// Parse `args` (including the program name), run the command and return
/// the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let (name, common) = match &cli.command {
        Command::Simulate(c) => ("simulate", c),
        Command::Sweep(s) => ("sweep", &s.common),
        Command::Verify(c) => ("verify", c),
        Command::Lineshape(c) => ("lineshape", c),
    };
    let mut cfg = match common.config() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    if let Command::Sweep(s) = &cli.command {
        cfg.sweep_n_min = s.n_min.unwrap_or(cfg.sweep_n_min);
        cfg.sweep_n_max = s.n_max.unwrap_or(cfg.sweep_n_max);
    }
    let check = match &cli.command {
        Command::Sweep(_) => cfg.validate_sweep().and_then(|_| cfg.mix().map(|_| ())),
        _ => cfg.validate(),
    };
    if let Err(e) = check {
        eprintln!("error: {e}");
        return EXIT_USAGE;
    }

    let dir = common.out.clone().unwrap_or_else(|| output::default_dir(cfg.seed));
    let mut out = match OutputDir::create(&dir) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: cannot create {}: {e}", dir.display());
            return EXIT_FAILED;
        }
    };
    let result = match &cli.command {
        Command::Simulate(_) => commands::run_simulate(&cfg, &mut out).map(|s| {
            println!("simulate: N={} tracks={} status={:?}", s.n_layers, s.n_tracks, s.status);
            EXIT_OK
        }),
        Command::Sweep(_) => commands::run_sweep(&cfg, &mut out).map(|s| {
            if let Some(sl) = s.slopes {
                println!(
                    "sweep: {} rows; log-log peak slopes standard={:.3} weighted={:.3}",
                    s.rows.len(),
                    sl.peak_standard,
                    sl.peak_weighted
                );
            }
            EXIT_OK
        }),
        Command::Verify(_) => commands::run_verify(&cfg, &mut out).map(|r| {
            println!(
                "verify: covariance {:?} (max |z| {:.2}), inequalities {:?} → {:?}",
                r.covariance.status, r.covariance.max_abs_z, r.inequalities.status, r.status
            );
            if r.status.is_ok() {
                EXIT_OK
            } else {
                EXIT_FAILED
            }
        }),
        Command::Lineshape(_) => commands::run_lineshape(&cfg, &mut out).map(|s| {
            println!("lineshape: Π(0)={} B(0)={}", s.analytic.pi0, s.analytic.b0);
            EXIT_OK
        }),
    };
    match result {
        Ok(code) => match out.finish(name, &cfg) {
            Ok(root) => {
                println!("wrote {}", root.display());
                code
            }
            Err(e) => {
                eprintln!("error: cannot write manifest: {e}");
                EXIT_FAILED
            }
        },
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}
