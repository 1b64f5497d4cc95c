//! `ergolab`: run one experiment from a TOML config and write CSV/JSON
//! outputs plus a `manifest.json` into the output directory.

mod config;
mod experiments;
mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{Config, Experiment};
use manifest::Manifest;

#[derive(Debug, thiserror::Error)]
pub enum Failure {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
}

impl From<ergolab::Error> for Failure {
    fn from(e: ergolab::Error) -> Self {
        Failure::Config(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "ergolab", version, about = "Quantitative ergodic theory experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Estimate one uniformity seminorm.
    Seminorm(Common),
    /// Build a weight from an orbit and evaluate the orthogonality criterion.
    Criterion(Common),
    /// Criterion followed by weighted averages over target systems.
    Rtt(Common),
    /// Check the finitary van der Corput inequality on random sequences.
    Vdc(Common),
    /// Decay of lifted bilinear averages on the three-fold self-joining.
    Extension(Common),
    /// Compare orbit averages with fibre integrals at sampled points.
    Generic(Common),
}

#[derive(Debug, Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the `seed` key of the config.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Run even if the configured sizes exceed the cost caps.
    #[arg(long)]
    force: bool,
}

impl Command {
    fn split(&self) -> (Experiment, &Common) {
        match self {
            Command::Seminorm(c) => (Experiment::Seminorm, c),
            Command::Criterion(c) => (Experiment::Criterion, c),
            Command::Rtt(c) => (Experiment::Rtt, c),
            Command::Vdc(c) => (Experiment::Vdc, c),
            Command::Extension(c) => (Experiment::Extension, c),
            Command::Generic(c) => (Experiment::Generic, c),
        }
    }
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var("ERGOLAB_THREADS") else {
        return Ok(());
    };
    let n: usize =
        raw.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
            Failure::Config(format!("ERGOLAB_THREADS must be a positive integer, got `{raw}`"))
        })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Config(format!("cannot size the thread pool: {e}")))
}

fn write_outputs(dir: &Path, files: &[(String, String)]) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(|e| Failure::Io(format!("cannot create {}: {e}", dir.display())))?;
    for (name, body) in files {
        let path = dir.join(name);
        std::fs::write(&path, body)
            .map_err(|e| Failure::Io(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (exp, common) = cli.command.split();
    let mut manifest = Manifest::start(exp);

    let outcome = configure_threads()
        .and_then(|_| Config::load(&common.config))
        .and_then(|(cfg, bytes)| {
            manifest.set_config(&bytes);
            if let Some(named) = cfg.experiment {
                if named != exp {
                    return Err(Failure::Config(format!(
                        "config is for experiment `{}` but `{}` was requested",
                        named.name(),
                        exp.name()
                    )));
                }
            }
            let seed = common.seed.or(cfg.seed).unwrap_or(0);
            manifest.seed = seed;
            experiments::run(exp, &cfg, seed, common.force)
        });

    let code = match outcome {
        Ok(out) => {
            manifest.violations = out.violations.clone();
            manifest.outputs = out.files.iter().map(|(n, _)| n.clone()).collect();
            manifest.status = if out.violations.is_empty() {
                "ok"
            } else {
                "invariant_violation"
            }
            .into();
            if let Err(e) = write_outputs(&common.out, &out.files) {
                eprintln!("error: {e}");
                manifest.status = "io_error".into();
                manifest.error = Some(e.to_string());
                manifest.outputs.clear();
                ExitCode::from(1)
            } else {
                for v in &out.violations {
                    eprintln!("invariant violated: {v}");
                }
                if out.violations.is_empty() {
                    ExitCode::SUCCESS
                } else {
                    ExitCode::from(2)
                }
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            manifest.status = "config_error".into();
            manifest.error = Some(e.to_string());
            ExitCode::from(1)
        }
    };

    manifest.finish();
    if let Err(e) = write_outputs(&common.out, &[("manifest.json".into(), manifest.to_json())]) {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    code
}
