//! Command-line front end: `verify`, `run <config.json>` and `presets`.

pub mod config;
pub mod run;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use serde_json::json;

pub use config::ExperimentConfig;
pub use run::{exit_code_for, run_experiment};

use crate::error::Error;
use crate::process_gen::PRESETS;
use crate::verification;

pub const EXIT_OK: u8 = 0;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;
pub const EXIT_ACCEPTANCE: u8 = 4;

#[derive(Debug, Parser)]
#[command(name = "hwl", version, about = "Hölder-space invariance principle experiments")]
pub struct Cli {
    /// Master seed; overrides the config file.
    #[arg(long, global = true, env = "HWL_SEED")]
    pub seed: Option<u64>,
    /// Output directory; overrides the config file.
    #[arg(long, global = true, env = "HWL_OUT_DIR")]
    pub out_dir: Option<PathBuf>,
    /// Monte Carlo replicates; overrides the config file.
    #[arg(long, global = true, env = "HWL_PATHS")]
    pub paths: Option<usize>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "HWL_THREADS")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the built-in acceptance suite.
    Verify,
    /// Run the experiment described by a JSON config.
    Run { config: PathBuf },
    /// List the model presets.
    Presets,
}

fn report_error(err: &Error, code: u8) {
    let kind = match err {
        Error::Config(_) | Error::Json(_) => "config",
        Error::Domain(_) => "domain",
        Error::Integrability(_) => "integrability",
        Error::Size(_) => "size",
        Error::InvalidModel(_) => "invalid-model",
        Error::Numerical(_) => "numerical",
        Error::Calibration(_) => "calibration",
        Error::Io(_) => "io",
    };
    eprintln!("{}", json!({ "error": kind, "message": err.to_string(), "exit_code": code }));
}

fn load_config(cli: &Cli, path: &PathBuf) -> Result<ExperimentConfig, Error> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut cfg: ExperimentConfig =
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(p) = cli.paths {
        cfg.paths = p;
    }
    if let Some(d) = &cli.out_dir {
        cfg.out_dir = Some(d.display().to_string());
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    if let Some(t) = cli.threads {
        // fails only if a pool already exists, in which case it is kept
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    match &cli.command {
        Command::Presets => {
            for (name, text) in PRESETS {
                println!("{name:<18} {text}");
            }
            EXIT_OK
        }
        Command::Verify => {
            let seed = cli.seed.unwrap_or(verification::DEFAULT_SEED);
            let outcomes = verification::run_all(seed, |o| println!("{}", o.line()));
            if outcomes.iter().all(|o| o.passed) {
                EXIT_OK
            } else {
                EXIT_ACCEPTANCE
            }
        }
        Command::Run { config } => {
            let result = load_config(&cli, config).and_then(|cfg| {
                let dir = PathBuf::from(cfg.out_dir.clone().unwrap_or_else(|| "out".into()));
                run_experiment(&cfg, &dir)
            });
            match result {
                Ok(files) => {
                    for f in files {
                        println!("{}", f.display());
                    }
                    EXIT_OK
                }
                Err(e) => {
                    let code = exit_code_for(&e);
                    report_error(&e, code);
                    code
                }
            }
        }
    }
}
