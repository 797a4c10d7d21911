//! Command-line front end: argument parsing, run configuration, output
//! directory handling and manifests.

mod commands;
pub mod selfcheck;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::finder::MIN_SCAN_GRID;
use crate::io::write_json;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;

/// Environment variable holding the log filter.
pub const LOG_ENV: &str = "OPER_SPECTRA_LOG";

#[derive(Debug, Parser)]
#[command(name = "oper-spectra", version, about = "Real opers, single-valued sections and abelian Hecke eigenvalues")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CommonArgs {
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Transport / integration tolerance.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Worker threads.
    #[arg(long, global = true, default_value_t = 1)]
    pub workers: usize,
    /// Seed for pseudorandom probe points.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct Region {
    /// Rectangle `re_min re_max im_min im_max`.
    #[arg(long, num_args = 4, value_names = ["RE_MIN", "RE_MAX", "IM_MIN", "IM_MAX"], allow_negative_numbers = true)]
    pub rect: Option<Vec<f64>>,
    /// Grid size `nx ny`.
    #[arg(long, num_args = 2, value_names = ["NX", "NY"])]
    pub grid: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case", tag = "name")]
pub enum Command {
    /// Monodromy generators, traces and reality residual of one oper.
    Monodromy {
        #[arg(long)]
        config: PathBuf,
    },
    /// Scan a rectangle of the free accessory parameter for real opers.
    FindReal {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        region: Region,
    },
    /// Sample the single-valued section on a grid.
    Phi {
        #[arg(long)]
        config: PathBuf,
        /// Value `re im` of the free accessory parameter.
        #[arg(long, num_args = 2, allow_negative_numbers = true)]
        mu: Option<Vec<f64>>,
        #[command(flatten)]
        region: Region,
    },
    /// Compare the symmetric-power section with a power of the basic one.
    SymCheck {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, num_args = 2, allow_negative_numbers = true)]
        mu: Option<Vec<f64>>,
        /// Symmetric power.
        #[arg(long, default_value_t = 2)]
        m: usize,
        #[command(flatten)]
        region: Region,
    },
    /// Hyperelliptic curves: periods, harmonic classes, Hecke eigenvalues.
    #[command(subcommand)]
    Abelian(AbelianCommand),
    /// Run every built-in acceptance check and report measured values.
    Selfcheck,
}

#[derive(Debug, Clone, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case", tag = "name")]
pub enum AbelianCommand {
    /// Period matrix and homology basis.
    Periods {
        #[arg(long, alias = "config")]
        curve: PathBuf,
    },
    /// Harmonic classes for the integer vectors listed in the curve file.
    Class {
        #[arg(long, alias = "config")]
        curve: PathBuf,
    },
    /// Hecke eigenvalue `F` sampled along the curve file's path.
    Hecke {
        #[arg(long, alias = "config")]
        curve: PathBuf,
    },
    /// Consistency checks on seeded samples.
    Verify {
        #[arg(long, alias = "config")]
        curve: PathBuf,
    },
}

/// Everything needed to reproduce one run.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub out: PathBuf,
    pub tol: Option<f64>,
    pub workers: usize,
    pub seed: u64,
}

impl RunConfig {
    pub fn from_cli(cli: Cli) -> Result<Self> {
        let config = RunConfig {
            command: cli.command,
            out: cli.common.out,
            tol: cli.common.tol,
            workers: cli.common.workers,
            seed: cli.common.seed,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(t) = self.tol {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::ConfigParse(format!("--tol must be positive, got {t}")));
            }
        }
        if self.workers == 0 {
            return Err(Error::ConfigParse("--workers must be at least 1".into()));
        }
        let region = match &self.command {
            Command::FindReal { region, .. } | Command::Phi { region, .. } | Command::SymCheck { region, .. } => {
                Some(region)
            }
            _ => None,
        };
        if let Some(region) = region {
            if let Some(r) = &region.rect {
                if r.iter().any(|x| !x.is_finite()) || r[0] > r[1] || r[2] > r[3] {
                    return Err(Error::ConfigParse(format!("invalid --rect {r:?}")));
                }
            }
            if let Some(g) = &region.grid {
                let min = if matches!(self.command, Command::FindReal { .. }) { MIN_SCAN_GRID } else { 1 };
                if g.iter().any(|&n| n < min) {
                    return Err(Error::ConfigParse(format!("--grid sizes must be at least {min}, got {g:?}")));
                }
            }
        }
        Ok(())
    }

    /// Input files named on the command line.
    pub fn inputs(&self) -> Vec<PathBuf> {
        match &self.command {
            Command::Monodromy { config }
            | Command::FindReal { config, .. }
            | Command::Phi { config, .. }
            | Command::SymCheck { config, .. } => vec![config.clone()],
            Command::Abelian(
                AbelianCommand::Periods { curve }
                | AbelianCommand::Class { curve }
                | AbelianCommand::Hecke { curve }
                | AbelianCommand::Verify { curve },
            ) => vec![curve.clone()],
            Command::Selfcheck => Vec::new(),
        }
    }

    pub fn command_name(&self) -> &'static str {
        match &self.command {
            Command::Monodromy { .. } => "monodromy",
            Command::FindReal { .. } => "find-real",
            Command::Phi { .. } => "phi",
            Command::SymCheck { .. } => "sym-check",
            Command::Abelian(AbelianCommand::Periods { .. }) => "abelian periods",
            Command::Abelian(AbelianCommand::Class { .. }) => "abelian class",
            Command::Abelian(AbelianCommand::Hecke { .. }) => "abelian hecke",
            Command::Abelian(AbelianCommand::Verify { .. }) => "abelian verify",
            Command::Selfcheck => "selfcheck",
        }
    }
}

#[derive(Debug, Serialize)]
struct FileDigest {
    path: String,
    sha256: String,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    program: &'static str,
    version: &'static str,
    command: &'static str,
    run: &'a RunConfig,
    inputs: Vec<FileDigest>,
    outputs: Vec<FileDigest>,
    status: i32,
    wall_time_seconds: f64,
}

#[derive(Debug, Serialize)]
struct ErrorReport {
    status: i32,
    command: &'static str,
    kind: String,
    message: String,
}

/// Name of the manifest file written beside every run's outputs.
pub const MANIFEST: &str = "manifest.json";

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn digest(path: &Path, label: String) -> Result<FileDigest> {
    let bytes = fs::read(path)?;
    Ok(FileDigest { path: label, sha256: sha256_hex(&bytes) })
}

fn error_kind(e: &Error) -> String {
    let debug = format!("{e:?}");
    debug
        .split(|c: char| !c.is_alphanumeric())
        .next()
        .unwrap_or("Error")
        .to_string()
}

/// Parses arguments and runs; returns the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::new().filter_or(LOG_ENV, "warn")).try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    match RunConfig::from_cli(cli) {
        Ok(config) => run(&config),
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_INPUT
        }
    }
}

/// Runs one command and writes its artifacts plus a manifest into the
/// output directory. Inputs are parsed before anything is written, so an
/// unreadable or malformed input leaves no files behind.
pub fn run(config: &RunConfig) -> i32 {
    let start = Instant::now();
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(config.workers).build() {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return EXIT_FAILURE;
        }
    };
    let prepared = match commands::prepare(config) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return if e.is_input_error() { EXIT_INPUT } else { EXIT_FAILURE };
        }
    };
    if let Err(e) = fs::create_dir_all(&config.out) {
        eprintln!("error: cannot create {}: {e}", config.out.display());
        return EXIT_FAILURE;
    }
    let outcome = pool.install(|| commands::execute(config, prepared));
    let (status, mut outputs) = match outcome {
        Ok(outcome) => (outcome.status, outcome.files),
        Err(e) => {
            eprintln!("error: {e}");
            let report = ErrorReport {
                status: EXIT_FAILURE,
                command: config.command_name(),
                kind: error_kind(&e),
                message: e.to_string(),
            };
            let name = "error.json".to_string();
            if let Err(w) = write_json(&config.out.join(&name), &report) {
                eprintln!("error: cannot write error report: {w}");
            }
            (EXIT_FAILURE, vec![name])
        }
    };
    outputs.sort();
    match write_manifest(config, &outputs, status, start.elapsed().as_secs_f64()) {
        Ok(()) => status,
        Err(e) => {
            eprintln!("error: cannot write manifest: {e}");
            EXIT_FAILURE
        }
    }
}

fn write_manifest(config: &RunConfig, outputs: &[String], status: i32, wall: f64) -> Result<()> {
    let inputs = config
        .inputs()
        .iter()
        .map(|p| digest(p, p.display().to_string()))
        .collect::<Result<Vec<_>>>()?;
    let outputs = outputs
        .iter()
        .map(|name| digest(&config.out.join(name), name.clone()))
        .collect::<Result<Vec<_>>>()?;
    let manifest = Manifest {
        program: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        command: config.command_name(),
        run: config,
        inputs,
        outputs,
        status,
        wall_time_seconds: wall,
    };
    write_json(&config.out.join(MANIFEST), &manifest)
}

/// Manifest text with the wall-time entry removed, for reproducibility checks.
pub fn manifest_without_timing(text: &str) -> String {
    text.lines()
        .filter(|line| !line.trim_start().starts_with("\"wall_time_seconds\""))
        .collect::<Vec<_>>()
        .join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> std::result::Result<RunConfig, String> {
        let cli = Cli::try_parse_from(std::iter::once("oper-spectra").chain(args.iter().copied()))
            .map_err(|e| e.to_string())?;
        RunConfig::from_cli(cli).map_err(|e| e.to_string())
    }

    #[test]
    fn flags_parse_anywhere() {
        let cfg = parse(&["find-real", "--config", "a.json", "--rect", "-1", "1", "-0.5", "0.5", "--grid", "8", "9", "--workers", "3"])
            .unwrap();
        assert_eq!(cfg.workers, 3);
        let Command::FindReal { region, .. } = &cfg.command else { panic!("wrong command") };
        assert_eq!(region.rect.as_deref(), Some(&[-1.0, 1.0, -0.5, 0.5][..]));
        assert_eq!(region.grid.as_deref(), Some(&[8, 9][..]));

        let cfg = parse(&["--seed", "7", "abelian", "hecke", "--curve", "c.json"]).unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.command_name(), "abelian hecke");
        assert_eq!(cfg.inputs(), vec![PathBuf::from("c.json")]);
    }

    #[test]
    fn bad_flags_are_rejected() {
        assert!(parse(&["monodromy", "--config", "a.json", "--workers", "0"]).is_err());
        assert!(parse(&["monodromy", "--config", "a.json", "--tol", "-1"]).is_err());
        assert!(parse(&["phi", "--config", "a.json", "--rect", "1", "0", "0", "1"]).is_err());
        assert!(parse(&["phi", "--config", "a.json", "--grid", "0", "3"]).is_err());
        assert!(parse(&["monodromy"]).is_err());
    }

    #[test]
    fn timing_is_stripped() {
        let text = "{\n  \"status\": 0,\n  \"wall_time_seconds\": 0.25\n}";
        assert_eq!(manifest_without_timing(text), "{\n  \"status\": 0,\n}");
    }
}
