//! Argument parsing and dispatch for the `nls4` binary.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;

use crate::commands::execute;
use crate::config::*;
use crate::error::{CliError, EXIT_CONFIG, EXIT_FAILURE};
use crate::manifest::{read_manifest, verify_artifacts, write_run};
use crate::verify::{all_passed, run_checks, CHECK_IDS};

/// Environment variable capping the worker pool.
pub const THREADS_ENV: &str = "BIHARMONIC_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "nls4",
    version,
    about = "Simulation and verification toolkit for the fourth-order NLS  i u_t + Δ²u + μΔu + λ|u|^α u = 0",
    after_help = "Exit codes: 0 success, 1 runtime failure or failed verification, 2 configuration error, \
                  3 blow-up detected, 4 solver diverged or Picard iteration did not converge.\n\
                  The environment variable BIHARMONIC_THREADS caps the worker pool."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// JSON configuration of the run (see `nls4 schema`).
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Directory receiving the artifacts and manifest.json; overrides the
    /// configuration's `output_dir`.
    #[arg(long, value_name = "DIR")]
    pub output_dir: Option<PathBuf>,
    /// Seed; overrides the configuration's `seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Print progress on stderr.
    #[arg(short, long)]
    pub verbose: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exact exponent report for (α, N).
    Exponents {
        /// Rational exponent, e.g. 2 or 4/3.
        #[arg(long, required_unless_present = "config")]
        alpha: Option<String>,
        /// Space dimension N.
        #[arg(long, required_unless_present = "config")]
        dim: Option<u32>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Rigorous constants of the construction, or experiment-mode parameters.
    Params {
        #[arg(long, required_unless_present = "config")]
        alpha: Option<String>,
        #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
        lambda_re: f64,
        #[arg(long, allow_hyphen_values = true, default_value_t = -1.0)]
        lambda_im: f64,
        #[arg(long, required_unless_present = "config")]
        dim: Option<u32>,
        /// μ ∈ {−1, 0, 1}.
        #[arg(long, allow_hyphen_values = true, default_value_t = 0)]
        mu: i8,
        /// Nonlinearity constant M; estimated by sampling when absent.
        #[arg(long = "M", value_name = "M")]
        m: Option<f64>,
        /// Experiment mode: J k σ δ (δ rational), e.g. `--experiment 2 40 2 1/10`.
        #[arg(long, num_args = 4, value_names = ["J", "K", "SIGMA", "DELTA"])]
        experiment: Option<Vec<String>>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Build the weight A and report its derivative-bound constants.
    Weight {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Build the ansatz U_0 … U_J and fit its scaling laws.
    Ansatz {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Integrate the equation and record norm time series.
    Simulate {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Iterate the Duhamel map and compare with the split-step solver.
    Picard {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Run the verification suite; exits 1 if any criterion fails.
    Verify {
        /// Comma-separated subset of checks (1-8, 4s, 7s).
        #[arg(long, value_delimiter = ',')]
        only: Vec<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write verify.json here.
        #[arg(long, value_name = "DIR")]
        output_dir: Option<PathBuf>,
    },
    /// Replay a run from its manifest.json and compare artifact hashes.
    Rerun {
        manifest: PathBuf,
        /// Defaults to the manifest's directory.
        #[arg(long, value_name = "DIR")]
        output_dir: Option<PathBuf>,
    },
    /// Print the JSON schema of all run configurations.
    Schema,
}

/// Parse arguments, run, and return the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(err) => {
            let _ = err.print();
            return match err.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => EXIT_CONFIG,
            };
        }
    };
    if let Err(err) = configure_threads() {
        eprintln!("error: {err}");
        return err.exit_code();
    }
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            err.exit_code()
        }
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::config(THREADS_ENV, format!("expected a positive integer, got {value:?}")))?;
    // a pool may already exist when called twice in one process
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn load<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    load_json(path)
}

fn apply_overrides(run: &mut RunConfig, args: &RunArgs) {
    let dir = args.output_dir.clone();
    let seed = args.seed;
    let verbose = args.verbose;
    macro_rules! set {
        ($c:expr) => {{
            if let Some(d) = dir {
                $c.output_dir = d;
            }
            if let Some(s) = seed {
                $c.seed = s;
            }
            if verbose {
                $c.verbosity = $c.verbosity.max(1);
            }
        }};
    }
    match run {
        RunConfig::Exponents(c) => set!(c),
        RunConfig::Params(c) => set!(c),
        RunConfig::Weight(c) => set!(c),
        RunConfig::Ansatz(c) => set!(c),
        RunConfig::Simulate(c) => set!(c),
        RunConfig::Picard(c) => set!(c),
    }
}

fn require_config(args: &RunArgs) -> Result<&Path, CliError> {
    args.config
        .as_deref()
        .ok_or_else(|| CliError::config("--config", "this subcommand needs a configuration file"))
}

fn dispatch(command: Command) -> Result<i32, CliError> {
    let (mut run, args) = match command {
        Command::Exponents { alpha, dim, run } => {
            let cfg = match &run.config {
                Some(p) => load(p)?,
                None => ExponentsConfig {
                    seed: 0,
                    output_dir: ".".into(),
                    verbosity: 0,
                    alpha: alpha.unwrap_or_default(),
                    dim: dim.unwrap_or_default(),
                },
            };
            (RunConfig::Exponents(cfg), run)
        }
        Command::Params {
            alpha,
            lambda_re,
            lambda_im,
            dim,
            mu,
            m,
            experiment,
            run,
        } => {
            let cfg = match &run.config {
                Some(p) => load(p)?,
                None => {
                    let experiment = match experiment {
                        Some(v) => Some(ExperimentConfig {
                            j: v[0].parse().map_err(|_| CliError::config("--experiment J", "expected an integer"))?,
                            k: v[1].parse().map_err(|_| CliError::config("--experiment K", "expected an integer"))?,
                            sigma: v[2].parse().map_err(|_| CliError::config("--experiment SIGMA", "expected a number"))?,
                            delta: v[3].clone(),
                        }),
                        None => None,
                    };
                    ParamsConfig {
                        seed: 0,
                        output_dir: ".".into(),
                        verbosity: 0,
                        phys: PhysConfig {
                            alpha: alpha.unwrap_or_default(),
                            lambda: ComplexConfig {
                                re: lambda_re,
                                im: lambda_im,
                            },
                            mu,
                            dim: dim.unwrap_or_default(),
                        },
                        m,
                        experiment,
                    }
                }
            };
            (RunConfig::Params(cfg), run)
        }
        Command::Weight { run } => (RunConfig::Weight(load(require_config(&run)?)?), run),
        Command::Ansatz { run } => (RunConfig::Ansatz(load(require_config(&run)?)?), run),
        Command::Simulate { run } => (RunConfig::Simulate(load(require_config(&run)?)?), run),
        Command::Picard { run } => (RunConfig::Picard(load(require_config(&run)?)?), run),
        Command::Verify { only, seed, output_dir } => return verify(only, seed, output_dir),
        Command::Rerun { manifest, output_dir } => return rerun(&manifest, output_dir),
        Command::Schema => {
            print!("{}", schema_json());
            return Ok(0);
        }
    };
    apply_overrides(&mut run, &args);
    perform_and_report(&run)
}

fn perform_and_report(run: &RunConfig) -> Result<i32, CliError> {
    let common = run.common();
    let out = execute(run)?;
    write_run(&common.output_dir, &out.resolved, &out.inputs, &out.artifacts, out.exit_code)?;
    // a closed stdout (e.g. piped into `head`) is not an error
    let _ = writeln!(std::io::stdout().lock(), "{}", out.summary.trim_end());
    if common.verbosity > 0 {
        eprintln!(
            "{}: wrote {} artifacts and manifest.json to {}",
            run.name(),
            out.artifacts.len(),
            common.output_dir.display()
        );
    }
    Ok(out.exit_code)
}

fn verify(only: Vec<String>, seed: u64, output_dir: Option<PathBuf>) -> Result<i32, CliError> {
    if let Some(bad) = only.iter().find(|o| !CHECK_IDS.contains(&o.as_str())) {
        return Err(CliError::config("--only", format!("unknown check {bad:?}; known: {}", CHECK_IDS.join(", "))));
    }
    let results = run_checks(&only, seed, |r| println!("{}", r.line()));
    let passed = all_passed(&results);
    println!("{}", if passed { "verification passed" } else { "verification FAILED" });
    if let Some(dir) = output_dir {
        std::fs::create_dir_all(&dir).map_err(|source| CliError::Io {
            action: "create",
            path: dir.clone(),
            source,
        })?;
        let path = dir.join("verify.json");
        let text = nls4_core::diagnostics::json_string(&results)?;
        std::fs::write(&path, text).map_err(|source| CliError::Io {
            action: "write",
            path,
            source,
        })?;
    }
    Ok(if passed { 0 } else { EXIT_FAILURE })
}

fn rerun(manifest_path: &Path, output_dir: Option<PathBuf>) -> Result<i32, CliError> {
    let manifest = read_manifest(manifest_path)?;
    let dir = output_dir.unwrap_or_else(|| {
        manifest_path
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .map_or_else(|| PathBuf::from("."), Path::to_path_buf)
    });
    let mut run = manifest.run.clone();
    run.set_output_dir(dir.clone());
    let code = perform_and_report(&run)?;
    let mismatched = verify_artifacts(&dir, &manifest)?;
    if mismatched.is_empty() {
        eprintln!("rerun reproduced all {} artifacts", manifest.artifacts.len());
        Ok(code)
    } else {
        eprintln!("rerun artifacts differ from the manifest: {}", mismatched.join(", "));
        Ok(EXIT_FAILURE)
    }
}
