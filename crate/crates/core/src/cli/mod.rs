//! Batch front end: config loading, job orchestration and report emission.

mod cache;
mod context;
mod jobs;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

pub use cache::{write_atomic, ArtifactCache};
pub use context::{closed_form_for, ClosedKernel, Context, Overrides};
pub use jobs::{run_job, JobOutput};

use crate::config::{Job, RunConfig};
use crate::error::Result;

pub const EXIT_OK: u8 = 0;
pub const EXIT_ACCEPTANCE: u8 = 1;
pub const EXIT_PRECONDITION: u8 = 2;
pub const EXIT_BUDGET: u8 = 3;

const EXIT_CODES: &str = "\
Exit codes:
  0  success, every check passed
  1  acceptance failure: a diagnostic exceeded its tolerance
  2  precondition failure: bad config or input, periodic walk where aperiodicity
     is required, missing closed form, coverage gap
  3  budget exhaustion: support, ball or basis cap hit, or depth exceeded";

#[derive(Debug, Parser)]
#[command(name = "ratiolimit", version, about = "Ratio-limit kernels and Fock-window checks for random walks on groups", after_help = EXIT_CODES)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Spectral radius estimate and return-ratio tail.
    Spectrum(Flags),
    /// Ratio-limit kernel table with SRLP, bound, cocycle and harmonicity checks.
    Kernel(Flags),
    /// Ratio-limit radical on the configured ball.
    Radical(Flags),
    /// Ratio (and optionally Martin) metric between the configured points.
    Metric(Flags),
    /// Kernel traces along the configured sequences.
    Boundary(Flags),
    /// Fock-window identities, defects and quotient norms.
    Fock(Flags),
    /// Group and gauge covariance on a Fock window.
    Covariance(Flags),
    /// Runs every configured job and writes a summary.
    Report(Flags),
}

#[derive(Clone, Debug, Args)]
#[command(after_help = EXIT_CODES)]
pub struct Flags {
    /// Run configuration (TOML).
    #[arg(long, value_name = "PATH")]
    pub config: PathBuf,
    /// Output directory; defaults to the config's `output`, then `./out`.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Cache depth M, overriding the config.
    #[arg(long, value_name = "M")]
    pub max_depth: Option<usize>,
    /// Primary tolerance of the command: spread for spectrum, SRLP oscillation
    /// for kernel, absolute band for radical, Cauchy residual for boundary.
    #[arg(long, value_name = "T")]
    pub tolerance: Option<f64>,
    /// Compare against the closed form of the walk where one is known.
    #[arg(long)]
    pub closed_form_compare: bool,
    /// Seed for sampled checks, overriding the config.
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
}

impl Command {
    fn parts(&self) -> (Option<Job>, &Flags) {
        match self {
            Command::Spectrum(f) => (Some(Job::Spectrum), f),
            Command::Kernel(f) => (Some(Job::Kernel), f),
            Command::Radical(f) => (Some(Job::Radical), f),
            Command::Metric(f) => (Some(Job::Metric), f),
            Command::Boundary(f) => (Some(Job::Boundary), f),
            Command::Fock(f) => (Some(Job::Fock), f),
            Command::Covariance(f) => (Some(Job::Covariance), f),
            Command::Report(f) => (None, f),
        }
    }
}

/// Runs the parsed command; returns whether every report passed.
pub fn execute(cli: &Cli) -> Result<bool> {
    let (job, flags) = cli.command.parts();
    let config = RunConfig::load(&flags.config)?;
    let out = flags
        .out
        .clone()
        .or_else(|| config.output.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let overrides = Overrides {
        max_depth: flags.max_depth,
        tolerance: flags.tolerance,
        closed_form_compare: flags.closed_form_compare,
        seed: flags.seed,
    };
    let jobs = match job {
        Some(j) => vec![j],
        None => {
            let mut v = config.jobs.clone();
            v.sort();
            v.dedup();
            v
        }
    };
    let ctx = Context::new(config, out.clone(), &overrides)?;
    let mut outputs = Vec::with_capacity(jobs.len());
    for j in jobs {
        let o = run_job(&ctx, j)?;
        write_files(&out, &o)?;
        outputs.push(o);
    }
    let passed = outputs.iter().all(JobOutput::passed);
    if job.is_none() {
        let reports: Vec<_> = outputs
            .iter()
            .flat_map(|o| {
                o.reports.iter().map(move |r| {
                    json!({
                        "job": o.job,
                        "report": r.name,
                        "status": r.verdict.status,
                        "message": r.verdict.message,
                    })
                })
            })
            .collect();
        let summary = json!({ "pass": passed, "reports": reports, "provenance": ctx.provenance() });
        write_atomic(&out.join("summary.json"), &jobs::json_bytes(&summary)?)?;
    }
    for o in &outputs {
        for r in &o.reports {
            println!("{:<22} {:<5} {}", r.name, format!("{:?}", r.verdict.status).to_uppercase(), r.verdict.message);
        }
    }
    Ok(passed)
}

fn write_files(dir: &Path, o: &JobOutput) -> Result<()> {
    for (name, bytes) in &o.files {
        write_atomic(&dir.join(name), bytes)?;
    }
    Ok(())
}

pub fn exit_code(result: &Result<bool>) -> u8 {
    match result {
        Ok(true) => EXIT_OK,
        Ok(false) => EXIT_ACCEPTANCE,
        Err(e) => e.exit_code() as u8,
    }
}

/// Entry point of the binary.
pub fn run() -> ExitCode {
    let cli = Cli::parse();
    let result = execute(&cli);
    if let Err(e) = &result {
        eprintln!("error: {e}");
    }
    ExitCode::from(exit_code(&result))
}
