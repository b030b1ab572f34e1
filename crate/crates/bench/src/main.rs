use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use inexact_bench::emit::{read_json, read_trace, write_json};
use inexact_bench::{generate_problem, run_suite, GeneratedProblem, ProblemKind, RunOptions, RunReport, SuiteConfig};
use inexact_opt::geometry::ProxSetup;
use inexact_opt::oracle::{validate_model, ModelOracle, ModelParams, ProblemSpec};
use serde::{Deserialize, Serialize};

#[derive(Parser)]
#[command(name = "inexact-bench", version, about = "Run and certify inexact-model optimization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a suite config; exits nonzero if any check fails.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, env = "INEXACT_BENCH_OUT", default_value = "bench-out")]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Record wall-clock time in reports (breaks byte-for-byte reproducibility).
        #[arg(long)]
        timing: bool,
    },
    /// Check declared model constants `δ,Δ,L,μ` on sampled pairs.
    Validate {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        params: Vec<f64>,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1.0)]
        spread: f64,
    },
    /// Recompute the verdicts of a report and compare with its trace file.
    Certify {
        #[arg(long)]
        report: PathBuf,
    },
    /// Print a seeded instance as JSON.
    Generate {
        #[arg(long, value_enum)]
        kind: ProblemKind,
        #[arg(long)]
        dim: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ProblemFile {
    Generated(GeneratedProblem),
    Spec(ProblemSpec),
}

#[derive(Serialize)]
struct Certification {
    name: String,
    consistent: bool,
    passed: bool,
    trace_rows_match: Option<bool>,
}

fn main() -> ExitCode {
    match dispatch(Cli::parse().command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(command: Command) -> Result<bool, Box<dyn std::error::Error>> {
    match command {
        Command::Run {
            config,
            out,
            jobs,
            timing,
        } => {
            let cfg = SuiteConfig::load(&config)?;
            let summary = run_suite(&cfg, &out, jobs, RunOptions { timing })?;
            for line in &summary.runs {
                println!("{} {}", if line.passed { "PASS" } else { "FAIL" }, line.name);
            }
            Ok(summary.passed)
        }
        Command::Validate {
            problem,
            params,
            samples,
            seed,
            spread,
        } => {
            let spec = match read_json::<ProblemFile>(&problem)? {
                ProblemFile::Spec(p) => p,
                ProblemFile::Generated(g) => g
                    .problem()
                    .cloned()
                    .ok_or("validation needs a minimization instance")?,
            };
            if params.len() != 4 {
                return Err(format!("--params takes 4 values, got {}", params.len()).into());
            }
            let params = ModelParams::new(params[0], params[1], params[2], params[3])?;
            let setup = ProxSetup::euclidean(spec.set.clone())?;
            let report = validate_model(&setup, &ModelOracle::exact(spec, params), samples, seed, spread)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(report.passed())
        }
        Command::Certify { report } => {
            let r: RunReport = read_json(&report)?;
            let rows = trace_rows_match(&report, &r)?;
            let c = Certification {
                name: r.name.clone(),
                consistent: r.consistent(),
                passed: r.passed,
                trace_rows_match: rows,
            };
            println!("{}", serde_json::to_string_pretty(&c)?);
            Ok(c.consistent && c.passed && rows != Some(false))
        }
        Command::Generate { kind, dim, seed, out } => {
            let g = generate_problem(kind, dim, seed)?;
            match out {
                Some(path) => write_json(&g, &path)?,
                None => println!("{}", serde_json::to_string_pretty(&g)?),
            }
            Ok(true)
        }
    }
}

fn trace_rows_match(report_path: &Path, r: &RunReport) -> Result<Option<bool>, Box<dyn std::error::Error>> {
    let Some(name) = &r.trace_file else {
        return Ok(None);
    };
    let path = report_path.parent().unwrap_or(Path::new(".")).join(name);
    if !path.exists() {
        return Ok(Some(false));
    }
    let (_, rows) = read_trace(&path)?;
    Ok(Some(rows.len() == r.trace_rows))
}
