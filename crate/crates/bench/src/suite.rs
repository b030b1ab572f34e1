//! Runs configured experiments and writes their artifacts.

use std::path::{Path, PathBuf};
use std::time::Instant;

use inexact_opt::fgm::{check_ak_growth, check_fgm_budget, run_adaptive_fgm, FgmConfig};
use inexact_opt::gd::{check_oracle_budget, inflation_constant, run_adaptive_gd, GdConfig};
use inexact_opt::geometry::ProxSetup;
use inexact_opt::nonsmooth::{run_restarted_fgm, run_restarted_gd, RestartFgmConfig, RestartGdConfig};
use inexact_opt::oracle::{validate_model, ModelOracle, ModelParams, NoiseSpec, ProblemSpec};
use inexact_opt::switching::{
    dual_certificate, relative_accuracy_run, run_switching, stopping_horizon, RelativeAccuracyConfig,
    SwitchConfig, SwitchVariant,
};
use inexact_opt::vi::{
    check_averaged_inequality, model_from_vi, run_mirror_prox, saddle_gap, MirrorProxConfig,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Check, RunConfig, RunReport, SolverDescriptor, SuiteConfig};
use crate::emit::{emit_trace, write_json, TraceBuffer};
use crate::error::{io_err, BenchError, Result};
use crate::generate::{generate_problem, GeneratedProblem, Instance};

/// Relative tolerance of convergence-bound checks.
pub const BOUND_RTOL: f64 = 1e-8;
/// Additive tolerance of certificate checks.
pub const CERT_ATOL: f64 = 1e-9;
/// Sample count and seed for averaged-inequality checks.
pub const AVERAGED_SAMPLES: usize = 100;
const CHECK_SEED: u64 = 0xC0FFEE;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunOptions {
    pub timing: bool,
}

/// Report and trace of one run, before anything touches the disk.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: RunReport,
    pub trace: Option<TraceBuffer>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteSummary {
    pub runs: Vec<SummaryLine>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryLine {
    pub name: String,
    pub passed: bool,
    pub report_file: String,
}

struct Outcome {
    iterations: usize,
    achieved_error: Option<f64>,
    oracle_calls: Option<u64>,
    predicted_calls: Option<f64>,
    checks: Vec<Check>,
    trace: Option<TraceBuffer>,
}

fn minimization(generated: &GeneratedProblem) -> Result<&ProblemSpec> {
    generated
        .problem()
        .ok_or_else(|| BenchError::Config(format!("{} is not a minimization instance", generated.kind)))
}

fn f_star(problem: &ProblemSpec) -> Result<f64> {
    problem
        .f_star()
        .ok_or_else(|| BenchError::Config("instance has no reference optimum".into()))
}

/// Worst `(lhs - rhs) / max(1, |rhs|)` over paired sequences.
fn relative_excess(lhs: impl IntoIterator<Item = f64>, rhs: impl IntoIterator<Item = f64>) -> f64 {
    lhs.into_iter()
        .zip(rhs)
        .map(|(a, b)| (a - b) / b.abs().max(1.0))
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn execute(run: &RunConfig, options: RunOptions) -> RunOutput {
    let start = Instant::now();
    let result = generate_problem(run.problem.kind, run.problem.dim, run.problem.seed)
        .and_then(|g| solve(run, &g));
    let elapsed = start.elapsed().as_secs_f64() * 1e3;
    let (outcome, error) = match result {
        Ok(o) => (Some(o), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let checks = outcome.as_ref().map(|o| o.checks.clone()).unwrap_or_default();
    let passed = error.is_none() && checks.iter().all(|c| c.passed);
    let trace = outcome.as_ref().and_then(|o| o.trace.clone());
    let report = RunReport {
        name: run.name.clone(),
        config: run.clone(),
        iterations: outcome.as_ref().map_or(0, |o| o.iterations),
        achieved_error: outcome.as_ref().and_then(|o| o.achieved_error),
        oracle_calls: outcome.as_ref().and_then(|o| o.oracle_calls),
        predicted_calls: outcome.as_ref().and_then(|o| o.predicted_calls),
        checks,
        passed,
        trace_file: trace.as_ref().map(|_| run.trace_name()),
        trace_rows: trace.as_ref().map_or(0, |t| t.rows.len()),
        error,
        wall_clock_ms: options.timing.then_some(elapsed),
    };
    RunOutput { report, trace }
}

fn solve(run: &RunConfig, generated: &GeneratedProblem) -> Result<Outcome> {
    let pd = &run.problem;
    match &run.solver {
        SolverDescriptor::Gd {
            l0,
            gradient_error0,
            value_error0,
            mu,
            iterations,
        } => {
            let problem = minimization(generated)?;
            let fs = f_star(problem)?;
            let l = problem.objective.smoothness();
            let oracle = noisy_oracle(problem, pd.value_error, pd.gradient_error, l, *mu)?;
            let setup = ProxSetup::euclidean(problem.set.clone())?;
            let cfg = GdConfig::new(*l0, *gradient_error0, *value_error0, *mu, *iterations);
            let r = run_adaptive_gd(&setup, &oracle, &cfg)?;
            let budget = check_oracle_budget(&r, &cfg, l, pd.value_error, pd.gradient_error);
            let gaps = r.trace.iter().map(|t| t.best_f - fs);
            let mut checks = vec![Check::new("oracle-budget", r.oracle_calls as f64, budget.allowed, 1e-9)];
            if !r.bound.is_empty() {
                checks.push(Check::new(
                    "convergence-bound",
                    relative_excess(gaps, r.bound.iter().copied()),
                    0.0,
                    BOUND_RTOL,
                ));
            }
            Ok(Outcome {
                iterations: r.trace.len(),
                achieved_error: Some(oracle.exact_value(&r.y_out) - fs),
                oracle_calls: Some(r.oracle_calls as u64),
                predicted_calls: Some(budget.allowed),
                checks,
                trace: Some(TraceBuffer::capture(&r)),
            })
        }
        SolverDescriptor::Fgm {
            l0,
            gradient_error0,
            value_error0,
            iterations,
        } => {
            let problem = minimization(generated)?;
            let fs = f_star(problem)?;
            let l = problem.objective.smoothness();
            let oracle = noisy_oracle(problem, pd.value_error, pd.gradient_error, l, 0.0)?;
            let setup = ProxSetup::euclidean(problem.set.clone())?;
            let cfg = FgmConfig::new(*l0, *gradient_error0, *value_error0, *iterations);
            let r = run_adaptive_fgm(&setup, &oracle, &cfg)?;
            let budget = check_fgm_budget(&r, &cfg, l, pd.value_error, pd.gradient_error);
            let c = inflation_constant(pd.value_error, pd.gradient_error, *value_error0, *gradient_error0);
            let growth = r
                .trace
                .iter()
                .enumerate()
                .map(|(i, t)| {
                    let k = (i + 1) as f64;
                    ((k + 1.0).powi(2) / (8.0 * c * l) - t.a) / t.a
                })
                .fold(f64::NEG_INFINITY, f64::max);
            debug_assert_eq!(growth <= 1e-12, check_ak_growth(&r.trace, l, c));
            let mut checks = vec![
                Check::new("oracle-budget", r.oracle_calls as f64, budget.allowed, 1e-9),
                Check::new("a-growth", growth, 0.0, 1e-12),
            ];
            if !r.bound.is_empty() {
                let gaps = r.trace.iter().map(|t| t.f - fs);
                checks.push(Check::new(
                    "convergence-bound",
                    relative_excess(gaps, r.bound.iter().copied()),
                    0.0,
                    BOUND_RTOL,
                ));
            }
            Ok(Outcome {
                iterations: r.trace.len(),
                achieved_error: Some(oracle.exact_value(&r.x_out) - fs),
                oracle_calls: Some(r.oracle_calls as u64),
                predicted_calls: Some(budget.allowed),
                checks,
                trace: Some(TraceBuffer::capture(&r)),
            })
        }
        SolverDescriptor::RestartedGd {
            epsilon,
            smoothness,
            gradient_jump,
            mu,
            stop,
        } => {
            let problem = minimization(generated)?;
            let setup = ProxSetup::euclidean(problem.set.clone())?;
            let cfg = RestartGdConfig {
                epsilon: *epsilon,
                smoothness: *smoothness,
                gradient_jump: gradient_jump.unwrap_or_else(|| problem.objective.subgradient_jump()),
                mu: *mu,
                stop: *stop,
                x0: None,
                adaptive: None,
            };
            let r = run_restarted_gd(&setup, problem, &cfg)?;
            let mut checks = vec![Check::new(
                "predicted-calls",
                r.calls_realized as f64,
                r.calls_predicted as f64,
                0.0,
            )];
            if let Some(gap) = r.f_gap {
                checks.push(Check::new("objective-gap", gap, *epsilon, 0.0));
            }
            Ok(Outcome {
                iterations: r.iterations,
                achieved_error: r.f_gap,
                oracle_calls: Some(r.calls_realized),
                predicted_calls: Some(r.calls_predicted as f64),
                checks,
                trace: Some(TraceBuffer::capture(&r)),
            })
        }
        SolverDescriptor::RestartedFgm {
            epsilon,
            smoothness,
            gradient_jump,
            stop_on_gap,
        } => {
            let problem = minimization(generated)?;
            let setup = ProxSetup::euclidean(problem.set.clone())?;
            let cfg = RestartFgmConfig {
                epsilon: *epsilon,
                smoothness: *smoothness,
                gradient_jump: gradient_jump.unwrap_or_else(|| problem.objective.subgradient_jump()),
                x0: None,
                stop_on_gap: *stop_on_gap,
            };
            let r = run_restarted_fgm(&setup, problem, &cfg)?;
            let mut checks = vec![Check::new(
                "predicted-calls",
                r.calls_realized as f64,
                r.calls_predicted as f64,
                0.0,
            )];
            if let Some(gap) = r.f_gap {
                checks.push(Check::new("objective-gap", gap, *epsilon, 0.0));
            }
            Ok(Outcome {
                iterations: r.trace.len(),
                achieved_error: r.f_gap,
                oracle_calls: Some(r.calls_realized),
                predicted_calls: Some(r.calls_predicted as f64),
                checks,
                trace: Some(TraceBuffer::capture(&r)),
            })
        }
        SolverDescriptor::MirrorProx {
            epsilon,
            l0,
            gradient_error0,
            swap_divergence,
        } => {
            let Instance::Game { game, .. } = &generated.instance else {
                return Err(BenchError::Config("mirror prox runs need a game instance".into()));
            };
            let vi = game.to_vi()?;
            let setup = vi.default_setup()?;
            let model = model_from_vi(vi);
            let mut cfg = MirrorProxConfig::new(*epsilon, *l0, *gradient_error0);
            cfg.swap_divergence = *swap_divergence;
            let r = run_mirror_prox(&model, &setup, &cfg)?;
            let (u, v) = game.split(&r.y_tilde);
            let gap = saddle_gap(game, u, v)?;
            let averaged = check_averaged_inequality(&model, &setup, &r, AVERAGED_SAMPLES, CHECK_SEED)?;
            let checks = vec![
                Check::new("stopping-rule", r.max_divergence / epsilon, r.s_n, 0.0),
                Check::new("saddle-gap", gap, r.saddle_bound(0.0), CERT_ATOL),
                Check::new("averaged-inequality", averaged, 0.0, CERT_ATOL),
            ];
            Ok(Outcome {
                iterations: r.iterations,
                achieved_error: Some(gap),
                oracle_calls: Some(r.operator_calls as u64),
                predicted_calls: None,
                checks,
                trace: Some(TraceBuffer::capture(&r)),
            })
        }
        SolverDescriptor::Switching {
            epsilon,
            theta0_sq,
            variant,
            constraint_lipschitz,
        } => {
            let problem = minimization(generated)?;
            let fs = f_star(problem)?;
            let setup = ProxSetup::euclidean(problem.set.clone())?;
            let cfg = SwitchConfig::new(*epsilon, *theta0_sq, *variant, *constraint_lipschitz);
            let r = run_switching(problem, &setup, &cfg)?;
            let f_hat = problem.value(&r.x_hat);
            let g_hat = problem.constraint_value(&r.x_hat);
            let objective_scale = match variant {
                SwitchVariant::Omega { omega } => omega * omega,
                _ => 1.0,
            };
            let mut checks = Vec::new();
            // a stop through the escape branch carries no objective guarantee
            if r.escape != Some(true) || matches!(variant, SwitchVariant::Adaptive) {
                checks.push(Check::new("objective-gap", f_hat - fs, objective_scale * epsilon, CERT_ATOL));
                checks.push(Check::new("constraint", g_hat, epsilon * constraint_lipschitz, CERT_ATOL));
            }
            let lipschitz = match variant {
                SwitchVariant::RelativeLipschitz { objective_lipschitz } => Some(*objective_lipschitz),
                _ => problem.objective_lipschitz,
            };
            if let (Some(m), SwitchVariant::Adaptive | SwitchVariant::RelativeLipschitz { .. }) =
                (lipschitz, variant)
            {
                let horizon = stopping_horizon(*epsilon, *theta0_sq, m);
                checks.push(Check::new("stopping-horizon", r.iterations() as f64, horizon as f64, 0.0));
            }
            if problem.set.is_bounded() {
                if let Ok(d) = dual_certificate(problem, &r) {
                    checks.push(Check::new("dual-gap", d.gap, *epsilon, CERT_ATOL));
                    checks.push(Check::new("weak-duality", -d.gap, d.infeasibility_credit, CERT_ATOL));
                }
            }
            Ok(Outcome {
                iterations: r.iterations(),
                achieved_error: Some(f_hat - fs),
                oracle_calls: Some(r.iterations() as u64),
                predicted_calls: None,
                checks,
                trace: Some(TraceBuffer::capture(&r)),
            })
        }
        SolverDescriptor::RelativeAccuracy {
            delta_rel,
            gamma0,
            gamma1,
            theta0_sq,
            objective_lipschitz,
            constraint_lipschitz,
        } => {
            let problem = minimization(generated)?;
            let fs = f_star(problem)?;
            let setup = ProxSetup::euclidean(problem.set.clone())?;
            let cfg = RelativeAccuracyConfig {
                delta_rel: *delta_rel,
                gamma0: *gamma0,
                gamma1: *gamma1,
                theta0_sq: *theta0_sq,
                objective_lipschitz: *objective_lipschitz,
                constraint_lipschitz: *constraint_lipschitz,
                probes: 1000,
                seed: run.problem.seed,
            };
            let r = relative_accuracy_run(problem, &setup, &cfg)?;
            let checks = vec![
                Check::new("relative-accuracy", r.f_hat, (1.0 + delta_rel) * fs, CERT_ATOL),
                Check::new("constraint", r.g_hat, r.constraint_bound, CERT_ATOL),
                Check::new("iteration-cap", r.iterations as f64, r.iteration_cap as f64, 0.0),
            ];
            Ok(Outcome {
                iterations: r.iterations,
                achieved_error: Some((r.f_hat - fs) / fs),
                oracle_calls: Some(r.iterations as u64),
                predicted_calls: Some(r.iteration_cap as f64),
                checks,
                trace: Some(TraceBuffer::capture(&r.run)),
            })
        }
        SolverDescriptor::ValidateModel {
            value_error,
            gradient_error,
            smoothness,
            strong_convexity,
            samples,
            spread,
        } => {
            let problem = minimization(generated)?;
            let params = ModelParams::new(*value_error, *gradient_error, *smoothness, *strong_convexity)?;
            let oracle = ModelOracle::exact(problem.clone(), params);
            let setup = ProxSetup::euclidean(problem.set.clone())?;
            let r = validate_model(&setup, &oracle, *samples, run.problem.seed, *spread)?;
            Ok(Outcome {
                iterations: r.pairs,
                achieved_error: Some(r.worst_residual.max(0.0)),
                oracle_calls: None,
                predicted_calls: None,
                checks: vec![Check::new("model-inequalities", r.violations as f64, 0.0, 0.0)],
                trace: None,
            })
        }
    }
}

fn noisy_oracle(
    problem: &ProblemSpec,
    value_error: f64,
    gradient_error: f64,
    smoothness: f64,
    mu: f64,
) -> Result<ModelOracle> {
    let params = ModelParams::new(value_error, gradient_error, smoothness, mu)?;
    Ok(ModelOracle::exact(problem.clone(), params).with_noise(NoiseSpec {
        value_error,
        gradient_error,
        seed: problem.seed,
    }))
}

/// Runs every configured experiment on a pool of `jobs` threads and writes one
/// report, one trace and a summary into `out`. Results keep the config order.
pub fn run_suite(config: &SuiteConfig, out: &Path, jobs: usize, options: RunOptions) -> Result<SuiteSummary> {
    config.validate()?;
    std::fs::create_dir_all(out).map_err(io_err(out))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| BenchError::Config(format!("thread pool: {e}")))?;
    let lines: Vec<Result<SummaryLine>> = pool.install(|| {
        config
            .runs
            .par_iter()
            .map(|run| write_run(run, out, options))
            .collect()
    });
    let runs = lines.into_iter().collect::<Result<Vec<_>>>()?;
    let summary = SuiteSummary {
        passed: runs.iter().all(|l| l.passed),
        runs,
    };
    write_json(&summary, &out.join("summary.json"))?;
    Ok(summary)
}

fn write_run(run: &RunConfig, out: &Path, options: RunOptions) -> Result<SummaryLine> {
    let output = execute(run, options);
    if let Some(trace) = &output.trace {
        emit_trace(trace, &out.join(run.trace_name()))?;
    }
    let report_path: PathBuf = out.join(run.report_name());
    write_json(&output.report, &report_path)?;
    Ok(SummaryLine {
        name: run.name.clone(),
        passed: output.report.passed,
        report_file: run.report_name(),
    })
}
