//! Suite configuration and run reports.

use std::path::Path;

use inexact_opt::nonsmooth::StopRule;
use inexact_opt::switching::SwitchVariant;
use serde::{Deserialize, Serialize};

use crate::emit::read_json;
use crate::error::{BenchError, Result};
use crate::generate::ProblemKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub runs: Vec<RunConfig>,
}

impl SuiteConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let cfg: SuiteConfig = read_json(path)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let mut names = std::collections::HashSet::new();
        for run in &self.runs {
            if run.name.is_empty() || run.name.contains(['/', '\\']) {
                return Err(BenchError::Config(format!("invalid run name `{}`", run.name)));
            }
            if !names.insert(run.name.as_str()) {
                return Err(BenchError::Config(format!("duplicate run name `{}`", run.name)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub name: String,
    pub problem: ProblemDescriptor,
    pub solver: SolverDescriptor,
    /// Trace file name inside the output directory; defaults to `<name>.csv`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace_file: Option<String>,
    /// Report file name inside the output directory; defaults to `<name>.json`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report_file: Option<String>,
}

impl RunConfig {
    pub fn trace_name(&self) -> String {
        self.trace_file.clone().unwrap_or_else(|| format!("{}.csv", self.name))
    }

    pub fn report_name(&self) -> String {
        self.report_file.clone().unwrap_or_else(|| format!("{}.json", self.name))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemDescriptor {
    pub kind: ProblemKind,
    pub dim: usize,
    pub seed: u64,
    /// Injected value error.
    #[serde(default)]
    pub value_error: f64,
    /// Injected gradient error radius.
    #[serde(default)]
    pub gradient_error: f64,
}

fn default_samples() -> usize {
    10_000
}

fn default_spread() -> f64 {
    1.0
}

fn default_stop() -> StopRule {
    StopRule::ReferenceGap
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum SolverDescriptor {
    Gd {
        l0: f64,
        gradient_error0: f64,
        value_error0: f64,
        #[serde(default)]
        mu: f64,
        iterations: usize,
    },
    Fgm {
        l0: f64,
        gradient_error0: f64,
        value_error0: f64,
        iterations: usize,
    },
    RestartedGd {
        epsilon: f64,
        smoothness: f64,
        /// Defaults to the objective's subgradient jump.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        gradient_jump: Option<f64>,
        #[serde(default)]
        mu: f64,
        #[serde(default = "default_stop")]
        stop: StopRule,
    },
    RestartedFgm {
        epsilon: f64,
        smoothness: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        gradient_jump: Option<f64>,
        #[serde(default)]
        stop_on_gap: bool,
    },
    MirrorProx {
        epsilon: f64,
        l0: f64,
        #[serde(default)]
        gradient_error0: f64,
        #[serde(default)]
        swap_divergence: bool,
    },
    Switching {
        epsilon: f64,
        theta0_sq: f64,
        variant: SwitchVariant,
        constraint_lipschitz: f64,
    },
    RelativeAccuracy {
        delta_rel: f64,
        gamma0: f64,
        gamma1: f64,
        theta0_sq: f64,
        objective_lipschitz: f64,
        constraint_lipschitz: f64,
    },
    /// Samples pairs and checks the declared model inequalities.
    ValidateModel {
        value_error: f64,
        gradient_error: f64,
        smoothness: f64,
        #[serde(default)]
        strong_convexity: f64,
        #[serde(default = "default_samples")]
        samples: usize,
        #[serde(default = "default_spread")]
        spread: f64,
    },
}

/// A single inequality `lhs <= rhs + tolerance`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    pub fn new(name: &str, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        let passed = lhs <= rhs + tolerance;
        // JSON has no infinities
        let finite = |v: f64| if v.is_finite() { v } else { f64::MAX.copysign(v) };
        Check {
            name: name.to_string(),
            lhs: if lhs.is_nan() { f64::MAX } else { finite(lhs) },
            rhs: if rhs.is_nan() { f64::MIN } else { finite(rhs) },
            tolerance,
            passed,
        }
    }

    pub fn recompute(&self) -> bool {
        self.lhs <= self.rhs + self.tolerance
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub name: String,
    pub config: RunConfig,
    pub iterations: usize,
    /// Objective gap, saddle gap or weak VI gap against the reference solution.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub achieved_error: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle_calls: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicted_calls: Option<f64>,
    pub checks: Vec<Check>,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace_file: Option<String>,
    pub trace_rows: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_clock_ms: Option<f64>,
}

impl RunReport {
    /// Verdicts recomputed from the stored numbers agree with the stored flags.
    pub fn consistent(&self) -> bool {
        let all = self.checks.iter().all(|c| c.passed);
        self.checks.iter().all(|c| c.passed == c.recompute())
            && self.passed == (all && self.error.is_none())
    }
}
