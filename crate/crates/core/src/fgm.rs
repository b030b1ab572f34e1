//! Adaptive fast gradient method for `(δ, Δ, L)`-models with a squared-norm upper bound.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::gd::{BudgetCheck, oracle_budget, ACCEPT_SLACK, DOUBLING_CAP_LOG2, PARAM_FLOOR};
use crate::geometry::{prox_step, ProxGeometry, DEFAULT_INNER_TOL};
use crate::linalg::{blend, sub};
use crate::oracle::ModelOracle;
use crate::trace::{Cell, TraceTable};

/// Larger root of `L a^2 - a - A = 0`.
pub fn largest_root_alpha(a: f64, l: f64) -> f64 {
    (1.0 + (1.0 + 4.0 * l * a).sqrt()) / (2.0 * l)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FgmConfig {
    pub l0: f64,
    pub gradient_error0: f64,
    pub value_error0: f64,
    pub iterations: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    /// Stop once `f(x^k) - f*` drops to this level (requires a reference optimum).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_gap: Option<f64>,
    #[serde(default = "default_tol")]
    pub inner_tol: f64,
}

fn default_tol() -> f64 {
    DEFAULT_INNER_TOL
}

impl FgmConfig {
    pub fn new(l0: f64, gradient_error0: f64, value_error0: f64, iterations: usize) -> Self {
        FgmConfig {
            l0,
            gradient_error0,
            value_error0,
            iterations,
            x0: None,
            target_gap: None,
            inner_tol: DEFAULT_INNER_TOL,
        }
    }

    pub fn starting_at(mut self, x0: Vec<f64>) -> Self {
        self.x0 = Some(x0);
        self
    }

    pub fn until_gap(mut self, gap: f64) -> Self {
        self.target_gap = Some(gap);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [self.l0, self.gradient_error0, self.value_error0];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidParameter(
                "initial L, gradient error and value error must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FgmRecord {
    pub k: usize,
    pub alpha: f64,
    /// `A_{k+1}`
    pub a: f64,
    pub y: Vec<f64>,
    pub u: Vec<f64>,
    pub x: Vec<f64>,
    pub l: f64,
    pub gradient_error: f64,
    pub value_error: f64,
    /// Exact `f(x^{k+1})`.
    pub f: f64,
    pub inner_loops: usize,
    /// `|x^{k+1} - y^{k+1}|`
    pub xy_displacement: f64,
    pub prox_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FgmReport {
    pub x_out: Vec<f64>,
    pub trace: Vec<FgmRecord>,
    pub oracle_calls: usize,
    /// Bound after `k + 1` iterations, aligned with `trace`.
    pub bound: Vec<f64>,
    pub r2: Option<f64>,
}

pub fn run_adaptive_fgm<G: ProxGeometry + ?Sized>(
    setup: &G,
    oracle: &ModelOracle,
    config: &FgmConfig,
) -> Result<FgmReport> {
    config.validate()?;
    check_dim(setup.dim(), oracle.dim())?;
    let x0 = config.x0.clone().unwrap_or_else(|| setup.prox_center());
    check_dim(setup.dim(), x0.len())?;
    if !setup.contains(&x0) {
        return Err(Error::Infeasible {
            violation: f64::NAN,
        });
    }
    let f_star = oracle.problem.f_star();
    if config.target_gap.is_some() && f_star.is_none() {
        return Err(Error::InvalidSetup("target gap needs a reference optimum".into()));
    }
    let cap = config.l0 * 2f64.powi(DOUBLING_CAP_LOG2);
    let mut x = x0.clone();
    let mut u = x0.clone();
    let mut a_sum = 0.0;
    let mut l = config.l0;
    let mut grad_err = config.gradient_error0;
    let mut val_err = config.value_error0;
    let mut trace = Vec::with_capacity(config.iterations);
    let mut calls = 0;
    for k in 0..config.iterations {
        l /= 2.0;
        grad_err = (grad_err / 2.0).max(PARAM_FLOOR);
        val_err = (val_err / 2.0).max(PARAM_FLOOR);
        let mut loops = 0;
        let record = loop {
            loops += 1;
            calls += 1;
            let alpha = largest_root_alpha(a_sum, l);
            let a_next = a_sum + alpha;
            let y = blend(alpha, &u, a_sum, &x);
            let model = oracle.local_model(&y);
            let out = prox_step(setup, &u, &model, 1.0 / alpha, config.inner_tol)?;
            let x_next = blend(alpha, &out.point, a_sum, &x);
            let fy = oracle.value(&y);
            let fx = oracle.value(&x_next);
            let d = setup.norm(&sub(&x_next, &y));
            let rhs = fy + model.eval(&x_next) + 0.5 * l * d * d + grad_err * d + val_err;
            if fx <= rhs + ACCEPT_SLACK * (1.0 + fy.abs()) {
                break FgmRecord {
                    k,
                    alpha,
                    a: a_next,
                    f: oracle.exact_value(&x_next),
                    y,
                    u: out.point,
                    x: x_next,
                    l,
                    gradient_error: grad_err,
                    value_error: val_err,
                    inner_loops: loops,
                    xy_displacement: d,
                    prox_residual: out.residual,
                };
            }
            l *= 2.0;
            grad_err *= 2.0;
            val_err *= 2.0;
            if l > cap {
                return Err(Error::DoublingCap { iteration: k, l });
            }
        };
        a_sum = record.a;
        x = record.x.clone();
        u = record.u.clone();
        let done = matches!((config.target_gap, f_star), (Some(eps), Some(fs)) if record.f - fs <= eps);
        trace.push(record);
        if done {
            break;
        }
    }
    let r2 = match oracle.problem.x_star() {
        Some(xs) => Some(setup.divergence(xs, &x0)),
        None => setup.max_divergence(&x0).ok(),
    };
    let bound = r2
        .map(|r2| bound_fgm(&trace, r2, oracle.params.value_error))
        .unwrap_or_default();
    Ok(FgmReport {
        x_out: x,
        trace,
        oracle_calls: calls,
        bound,
        r2,
    })
}

/// `R2 / A_k + (1/A_k) sum_{i<k} (Δ_{i+1}|x^{i+1} - y^{i+1}| + δ_{i+1} + δ) A_{i+1}` for
/// `k = 1..=trace.len()`.
pub fn bound_fgm(trace: &[FgmRecord], r2: f64, delta: f64) -> Vec<f64> {
    let mut acc = 0.0;
    trace
        .iter()
        .map(|r| {
            acc += (r.gradient_error * r.xy_displacement + r.value_error + delta) * r.a;
            (r2 + acc) / r.a
        })
        .collect()
}

/// The bound before any iteration is undefined.
pub fn bound_fgm_at(trace: &[FgmRecord], r2: f64, delta: f64, k: usize) -> f64 {
    if k == 0 {
        return f64::INFINITY;
    }
    bound_fgm(&trace[..k], r2, delta)[k - 1]
}

/// `A_k >= (k+1)^2 / (8 C L)` for every `k >= 1` in the trace.
pub fn check_ak_growth(trace: &[FgmRecord], l_true: f64, c: f64) -> bool {
    trace.iter().enumerate().all(|(i, r)| {
        let k = (i + 1) as f64;
        r.a >= (k + 1.0).powi(2) / (8.0 * c * l_true) * (1.0 - 1e-12)
    })
}

pub fn check_fgm_budget(
    report: &FgmReport,
    config: &FgmConfig,
    l_true: f64,
    value_error_true: f64,
    gradient_error_true: f64,
) -> BudgetCheck {
    let allowed = oracle_budget(
        report.trace.len(),
        config.l0,
        config.value_error0,
        config.gradient_error0,
        l_true,
        value_error_true,
        gradient_error_true,
    );
    BudgetCheck::new(report.oracle_calls, allowed)
}

/// CSV view: `k, alpha, A, L, Delta, delta, f, bound_rhs, xy_displacement`.
impl TraceTable for FgmReport {
    fn columns(&self) -> &'static [&'static str] {
        &["k", "alpha", "A", "L", "Delta", "delta", "f", "bound_rhs", "xy_displacement"]
    }

    fn rows(&self) -> Vec<Vec<Cell>> {
        self.trace
            .iter()
            .enumerate()
            .map(|(i, r)| {
                vec![
                    (r.k + 1).into(),
                    r.alpha.into(),
                    r.a.into(),
                    r.l.into(),
                    r.gradient_error.into(),
                    r.value_error.into(),
                    r.f.into(),
                    self.bound.get(i).copied().unwrap_or(f64::NAN).into(),
                    r.xy_displacement.into(),
                ]
            })
            .collect()
    }
}
