//! Adaptive gradient method for `(δ, Δ, L, μ)`-models.
//!
//! Every iteration first relaxes the three constants (`L` halves down to `μ`, both
//! error levels halve), then solves the prox subproblem and doubles all three until
//! the acceptance test passes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{prox_step, ProxGeometry, DEFAULT_INNER_TOL};
use crate::linalg::sub;
use crate::oracle::ModelOracle;
use crate::trace::{Cell, TraceTable};

/// Error levels never halve below this.
pub const PARAM_FLOOR: f64 = 1e-18;
/// Relative slack of every acceptance test.
pub const ACCEPT_SLACK: f64 = 1e-12;
/// Doubling stops once `L` exceeds `2^60 L0`.
pub const DOUBLING_CAP_LOG2: i32 = 60;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GdConfig {
    pub l0: f64,
    pub gradient_error0: f64,
    pub value_error0: f64,
    #[serde(default)]
    pub mu: f64,
    pub iterations: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    #[serde(default = "default_tol")]
    pub inner_tol: f64,
}

fn default_tol() -> f64 {
    DEFAULT_INNER_TOL
}

impl GdConfig {
    pub fn new(l0: f64, gradient_error0: f64, value_error0: f64, mu: f64, iterations: usize) -> Self {
        GdConfig {
            l0,
            gradient_error0,
            value_error0,
            mu,
            iterations,
            x0: None,
            inner_tol: DEFAULT_INNER_TOL,
        }
    }

    pub fn starting_at(mut self, x0: Vec<f64>) -> Self {
        self.x0 = Some(x0);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [self.l0, self.gradient_error0, self.value_error0];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidParameter(
                "initial L, gradient error and value error must be positive".into(),
            ));
        }
        if !(self.mu >= 0.0 && 2.0 * self.mu < self.l0) {
            return Err(Error::InvalidParameter(format!(
                "need 0 <= 2 mu < L0, got mu = {}, L0 = {}",
                self.mu, self.l0
            )));
        }
        Ok(())
    }
}

/// One accepted iteration, producing `x^{k+1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GdRecord {
    pub k: usize,
    pub l: f64,
    pub gradient_error: f64,
    pub value_error: f64,
    pub x: Vec<f64>,
    /// Exact `f(x^{k+1})`.
    pub f: f64,
    pub best_f: f64,
    pub inner_loops: usize,
    /// `|x^{k+1} - x^k|`
    pub displacement: f64,
    pub prox_residual: f64,
}

impl GdRecord {
    /// `δ_{k+1} + Δ_{k+1} |x^{k+1} - x^k|`
    pub fn step_error(&self) -> f64 {
        self.value_error + self.gradient_error * self.displacement
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GdReport {
    pub y_out: Vec<f64>,
    pub best_index: usize,
    pub trace: Vec<GdRecord>,
    pub oracle_calls: usize,
    /// Convergence bound per iteration; empty when no distance bound is available.
    pub bound: Vec<f64>,
    pub r2: Option<f64>,
}

pub fn run_adaptive_gd<G: ProxGeometry + ?Sized>(
    setup: &G,
    oracle: &ModelOracle,
    config: &GdConfig,
) -> Result<GdReport> {
    config.validate()?;
    crate::error::check_dim(setup.dim(), oracle.dim())?;
    let mut x = config.x0.clone().unwrap_or_else(|| setup.prox_center());
    crate::error::check_dim(setup.dim(), x.len())?;
    if !setup.contains(&x) {
        return Err(Error::Infeasible {
            violation: f64::NAN,
        });
    }
    let x0 = x.clone();
    let cap = config.l0 * 2f64.powi(DOUBLING_CAP_LOG2);
    let mut l = config.l0;
    let mut grad_err = config.gradient_error0;
    let mut val_err = config.value_error0;
    let mut fx = oracle.value(&x);
    let mut trace = Vec::with_capacity(config.iterations);
    let mut calls = 0;
    let mut best_f = f64::INFINITY;
    let mut best_index = 0;
    let mut y_out = x.clone();
    for k in 0..config.iterations {
        l = config.mu.max(l / 2.0);
        grad_err = (grad_err / 2.0).max(PARAM_FLOOR);
        val_err = (val_err / 2.0).max(PARAM_FLOOR);
        let model = oracle.local_model(&x);
        let slack = ACCEPT_SLACK * (1.0 + fx.abs());
        let mut loops = 0;
        let (next, f_next, displacement, residual) = loop {
            loops += 1;
            calls += 1;
            let out = prox_step(setup, &x, &model, l, config.inner_tol)?;
            let f_next = oracle.value(&out.point);
            let displacement = setup.norm(&sub(&out.point, &x));
            let rhs = fx
                + model.eval(&out.point)
                + l * setup.divergence(&out.point, &x)
                + val_err
                + grad_err * displacement;
            if f_next <= rhs + slack {
                break (out.point, f_next, displacement, out.residual);
            }
            l *= 2.0;
            grad_err *= 2.0;
            val_err *= 2.0;
            if l > cap {
                return Err(Error::DoublingCap { iteration: k, l });
            }
        };
        let f_exact = oracle.exact_value(&next);
        if f_exact < best_f {
            best_f = f_exact;
            best_index = k;
            y_out = next.clone();
        }
        trace.push(GdRecord {
            k,
            l,
            gradient_error: grad_err,
            value_error: val_err,
            x: next.clone(),
            f: f_exact,
            best_f,
            inner_loops: loops,
            displacement,
            prox_residual: residual,
        });
        x = next;
        fx = f_next;
    }
    let r2 = match oracle.problem.x_star() {
        Some(xs) => Some(setup.divergence(xs, &x0)),
        None => setup.max_divergence(&x0).ok(),
    };
    let bound = match r2 {
        Some(r2) => gd_convergence_bound(&trace, r2, oracle.params.value_error, config.mu),
        None => Vec::new(),
    };
    Ok(GdReport {
        y_out,
        best_index,
        trace,
        oracle_calls: calls,
        bound,
        r2,
    })
}

/// Running contraction factor `prod_{j <= k+1} (1 - μ / L_j)` per iteration.
pub fn contraction_factors(trace: &[GdRecord], mu: f64) -> Vec<f64> {
    let mut p = 1.0;
    trace
        .iter()
        .map(|r| {
            p *= 1.0 - mu / r.l;
            p
        })
        .collect()
}

/// Right-hand side of the convergence bound after each iteration:
///
/// `(P_{k+1} R2 + sum_i w_i (δ + δ̂_{i+1})) / sum_i w_i`
///
/// with `w_i = prod_{j=i+2}^{k+1} (1 - μ/L_j) / L_{i+1}` and `P_{k+1} = prod_{j=1}^{k+1} (1 - μ/L_j)`.
pub fn gd_convergence_bound(trace: &[GdRecord], r2: f64, delta: f64, mu: f64) -> Vec<f64> {
    bound_from_steps(trace.iter().map(|r| (r.l, r.step_error())), r2, delta, mu)
}

/// Same bound from accepted `(L_{i+1}, δ̂_{i+1})` pairs.
pub fn bound_from_steps<I>(steps: I, r2: f64, delta: f64, mu: f64) -> Vec<f64>
where
    I: IntoIterator<Item = (f64, f64)>,
{
    let (mut weight, mut noise, mut factor) = (0.0, 0.0, 1.0);
    steps
        .into_iter()
        .map(|(l, step_error)| {
            let q = 1.0 - mu / l;
            weight = weight * q + 1.0 / l;
            noise = noise * q + (delta + step_error) / l;
            factor *= q;
            (factor * r2 + noise) / weight
        })
        .collect()
}

/// `max{1, 2δ/δ0, 2Δ/Δ0}`
pub fn inflation_constant(value_error: f64, gradient_error: f64, value_error0: f64, gradient_error0: f64) -> f64 {
    1f64.max(2.0 * value_error / value_error0)
        .max(2.0 * gradient_error / gradient_error0)
}

fn log_term(num: f64, den: f64) -> f64 {
    if num == 0.0 {
        0.0
    } else {
        (2.0 * num / den).log2()
    }
}

/// `2k + max{log2(2L/L0), log2(2δ/δ0), log2(2Δ/Δ0)}`, a term being 0 when its numerator is 0.
pub fn oracle_budget(
    iterations: usize,
    l0: f64,
    value_error0: f64,
    gradient_error0: f64,
    l: f64,
    value_error: f64,
    gradient_error: f64,
) -> f64 {
    2.0 * iterations as f64
        + log_term(l, l0)
            .max(log_term(value_error, value_error0))
            .max(log_term(gradient_error, gradient_error0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BudgetCheck {
    pub used: usize,
    pub allowed: f64,
    pub passed: bool,
    /// `allowed - used`
    pub slack: f64,
}

impl BudgetCheck {
    pub fn new(used: usize, allowed: f64) -> Self {
        BudgetCheck {
            used,
            allowed,
            passed: used as f64 <= allowed + 1e-9,
            slack: allowed - used as f64,
        }
    }
}

pub fn check_oracle_budget(
    report: &GdReport,
    config: &GdConfig,
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

/// CSV view: `k, L, Delta, delta, f, best_f, inner_loops, bound_rhs, displacement`.
impl TraceTable for GdReport {
    fn columns(&self) -> &'static [&'static str] {
        &[
            "k",
            "L",
            "Delta",
            "delta",
            "f",
            "best_f",
            "inner_loops",
            "bound_rhs",
            "displacement",
        ]
    }

    fn rows(&self) -> Vec<Vec<Cell>> {
        self.trace
            .iter()
            .enumerate()
            .map(|(i, r)| {
                vec![
                    r.k.into(),
                    r.l.into(),
                    r.gradient_error.into(),
                    r.value_error.into(),
                    r.f.into(),
                    r.best_f.into(),
                    r.inner_loops.into(),
                    self.bound.get(i).copied().unwrap_or(f64::NAN).into(),
                    r.displacement.into(),
                ]
            })
            .collect()
    }
}
