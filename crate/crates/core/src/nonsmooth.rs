//! Nonsmooth problems treated as inexact smooth ones.
//!
//! A subgradient jump bound `Δ` turns a nonsmooth `f` into a `(0, Δ, L)`-model for any
//! `L > 0`. The gradient method then repeats each prox step with doubled `L` until the
//! noise term `Δ |x^{k+1} - x^k|` is below `ε/2` or a plain descent test holds; the fast
//! method instead runs with a fixed inflated step `2^p L`.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::fgm::largest_root_alpha;
use crate::gd::{bound_from_steps, ACCEPT_SLACK};
use crate::geometry::{prox_step, ProxGeometry, DEFAULT_INNER_TOL};
use crate::linalg::{blend, sub};
use crate::oracle::{standard_model, ProblemSpec};
use crate::trace::{Cell, TraceTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RestartMode {
    Gd,
    GdStronglyConvex,
    Fgm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RestartPlan {
    pub epsilon: f64,
    pub p: u32,
    pub gamma: f64,
    pub mode: RestartMode,
}

/// Smallest `p >= 0` with `2^p >= t`.
fn smallest_power(t: f64) -> u32 {
    let mut p = 0;
    while 2f64.powi(p as i32) < t {
        p += 1;
    }
    p
}

/// Smallest `p` with `2^p >= 1 + 16 Δ^2 / (ε L)`.
pub fn choose_p_gd(gradient_jump: f64, epsilon: f64, l: f64) -> u32 {
    smallest_power(1.0 + 16.0 * gradient_jump * gradient_jump / (epsilon * l))
}

/// `ceil(log2(1 + 4 γ Δ^2 / (L ε)))`
pub fn choose_p_fgm(gradient_jump: f64, epsilon: f64, l: f64, gamma: f64) -> u32 {
    smallest_power(1.0 + 4.0 * gamma * gradient_jump * gradient_jump / (l * epsilon))
}

/// Closed-form budget of step executions for the plan's mode.
pub fn predicted_calls(
    plan: &RestartPlan,
    l: f64,
    gradient_jump: f64,
    r2: f64,
    mu: f64,
    c: f64,
) -> Result<u64> {
    let eps = plan.epsilon;
    if !(eps > 0.0 && l > 0.0 && r2 >= 0.0 && gradient_jump >= 0.0) {
        return Err(Error::InvalidParameter("restart budget needs ε, L > 0 and R2, Δ >= 0".into()));
    }
    let d2 = gradient_jump * gradient_jump;
    let gd_log = f64::from(choose_p_gd(gradient_jump, eps, l).max(1));
    let value = match plan.mode {
        RestartMode::Gd => {
            if mu != 0.0 {
                return Err(Error::InvalidParameter("gd budget assumes mu = 0".into()));
            }
            (4.0 * l * r2 / eps + 64.0 * d2 * r2 / (eps * eps)).ceil() * gd_log
        }
        RestartMode::GdStronglyConvex => {
            if mu <= 0.0 {
                return Err(Error::InvalidParameter("strongly convex budget needs mu > 0".into()));
            }
            let rate = 2.0 * c * l / mu + 32.0 * c * d2 / (mu * eps);
            let log = (4.0 * c * l * r2 / eps + 64.0 * c * r2 / (eps * eps)).ln();
            (rate * log).ceil() * gd_log - 1.0
        }
        RestartMode::Fgm => {
            if mu != 0.0 {
                return Err(Error::InvalidParameter("fgm budget assumes mu = 0".into()));
            }
            let r = r2.sqrt();
            let s2 = 2f64.sqrt();
            let head = (32.0 + 16.0 * s2) * d2 * r2 / (eps * eps) + 2.0 * r * (2.0 * l).sqrt() / eps.sqrt();
            let arg = 1.0
                + (128.0 + 64.0 * s2) * d2 * d2 * r2 / (l * eps.powi(3))
                + 8.0 * r * d2 * s2 / (l * eps.powi(3)).sqrt();
            head.ceil() * arg.log2().ceil().max(1.0)
        }
    };
    Ok(value.max(0.0) as u64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopRule {
    /// `min_i f(x^{i+1}) - f* <= ε` against the attached reference optimum.
    ReferenceGap,
    /// The convergence bound of the gradient method drops to `ε`.
    CertifiedBound,
}

/// Unknown-constant variant: start from guesses and adapt `L` and `Δ` like the
/// adaptive gradient method.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveStart {
    pub l0: f64,
    pub gradient_jump0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartGdConfig {
    pub epsilon: f64,
    pub smoothness: f64,
    pub gradient_jump: f64,
    #[serde(default)]
    pub mu: f64,
    pub stop: StopRule,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adaptive: Option<AdaptiveStart>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartRecord {
    pub k: usize,
    pub l: f64,
    pub f: f64,
    pub best_f: f64,
    /// Prox steps executed in this iteration.
    pub steps: usize,
    pub displacement: f64,
    /// Noise term charged to this iteration: 0 after a descent exit, `Δ |x^{k+1} - x^k|` otherwise.
    pub step_error: f64,
    pub descent_exit: bool,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartReport {
    pub mode: RestartMode,
    pub epsilon: f64,
    pub p: u32,
    pub x_out: Vec<f64>,
    pub f_out: f64,
    pub f_gap: Option<f64>,
    pub iterations: usize,
    /// Prox step executions.
    pub calls_realized: u64,
    pub subgradient_calls: u64,
    pub calls_predicted: u64,
    pub r2: f64,
    pub trace: Vec<RestartRecord>,
}

fn start_point<G: ProxGeometry + ?Sized>(setup: &G, x0: &Option<Vec<f64>>) -> Result<Vec<f64>> {
    let x = x0.clone().unwrap_or_else(|| setup.prox_center());
    check_dim(setup.dim(), x.len())?;
    if !setup.contains(&x) {
        return Err(Error::Infeasible { violation: f64::NAN });
    }
    Ok(x)
}

fn distance_bound<G: ProxGeometry + ?Sized>(setup: &G, problem: &ProblemSpec, x0: &[f64]) -> Result<f64> {
    match problem.x_star() {
        Some(xs) => Ok(setup.divergence(xs, x0)),
        None => setup.max_divergence(x0),
    }
}

/// Gradient method with the restart procedure on an exactly given `f`.
pub fn run_restarted_gd<G: ProxGeometry + ?Sized>(
    setup: &G,
    problem: &ProblemSpec,
    config: &RestartGdConfig,
) -> Result<RestartReport> {
    check_dim(setup.dim(), problem.dim())?;
    let eps = config.epsilon;
    let l = config.smoothness;
    let jump = config.gradient_jump;
    if !(eps > 0.0 && l > 0.0 && jump >= 0.0 && config.mu >= 0.0 && config.mu <= l) {
        return Err(Error::InvalidParameter("need ε > 0, L > 0, Δ >= 0, 0 <= mu <= L".into()));
    }
    let f_star = problem.f_star();
    if config.stop == StopRule::ReferenceGap && f_star.is_none() {
        return Err(Error::InvalidSetup("reference-gap stopping needs f*".into()));
    }
    let mut x = start_point(setup, &config.x0)?;
    let r2 = distance_bound(setup, problem, &x)?;
    let mode = if config.mu > 0.0 { RestartMode::GdStronglyConvex } else { RestartMode::Gd };
    let p = choose_p_gd(jump, eps, l);
    let plan = RestartPlan { epsilon: eps, p, gamma: 1.0, mode };
    let inflation = match config.adaptive {
        Some(a) => (2.0 * l / a.l0).max(2.0 * jump / a.gradient_jump0).ceil().max(1.0),
        None => 1.0,
    };
    let predicted = (predicted_calls(&plan, l, jump, r2, config.mu, 1.0)? as f64 * inflation) as u64;
    let step_cap = p.max(1) as usize;

    let mut fx = problem.value(&x);
    let mut trace: Vec<RestartRecord> = Vec::new();
    let mut calls = 0u64;
    let mut subgradients = 0u64;
    let mut best_f = f64::INFINITY;
    let mut y_out = x.clone();
    let mut steps_for_bound: Vec<(f64, f64)> = Vec::new();
    let (mut l_run, mut jump_run) = match config.adaptive {
        Some(a) => (a.l0, a.gradient_jump0),
        None => (l, jump),
    };
    let mut k = 0;
    loop {
        if calls >= predicted.max(1) {
            return Err(Error::BudgetExhausted {
                iterations: k,
                detail: format!("{calls} prox steps without reaching ε = {eps:e}"),
            });
        }
        let model = standard_model(problem, &x);
        subgradients += 1;
        let (mut lk, mut dk) = match config.adaptive {
            Some(_) => (config.mu.max(l_run / 2.0), jump_run / 2.0),
            None => (config.mu.max(l), jump),
        };
        let slack = ACCEPT_SLACK * (1.0 + fx.abs());
        let mut steps = 0;
        let (next, f_next, displacement, step_error, descent) = loop {
            steps += 1;
            calls += 1;
            let out = prox_step(setup, &x, &model, lk, DEFAULT_INNER_TOL)?;
            let f_next = problem.value(&out.point);
            let d = setup.norm(&sub(&out.point, &x));
            let base = fx + model.eval(&out.point) + lk * setup.divergence(&out.point, &x);
            if f_next <= base + slack {
                break (out.point, f_next, d, 0.0, true);
            }
            if dk * d <= eps / 2.0 && f_next <= base + dk * d + slack {
                break (out.point, f_next, d, dk * d, false);
            }
            if config.adaptive.is_none() && steps >= step_cap {
                return Err(Error::Invariant(format!(
                    "iteration {k}: no exit after {steps} doublings with p = {p}"
                )));
            }
            lk *= 2.0;
            if config.adaptive.is_some() {
                dk *= 2.0;
            }
        };
        l_run = lk;
        jump_run = dk;
        steps_for_bound.push((lk, step_error));
        let bound = *bound_from_steps(steps_for_bound.iter().copied(), r2, 0.0, config.mu)
            .last()
            .expect("nonempty");
        if f_next < best_f {
            best_f = f_next;
            y_out = next.clone();
        }
        trace.push(RestartRecord {
            k,
            l: lk,
            f: f_next,
            best_f,
            steps,
            displacement,
            step_error,
            descent_exit: descent,
            bound,
        });
        x = next;
        fx = f_next;
        k += 1;
        let done = match config.stop {
            StopRule::ReferenceGap => best_f - f_star.expect("checked") <= eps,
            StopRule::CertifiedBound => bound <= eps,
        };
        if done {
            break;
        }
    }
    Ok(RestartReport {
        mode,
        epsilon: eps,
        p,
        f_out: best_f,
        f_gap: f_star.map(|fs| best_f - fs),
        x_out: y_out,
        iterations: k,
        calls_realized: calls,
        subgradient_calls: subgradients,
        calls_predicted: predicted,
        r2,
        trace,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartFgmConfig {
    pub epsilon: f64,
    pub smoothness: f64,
    pub gradient_jump: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    /// Stop as soon as `f(x^k) - f* <= ε`.
    #[serde(default)]
    pub stop_on_gap: bool,
}

/// Iteration count and aggregation constant of the fixed-step fast method.
pub fn fgm_iterations(gradient_jump: f64, epsilon: f64, l: f64, r2: f64) -> usize {
    if gradient_jump == 0.0 {
        return (2.0 * r2.sqrt() * (2.0 * l / epsilon).sqrt()).ceil() as usize;
    }
    let a = 32.0 * gradient_jump * gradient_jump * r2 / (epsilon * epsilon);
    (a + (a * a + 16.0 * l * r2 / epsilon).sqrt()).ceil() as usize
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedStepRecord {
    pub k: usize,
    pub a: f64,
    pub f: f64,
    pub xy_displacement: f64,
    /// The descent test with step `2^p L` and slack `ε / (2γ)` held.
    pub test_held: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartFgmReport {
    pub mode: RestartMode,
    pub epsilon: f64,
    pub p: u32,
    pub gamma: f64,
    pub planned_iterations: usize,
    pub x_out: Vec<f64>,
    pub f_out: f64,
    pub f_gap: Option<f64>,
    pub calls_realized: u64,
    pub calls_predicted: u64,
    pub test_failures: usize,
    pub r2: f64,
    pub trace: Vec<FixedStepRecord>,
}

/// Fast gradient method with fixed step `2^p L` and `δ = ε / (2γ)`, `γ = N`.
pub fn run_restarted_fgm<G: ProxGeometry + ?Sized>(
    setup: &G,
    problem: &ProblemSpec,
    config: &RestartFgmConfig,
) -> Result<RestartFgmReport> {
    check_dim(setup.dim(), problem.dim())?;
    let eps = config.epsilon;
    let l = config.smoothness;
    let jump = config.gradient_jump;
    if !(eps > 0.0 && l > 0.0 && jump >= 0.0) {
        return Err(Error::InvalidParameter("need ε > 0, L > 0, Δ >= 0".into()));
    }
    let f_star = problem.f_star();
    if config.stop_on_gap && f_star.is_none() {
        return Err(Error::InvalidSetup("gap stopping needs f*".into()));
    }
    let x0 = start_point(setup, &config.x0)?;
    let r2 = distance_bound(setup, problem, &x0)?;
    let n = fgm_iterations(jump, eps, l, r2).max(1);
    let gamma = n as f64;
    let p = choose_p_fgm(jump, eps, l, gamma);
    let plan = RestartPlan { epsilon: eps, p, gamma, mode: RestartMode::Fgm };
    let predicted = predicted_calls(&plan, l, jump, r2, 0.0, 1.0)?;
    let step = 2f64.powi(p as i32) * l;
    let delta = eps / (2.0 * gamma);

    let mut x = x0.clone();
    let mut u = x0;
    let mut a_sum = 0.0;
    let mut trace = Vec::with_capacity(n);
    let mut calls = 0u64;
    let mut failures = 0;
    let mut fx = problem.value(&x);
    for k in 0..n {
        let alpha = largest_root_alpha(a_sum, step);
        let y = blend(alpha, &u, a_sum, &x);
        let model = standard_model(problem, &y);
        calls += 1;
        let out = prox_step(setup, &u, &model, 1.0 / alpha, DEFAULT_INNER_TOL)?;
        let x_next = blend(alpha, &out.point, a_sum, &x);
        let fy = problem.value(&y);
        fx = problem.value(&x_next);
        let d = setup.norm(&sub(&x_next, &y));
        let held = fx <= fy + model.eval(&x_next) + 0.5 * step * d * d + delta + ACCEPT_SLACK * (1.0 + fy.abs());
        if !held {
            failures += 1;
        }
        a_sum += alpha;
        trace.push(FixedStepRecord { k, a: a_sum, f: fx, xy_displacement: d, test_held: held });
        x = x_next;
        u = out.point;
        if config.stop_on_gap && fx - f_star.expect("checked") <= eps {
            break;
        }
    }
    Ok(RestartFgmReport {
        mode: RestartMode::Fgm,
        epsilon: eps,
        p,
        gamma,
        planned_iterations: n,
        f_out: fx,
        f_gap: f_star.map(|fs| fx - fs),
        x_out: x,
        calls_realized: calls,
        calls_predicted: predicted,
        test_failures: failures,
        r2,
        trace,
    })
}

/// CSV view: `k, L, f, best_f, steps, displacement, step_error, descent_exit, bound_rhs`.
impl TraceTable for RestartReport {
    fn columns(&self) -> &'static [&'static str] {
        &["k", "L", "f", "best_f", "steps", "displacement", "step_error", "descent_exit", "bound_rhs"]
    }

    fn rows(&self) -> Vec<Vec<Cell>> {
        self.trace
            .iter()
            .map(|r| {
                vec![
                    r.k.into(),
                    r.l.into(),
                    r.f.into(),
                    r.best_f.into(),
                    r.steps.into(),
                    r.displacement.into(),
                    r.step_error.into(),
                    r.descent_exit.into(),
                    r.bound.into(),
                ]
            })
            .collect()
    }
}

/// CSV view: `k, A, f, xy_displacement, test_held`.
impl TraceTable for RestartFgmReport {
    fn columns(&self) -> &'static [&'static str] {
        &["k", "A", "f", "xy_displacement", "test_held"]
    }

    fn rows(&self) -> Vec<Vec<Cell>> {
        self.trace
            .iter()
            .map(|r| vec![r.k.into(), r.a.into(), r.f.into(), r.xy_displacement.into(), r.test_held.into()])
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{FeasibleSet, ProxSetup};
    use crate::oracle::Objective;

    #[test]
    fn p_examples() {
        assert_eq!(choose_p_gd(0.0, 0.1, 1.0), 0);
        // 16 Δ^2 / (ε L) = 15 and 16
        assert_eq!(choose_p_gd(15f64.sqrt() / 4.0, 1.0, 1.0), 4);
        assert_eq!(choose_p_gd(1.0, 1.0, 1.0), 5);
        assert_eq!(choose_p_fgm(0.0, 0.1, 1.0, 10.0), 0);
        // 4 γ Δ^2 / (L ε) = 4 and 1
        assert_eq!(choose_p_fgm(1.0, 1.0, 1.0, 1.0), 3);
        assert_eq!(choose_p_fgm(0.5, 1.0, 1.0, 1.0), 1);
    }

    fn plan(mode: RestartMode, eps: f64) -> RestartPlan {
        RestartPlan { epsilon: eps, p: 0, gamma: 1.0, mode }
    }

    #[test]
    fn predicted_examples() {
        assert_eq!(predicted_calls(&plan(RestartMode::Gd, 0.01), 1.0, 0.0, 1.0, 0.0, 1.0).unwrap(), 400);
        assert_eq!(predicted_calls(&plan(RestartMode::Fgm, 0.01), 1.0, 0.0, 1.0, 0.0, 1.0).unwrap(), 29);
        // 16 Δ^2 / (ε L) = 15: factor 4 on the bracket
        let d = 15f64.sqrt() / 4.0;
        let bracket = (4.0 + 64.0 * d * d).ceil();
        assert_eq!(
            predicted_calls(&plan(RestartMode::Gd, 1.0), 1.0, d, 1.0, 0.0, 1.0).unwrap(),
            (bracket * 4.0) as u64
        );
        assert!(predicted_calls(&plan(RestartMode::Gd, 0.1), 1.0, 0.0, 1.0, 0.5, 1.0).is_err());
        assert!(predicted_calls(&plan(RestartMode::GdStronglyConvex, 0.1), 1.0, 0.0, 1.0, 0.0, 1.0).is_err());
        // μ > 0, Δ = 0: ceil(2L/μ ln(4LR2/ε + 64R2/ε^2)) - 1
        let expected = (2.0 * 10.0 * (4.0 / 0.1 + 64.0 / 0.01f64).ln()).ceil() - 1.0;
        assert_eq!(
            predicted_calls(&plan(RestartMode::GdStronglyConvex, 0.1), 1.0, 0.0, 1.0, 0.1, 1.0).unwrap(),
            expected as u64
        );
    }

    #[test]
    fn fgm_iteration_counts() {
        // Δ = 0: ceil(2R sqrt(2L/ε))
        assert_eq!(fgm_iterations(0.0, 0.01, 1.0, 1.0), 29);
        let a: f64 = 32.0 * 0.25 / 1e-2;
        assert_eq!(fgm_iterations(0.5, 0.1, 1.0, 1.0), (a + (a * a + 160.0).sqrt()).ceil() as usize);
    }

    fn abs_value() -> (ProxSetup, ProblemSpec) {
        let set = FeasibleSet::whole_space(1);
        let p = ProblemSpec::new(Objective::Norm { dim: 1 }, set.clone())
            .unwrap()
            .with_reference(0.0, Some(vec![0.0]))
            .unwrap();
        (ProxSetup::euclidean(set).unwrap(), p)
    }

    #[test]
    fn restarted_gd_on_absolute_value() {
        let (s, p) = abs_value();
        let cfg = RestartGdConfig {
            epsilon: 0.1,
            smoothness: 1.0,
            gradient_jump: 2.0,
            mu: 0.0,
            stop: StopRule::ReferenceGap,
            x0: Some(vec![1.0]),
            adaptive: None,
        };
        let r = run_restarted_gd(&s, &p, &cfg).unwrap();
        assert!(r.f_out <= 0.1);
        assert!(r.calls_realized <= r.calls_predicted);
        let certified = run_restarted_gd(&s, &p, &RestartGdConfig { stop: StopRule::CertifiedBound, ..cfg }).unwrap();
        assert!(certified.f_out <= 0.1);
        assert!(certified.trace.last().unwrap().bound <= 0.1);
        assert!(certified.calls_realized <= certified.calls_predicted);
    }

    #[test]
    fn restarted_gd_without_jump_is_plain_gd() {
        let set = FeasibleSet::whole_space(2);
        let q = vec![vec![2.0, 0.0], vec![0.0, 1.0]];
        let p = ProblemSpec::new(Objective::Quadratic { q, b: vec![2.0, 1.0] }, set.clone())
            .unwrap()
            .with_reference(-1.5, Some(vec![1.0, 1.0]))
            .unwrap();
        let s = ProxSetup::euclidean(set).unwrap();
        let cfg = RestartGdConfig {
            epsilon: 1e-4,
            smoothness: 2.0,
            gradient_jump: 0.0,
            mu: 0.0,
            stop: StopRule::CertifiedBound,
            x0: Some(vec![0.0, 0.0]),
            adaptive: None,
        };
        let r = run_restarted_gd(&s, &p, &cfg).unwrap();
        assert_eq!(r.p, 0);
        assert!(r.trace.iter().all(|t| t.steps == 1));
        assert!(r.calls_realized <= (4.0 * 2.0 * r.r2 / 1e-4f64).ceil() as u64);
        assert!(r.f_gap.unwrap() <= 1e-4);
    }

    #[test]
    fn restarted_fgm_on_absolute_value() {
        let (s, p) = abs_value();
        let cfg = RestartFgmConfig { epsilon: 0.1, smoothness: 1.0, gradient_jump: 2.0, x0: Some(vec![1.0]), stop_on_gap: false };
        let r = run_restarted_fgm(&s, &p, &cfg).unwrap();
        assert_eq!(r.test_failures, 0);
        assert!(r.f_gap.unwrap() <= 0.1);
        assert!(r.calls_realized <= r.calls_predicted);
    }
}
