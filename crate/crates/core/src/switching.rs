//! Mirror descent with productive and unproductive steps for `min f` subject to
//! `g(x) <= 0`, where `g` is the pointwise maximum of the problem constraints.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::geometry::{mirror_step, FeasibleSet, ProxGeometry};
use crate::linalg::{axpy, norm2};
use crate::oracle::{Constraint, Objective, ProblemSpec};
use crate::reference::max_affine_minimum;
use crate::trace::{Cell, TraceTable};

/// Step-size and stopping policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SwitchVariant {
    /// Productive test `g <= ε |∇g|_*`, unproductive step `ε / |∇g|_*`.
    Adaptive,
    /// Productive test `g <= ε M_g`, relaxed Cauchy–Schwarz constant `ω`.
    Omega { omega: f64 },
    /// Productive test `g <= ε M_g`, constant productive step `ε / M_f^2`.
    RelativeLipschitz { objective_lipschitz: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwitchConfig {
    pub epsilon: f64,
    /// `Θ0^2` with `V(x*, x^0) <= Θ0^2`.
    pub theta0_sq: f64,
    pub variant: SwitchVariant,
    /// Lipschitz constant `M_g` of the constraint functional.
    pub constraint_lipschitz: f64,
    pub max_iterations: usize,
}

impl SwitchConfig {
    pub fn new(epsilon: f64, theta0_sq: f64, variant: SwitchVariant, constraint_lipschitz: f64) -> Self {
        SwitchConfig {
            epsilon,
            theta0_sq,
            variant,
            constraint_lipschitz,
            max_iterations: 10_000_000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.epsilon) || !positive(self.theta0_sq) {
            return Err(Error::InvalidParameter("epsilon and Θ0^2 must be positive".into()));
        }
        match self.variant {
            SwitchVariant::Adaptive => {}
            SwitchVariant::Omega { omega } if !positive(omega) => {
                return Err(Error::InvalidParameter("omega must be positive".into()))
            }
            SwitchVariant::RelativeLipschitz { objective_lipschitz } if !positive(objective_lipschitz) => {
                return Err(Error::InvalidParameter("M_f must be positive".into()))
            }
            _ => {}
        }
        if !matches!(self.variant, SwitchVariant::Adaptive) && !positive(self.constraint_lipschitz) {
            return Err(Error::InvalidParameter("M_g must be positive".into()));
        }
        Ok(())
    }

    /// Right-hand side `2 Θ0^2 / ε^2` of the stopping rule.
    pub fn stop_threshold(&self) -> f64 {
        2.0 * self.theta0_sq / (self.epsilon * self.epsilon)
    }
}

/// Iteration count after which the stopping rule must have fired when `f` is
/// `M_f`-Lipschitz.
pub fn stopping_horizon(epsilon: f64, theta0_sq: f64, objective_lipschitz: f64) -> u64 {
    let m = objective_lipschitz.powi(2).max(1.0);
    (2.0 * theta0_sq * m / (epsilon * epsilon) - 1e-9).ceil() as u64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwitchStep {
    pub k: usize,
    pub productive: bool,
    pub h: f64,
    pub f: f64,
    pub g: f64,
    /// `|∇f(x^k)|_*` on productive steps, `|∇g(x^k)|_*` otherwise.
    pub dual_norm: f64,
    /// Constraint attaining `g(x^k)` on unproductive steps.
    pub constraint: Option<usize>,
    pub stop_lhs: f64,
    pub stop_rhs: f64,
    pub x: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwitchReport {
    pub x_hat: Vec<f64>,
    pub productive: usize,
    pub unproductive: usize,
    pub epsilon: f64,
    /// Stopped at a point with zero objective subgradient instead of by the rule.
    pub stationary: bool,
    /// `min_k V(x*, x^k) < ε^2 / 2`, known only with a reference solution.
    pub escape: Option<bool>,
    pub trace: Vec<SwitchStep>,
}

impl SwitchReport {
    pub fn iterations(&self) -> usize {
        self.productive + self.unproductive
    }
}

/// Runs the switching scheme from the prox center until the stopping rule holds.
pub fn run_switching<G: ProxGeometry + ?Sized>(
    problem: &ProblemSpec,
    setup: &G,
    config: &SwitchConfig,
) -> Result<SwitchReport> {
    config.validate()?;
    check_dim(setup.dim(), problem.dim())?;
    let eps = config.epsilon;
    let rhs = config.stop_threshold();
    let m_g = config.constraint_lipschitz;
    let x_star = problem.x_star();
    let mut x = setup.prox_center();
    let mut lhs = 0.0;
    let mut h_total = 0.0;
    let mut weighted = vec![0.0; x.len()];
    let mut min_div = f64::INFINITY;
    let mut trace = Vec::new();
    let mut stationary = false;

    loop {
        let k = trace.len();
        if k >= config.max_iterations {
            return Err(Error::BudgetExhausted {
                iterations: k,
                detail: format!("stopping sum {lhs:e} is below {rhs:e}"),
            });
        }
        if let Some(xs) = x_star {
            min_div = min_div.min(setup.divergence(xs, &x));
        }
        let f = problem.value(&x);
        let g = problem.constraint_value(&x);
        let active = problem.constraint_subgradient(&x);
        let g_norm = active.as_ref().map_or(0.0, |(_, v)| setup.dual_norm(v));
        let productive = match config.variant {
            SwitchVariant::Adaptive => g <= eps * g_norm,
            _ => g <= eps * m_g,
        };
        let (h, dual_norm, constraint, direction) = if productive {
            let grad = problem.objective.subgradient(&x);
            let norm = setup.dual_norm(&grad);
            let (h, weight) = match config.variant {
                SwitchVariant::RelativeLipschitz { objective_lipschitz } => {
                    let m2 = objective_lipschitz * objective_lipschitz;
                    (eps / m2, 1.0 / m2)
                }
                SwitchVariant::Omega { omega } if norm > 0.0 => {
                    (eps / (norm * norm), omega * omega / (norm * norm))
                }
                _ if norm > 0.0 => (eps / (norm * norm), 1.0 / (norm * norm)),
                _ => {
                    stationary = true;
                    (0.0, 0.0)
                }
            };
            if stationary {
                trace.push(SwitchStep {
                    k,
                    productive,
                    h,
                    f,
                    g,
                    dual_norm: norm,
                    constraint: None,
                    stop_lhs: lhs,
                    stop_rhs: rhs,
                    x: x.clone(),
                });
                break;
            }
            lhs += weight;
            h_total += h;
            weighted = axpy(&weighted, h, &x);
            (h, norm, None, grad)
        } else {
            let (idx, grad) = active.ok_or_else(|| {
                Error::Invariant("unproductive step without constraints".into())
            })?;
            if g_norm == 0.0 {
                return Err(Error::Invariant(format!(
                    "constraint value {g:e} > 0 with a zero subgradient"
                )));
            }
            let h = match config.variant {
                SwitchVariant::Adaptive => eps / g_norm,
                _ => eps / m_g,
            };
            lhs += 1.0;
            (h, g_norm, Some(idx), grad)
        };
        let scaled: Vec<f64> = direction.iter().map(|v| h * v).collect();
        let next = mirror_step(setup, &x, &scaled)?;
        trace.push(SwitchStep {
            k,
            productive,
            h,
            f,
            g,
            dual_norm,
            constraint,
            stop_lhs: lhs,
            stop_rhs: rhs,
            x: std::mem::replace(&mut x, next),
        });
        if lhs >= rhs {
            break;
        }
    }

    let productive = trace.iter().filter(|s| s.productive).count();
    let unproductive = trace.len() - productive;
    let x_hat = if stationary {
        trace.last().map(|s| s.x.clone()).unwrap_or_default()
    } else if h_total > 0.0 {
        weighted.iter().map(|v| v / h_total).collect()
    } else {
        return Err(Error::Invariant("stopped without a productive step".into()));
    };
    Ok(SwitchReport {
        x_hat,
        productive,
        unproductive,
        epsilon: eps,
        stationary,
        escape: x_star.map(|_| min_div < eps * eps / 2.0),
        trace,
    })
}

/// Dual pair produced from the unproductive steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualCertificate {
    pub lambda_hat: Vec<f64>,
    pub primal_value: f64,
    pub dual_value: f64,
    pub gap: f64,
    /// `Σ λ_i max(g_i(x̂), 0)`; weak duality gives `gap >= -infeasibility_credit`.
    pub infeasibility_credit: f64,
}

/// `λ_i = Σ_{k in J_i} h_k / Σ_{k in I} h_k` and `φ(λ) = min_Q f + Σ λ_i g_i`.
///
/// The Lagrangian is minimized exactly when `f` is max-affine and every constraint is
/// affine, over a box, simplex or halfspace set (single affine pieces over a ball too).
pub fn dual_certificate(problem: &ProblemSpec, report: &SwitchReport) -> Result<DualCertificate> {
    let m = problem.constraints.len();
    let productive_h: f64 = report.trace.iter().filter(|s| s.productive).map(|s| s.h).sum();
    if productive_h <= 0.0 {
        return Err(Error::Invariant("no productive step weight".into()));
    }
    let mut lambda = vec![0.0; m];
    for s in report.trace.iter().filter(|s| !s.productive) {
        if let Some(i) = s.constraint {
            lambda[i] += s.h / productive_h;
        }
    }
    let dual_value = lagrangian_minimum(problem, &lambda)?;
    let primal_value = problem.value(&report.x_hat);
    let infeasibility_credit = problem
        .constraints
        .iter()
        .zip(&lambda)
        .map(|(c, l)| l * c.value(&report.x_hat).max(0.0))
        .sum();
    Ok(DualCertificate {
        lambda_hat: lambda,
        primal_value,
        dual_value,
        gap: primal_value - dual_value,
        infeasibility_credit,
    })
}

fn lagrangian_minimum(problem: &ProblemSpec, lambda: &[f64]) -> Result<f64> {
    let (a, b) = match &problem.objective {
        Objective::MaxAffine { a, b } => (a.clone(), b.clone()),
        _ => return Err(Error::Unsupported("dual function needs a max-affine objective".into())),
    };
    let n = problem.dim();
    let mut slope = vec![0.0; n];
    let mut shift = 0.0;
    for (c, l) in problem.constraints.iter().zip(lambda) {
        match c {
            Constraint::Affine { a: ci, b: di } => {
                slope = axpy(&slope, *l, ci);
                shift += l * di;
            }
            _ => return Err(Error::Unsupported("dual function needs affine constraints".into())),
        }
    }
    let pieces: Vec<Vec<f64>> = a.iter().map(|ai| axpy(ai, 1.0, &slope)).collect();
    let offsets: Vec<f64> = b.iter().map(|bi| bi + shift).collect();
    if pieces.len() == 1 && !matches!(problem.set, FeasibleSet::WholeSpace { .. }) {
        return Ok(problem.set.linear_min(&pieces[0])? + offsets[0]);
    }
    Ok(max_affine_minimum(&pieces, &offsets, &problem.set)?.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelativeAccuracyConfig {
    pub delta_rel: f64,
    pub gamma0: f64,
    pub gamma1: f64,
    pub theta0_sq: f64,
    pub objective_lipschitz: f64,
    pub constraint_lipschitz: f64,
    #[serde(default = "default_probes")]
    pub probes: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_probes() -> usize {
    1000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelativeAccuracyReport {
    /// `⌈4 / (γ0^2 δ^2)⌉`
    pub planned_iterations: u64,
    pub epsilon: f64,
    /// Whether `2 max{1, M_f^2} > Θ0^2`.
    pub inflated: bool,
    /// `⌈8 max{1, M_f^2} / (γ0^2 δ^2)⌉`
    pub inflated_count: u64,
    /// Budget handed to the run.
    pub iteration_cap: u64,
    pub iterations: usize,
    pub x_hat: Vec<f64>,
    pub f_hat: f64,
    pub g_hat: f64,
    /// `2 / (γ0 sqrt(N))`
    pub rel_error_bound: f64,
    /// `M_g Θ0^2 / sqrt(N)`
    pub constraint_bound: f64,
    pub run: SwitchReport,
}

/// Samples `probes` points of the set and checks positive homogeneity and
/// `γ0 |x| <= f(x) <= γ1 |x|`, returning the largest violation.
pub fn homogeneity_violation(
    objective: &Objective,
    set: &FeasibleSet,
    gamma0: f64,
    gamma1: f64,
    probes: usize,
    seed: u64,
) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..probes {
        let x = set.sample(&mut rng, 2.0);
        let f = objective.value(&x);
        let r = norm2(&x);
        for t in [0.5, 2.0, 3.7] {
            let scaled: Vec<f64> = x.iter().map(|v| t * v).collect();
            worst = worst.max((objective.value(&scaled) - t * f).abs() / (1.0 + t * f.abs()));
        }
        worst = worst.max(gamma0 * r - f).max(f - gamma1 * r);
    }
    worst
}

/// Relative-accuracy driver for a positively homogeneous objective.
pub fn relative_accuracy_run<G: ProxGeometry + ?Sized>(
    problem: &ProblemSpec,
    setup: &G,
    config: &RelativeAccuracyConfig,
) -> Result<RelativeAccuracyReport> {
    let positive = |v: f64| v > 0.0 && v.is_finite();
    if ![config.delta_rel, config.gamma0, config.gamma1, config.theta0_sq]
        .into_iter()
        .all(positive)
        || config.gamma0 > config.gamma1
    {
        return Err(Error::InvalidParameter(
            "need positive δ, Θ0^2 and 0 < γ0 <= γ1".into(),
        ));
    }
    let violation = homogeneity_violation(
        &problem.objective,
        &FeasibleSet::whole_space(problem.dim()),
        config.gamma0,
        config.gamma1,
        config.probes,
        config.seed,
    );
    if violation > 1e-9 {
        return Err(Error::InvalidSetup(format!(
            "objective failed the homogeneity probe (violation {violation:e})"
        )));
    }
    let x0 = setup.prox_center();
    if let Some(xs) = problem.x_star() {
        let v = setup.divergence(xs, &x0);
        if v > config.theta0_sq {
            return Err(Error::InvalidParameter(format!(
                "Θ0^2 = {} is below V(x*, x0) = {v}",
                config.theta0_sq
            )));
        }
    }
    let g2d2 = (config.gamma0 * config.delta_rel).powi(2);
    let n = (4.0 / g2d2 - 1e-9).ceil().max(1.0) as u64;
    let epsilon = config.theta0_sq / (n as f64).sqrt();
    let m = config.objective_lipschitz.powi(2).max(1.0);
    let inflated = 2.0 * m > config.theta0_sq;
    let inflated_count = (8.0 * m / g2d2 - 1e-9).ceil() as u64;
    let horizon = stopping_horizon(epsilon, config.theta0_sq, config.objective_lipschitz);
    let iteration_cap = if inflated {
        n.max(inflated_count).max(horizon)
    } else {
        n.max(horizon)
    };
    let mut switch = SwitchConfig::new(
        epsilon,
        config.theta0_sq,
        SwitchVariant::RelativeLipschitz {
            objective_lipschitz: config.objective_lipschitz,
        },
        config.constraint_lipschitz,
    );
    switch.max_iterations = iteration_cap as usize;
    let run = run_switching(problem, setup, &switch)?;
    let sqrt_n = (n as f64).sqrt();
    Ok(RelativeAccuracyReport {
        planned_iterations: n,
        epsilon,
        inflated,
        inflated_count,
        iteration_cap,
        iterations: run.iterations(),
        f_hat: problem.value(&run.x_hat),
        g_hat: problem.constraint_value(&run.x_hat),
        x_hat: run.x_hat.clone(),
        rel_error_bound: 2.0 / (config.gamma0 * sqrt_n),
        constraint_bound: config.constraint_lipschitz * config.theta0_sq / sqrt_n,
        run,
    })
}

impl TraceTable for SwitchReport {
    fn columns(&self) -> &'static [&'static str] {
        &[
            "k",
            "productive",
            "h",
            "f",
            "g",
            "dualnorm",
            "running_stop_lhs",
            "running_stop_rhs",
        ]
    }

    fn rows(&self) -> Vec<Vec<Cell>> {
        self.trace
            .iter()
            .map(|s| {
                vec![
                    s.k.into(),
                    s.productive.into(),
                    s.h.into(),
                    s.f.into(),
                    s.g.into(),
                    s.dual_norm.into(),
                    s.stop_lhs.into(),
                    s.stop_rhs.into(),
                ]
            })
            .collect()
    }
}
