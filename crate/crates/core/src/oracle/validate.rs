use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::ModelOracle;
use crate::error::{check_dim, Error, Result};
use crate::geometry::ProxGeometry;
use crate::linalg::sub;

pub const VALIDATION_TOL: f64 = 1e-9;
const MAX_EXAMPLES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelSide {
    /// `f_delta(x)` outside `[f(x) - delta, f(x)]`.
    ValueInterval,
    /// `f_delta(x) + psi(y, x) > f(y)`.
    Lower,
    /// `f(y) > f_delta(x) + psi(y, x) + delta + Delta |y - x| + L V(y, x)`.
    Upper,
    /// `f_delta(x) + psi(x*, x) + mu V(x*, x) > f(x*)`.
    StrongLower,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub side: ModelSide,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub pairs: usize,
    pub violations: usize,
    pub worst_residual: f64,
    pub examples: Vec<Violation>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Samples `sample_count` pairs from the feasible set (unbounded coordinates in
/// `[-spread, spread]`) and checks the declared model inequalities against the exact `f`.
///
/// With `strong_convexity = 0` the two-sided inequality is checked for every pair.
/// Otherwise the upper inequality is checked for every pair and the lower one at the
/// reference optimum, when the problem carries one.
pub fn validate_model<G: ProxGeometry + ?Sized>(
    setup: &G,
    oracle: &ModelOracle,
    sample_count: usize,
    seed: u64,
    spread: f64,
) -> Result<ValidationReport> {
    check_dim(setup.dim(), oracle.dim())?;
    if sample_count == 0 {
        return Err(Error::InvalidParameter("sample_count must be at least 1".into()));
    }
    let p = oracle.params;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = ValidationReport {
        pairs: sample_count,
        violations: 0,
        worst_residual: f64::NEG_INFINITY,
        examples: Vec::new(),
    };
    let x_star = oracle.problem.x_star().map(<[f64]>::to_vec);
    let mut record = |side: ModelSide, x: &[f64], y: &[f64], residual: f64| {
        report.worst_residual = report.worst_residual.max(residual);
        if residual > VALIDATION_TOL {
            report.violations += 1;
            if report.examples.len() < MAX_EXAMPLES {
                report.examples.push(Violation {
                    side,
                    x: x.to_vec(),
                    y: y.to_vec(),
                    residual,
                });
            }
        }
    };
    for _ in 0..sample_count {
        let x = setup.sample(&mut rng, spread);
        let y = setup.sample(&mut rng, spread);
        let fx = oracle.exact_value(&x);
        let fy = oracle.exact_value(&y);
        let fdx = oracle.value(&x);
        let model = oracle.local_model(&x);
        let psi = model.eval(&y);
        record(
            ModelSide::ValueInterval,
            &x,
            &x,
            (fdx - fx).max(fx - p.value_error - fdx),
        );
        let upper = fdx
            + psi
            + p.value_error
            + p.gradient_error * setup.norm(&sub(&y, &x))
            + p.smoothness * setup.divergence(&y, &x);
        record(ModelSide::Upper, &x, &y, fy - upper);
        if p.strong_convexity == 0.0 {
            record(ModelSide::Lower, &x, &y, fdx + psi - fy);
        } else if let Some(xs) = &x_star {
            let lhs = fdx + model.eval(xs) + p.strong_convexity * setup.divergence(xs, &x);
            record(ModelSide::StrongLower, &x, xs, lhs - oracle.exact_value(xs));
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{FeasibleSet, ProxSetup};
    use crate::oracle::model::ModelParams;
    use crate::oracle::problem::{Objective, ProblemSpec};

    fn abs_value() -> (ProxSetup, ProblemSpec) {
        let set = FeasibleSet::whole_space(1);
        (
            ProxSetup::euclidean(set.clone()).unwrap(),
            ProblemSpec::new(Objective::Norm { dim: 1 }, set).unwrap(),
        )
    }

    #[test]
    fn absolute_value_needs_the_jump() {
        let (s, p) = abs_value();
        let ok = ModelOracle::exact(p.clone(), ModelParams::new(0.0, 2.0, 0.01, 0.0).unwrap());
        assert!(validate_model(&s, &ok, 5000, 1, 1.0).unwrap().passed());
        let bad = ModelOracle::exact(p, ModelParams::new(0.0, 0.0, 0.01, 0.0).unwrap());
        let r = validate_model(&s, &bad, 5000, 1, 1.0).unwrap();
        assert!(!r.passed());
        assert!(r.examples.iter().all(|v| v.side == ModelSide::Upper));
    }

    #[test]
    fn explicit_counterexample_residual() {
        // x = 0.1, y = -0.1: f(y) - (f(x) + psi) = 0.1 - (0.1 - 0.2) - L V
        let (_, p) = abs_value();
        let oracle = ModelOracle::exact(p, ModelParams::new(0.0, 0.0, 0.01, 0.0).unwrap());
        let psi = oracle.model_value(&[-0.1], &[0.1]);
        let residual = 0.1 - (0.1 + psi) - 0.01 * 0.5 * 0.04;
        assert!((residual - 0.1998).abs() < 1e-12);
    }

    #[test]
    fn zero_samples_rejected() {
        let (s, p) = abs_value();
        let o = ModelOracle::exact(p, ModelParams::new(0.0, 2.0, 1.0, 0.0).unwrap());
        assert!(validate_model(&s, &o, 0, 1, 1.0).is_err());
    }
}
