use serde::{Deserialize, Serialize};

use super::set::{dykstra_halfspaces, FeasibleSet};
use super::{ProxFunction, ProxGeometry, ProxSetup, ENTROPY_FLOOR};
use crate::error::{check_dim, Error, Result};
use crate::linalg::{dot, norm1, norm_inf};

pub const DEFAULT_INNER_TOL: f64 = 1e-12;
pub const INNER_CAP: usize = 10_000;

/// A model `psi(y) = <slope, y - anchor> + w * (|y|_1 - |anchor|_1)`.
///
/// With `l1_weight = 0` this is the standard linear model; otherwise it is the
/// composite model with `h = w |.|_1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalModel {
    pub anchor: Vec<f64>,
    pub slope: Vec<f64>,
    pub l1_weight: f64,
}

impl LocalModel {
    pub fn linear(anchor: Vec<f64>, slope: Vec<f64>) -> Self {
        LocalModel {
            anchor,
            slope,
            l1_weight: 0.0,
        }
    }

    pub fn composite(anchor: Vec<f64>, slope: Vec<f64>, l1_weight: f64) -> Self {
        LocalModel {
            anchor,
            slope,
            l1_weight,
        }
    }

    pub fn is_linear(&self) -> bool {
        self.l1_weight == 0.0
    }

    pub fn eval(&self, y: &[f64]) -> f64 {
        let lin: f64 = self
            .slope
            .iter()
            .zip(y.iter().zip(&self.anchor))
            .map(|(g, (a, b))| g * (a - b))
            .sum();
        if self.l1_weight == 0.0 {
            lin
        } else {
            lin + self.l1_weight * (norm1(y) - norm1(&self.anchor))
        }
    }

    /// Scales the model by `t > 0`.
    pub fn scaled(&self, t: f64) -> Self {
        LocalModel {
            anchor: self.anchor.clone(),
            slope: self.slope.iter().map(|g| g * t).collect(),
            l1_weight: self.l1_weight * t,
        }
    }

    pub(crate) fn check_dim(&self, n: usize) -> Result<()> {
        check_dim(n, self.anchor.len())?;
        check_dim(n, self.slope.len())
    }
}

/// Result of a prox subproblem.
#[derive(Debug, Clone, PartialEq)]
pub struct ProxOutcome {
    pub point: Vec<f64>,
    /// Optimality residual `max_y <grad phi(x), x - y>` where it can be evaluated,
    /// otherwise the inner solver's final change.
    pub residual: f64,
    pub inner_iterations: usize,
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

pub(super) fn prox_block(
    setup: &ProxSetup,
    center: &[f64],
    model: &LocalModel,
    l: f64,
    tol: f64,
) -> Result<ProxOutcome> {
    let set = setup.set();
    let out = match setup.prox_fn() {
        ProxFunction::NegativeEntropy => {
            // |y|_1 = 1 on the simplex, so the l1 term is constant
            let logs: Vec<f64> = center
                .iter()
                .zip(&model.slope)
                .map(|(z, g)| z.max(ENTROPY_FLOOR).ln() - g / l)
                .collect();
            let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let w: Vec<f64> = logs.iter().map(|v| (v - top).exp()).collect();
            let s: f64 = w.iter().sum();
            let point: Vec<f64> = w.into_iter().map(|v| v / s).collect();
            let residual = linear_residual(setup, center, &model.slope, l, &point)?;
            ProxOutcome {
                point,
                residual,
                inner_iterations: 0,
            }
        }
        ProxFunction::SquaredEuclidean => {
            let target: Vec<f64> = center
                .iter()
                .zip(&model.slope)
                .map(|(z, g)| z - g / l)
                .collect();
            let thresh = model.l1_weight / l;
            let l1_constant = matches!(set, FeasibleSet::Simplex { .. });
            if model.is_linear() || l1_constant {
                match set {
                    FeasibleSet::Halfspaces { normals, offsets } => {
                        let (point, sweeps) = dykstra_halfspaces(normals, offsets, &target)?;
                        ProxOutcome {
                            point,
                            residual: 0.0,
                            inner_iterations: sweeps,
                        }
                    }
                    _ => {
                        let point = set.project(&target)?;
                        let residual = linear_residual(setup, center, &model.slope, l, &point)?;
                        ProxOutcome {
                            point,
                            residual,
                            inner_iterations: 0,
                        }
                    }
                }
            } else {
                match set {
                    FeasibleSet::WholeSpace { .. } | FeasibleSet::Box { .. } => {
                        let shrunk: Vec<f64> =
                            target.iter().map(|v| soft_threshold(*v, thresh)).collect();
                        ProxOutcome {
                            point: set.project(&shrunk)?,
                            residual: 0.0,
                            inner_iterations: 0,
                        }
                    }
                    _ => proximal_dykstra(set, &target, thresh, tol)?,
                }
            }
        }
    };
    Ok(out)
}

/// `max_{y in Q} <grad phi(x), x - y>` for `phi(y) = <g, y> + l V(y, z)`.
fn linear_residual(
    setup: &ProxSetup,
    center: &[f64],
    slope: &[f64],
    l: f64,
    x: &[f64],
) -> Result<f64> {
    let dx = setup.prox_gradient(x);
    let dz = setup.prox_gradient(center);
    let grad: Vec<f64> = slope
        .iter()
        .zip(dx.iter().zip(&dz))
        .map(|(g, (a, b))| g + l * (a - b))
        .collect();
    if let FeasibleSet::WholeSpace { .. } = setup.set() {
        return Ok(norm_inf(&grad));
    }
    let lower = setup.linear_min(&grad)?;
    Ok((dot(&grad, x) - lower).max(0.0))
}

/// Prox of `t |.|_1 + indicator_Q` at `v` by Dykstra's splitting of the two proxes.
fn proximal_dykstra(set: &FeasibleSet, v: &[f64], t: f64, tol: f64) -> Result<ProxOutcome> {
    let n = v.len();
    let mut x = v.to_vec();
    let mut p = vec![0.0; n];
    let mut q = vec![0.0; n];
    let tol = tol.max(1e-15);
    let mut change = f64::INFINITY;
    for it in 1..=INNER_CAP {
        let y: Vec<f64> = x
            .iter()
            .zip(&p)
            .map(|(a, b)| soft_threshold(a + b, t))
            .collect();
        for i in 0..n {
            p[i] += x[i] - y[i];
        }
        let shifted: Vec<f64> = y.iter().zip(&q).map(|(a, b)| a + b).collect();
        let next = set.project(&shifted)?;
        for i in 0..n {
            q[i] = shifted[i] - next[i];
        }
        change = next
            .iter()
            .zip(&x)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        x = next;
        if change <= tol {
            return Ok(ProxOutcome {
                point: x,
                residual: change,
                inner_iterations: it,
            });
        }
    }
    Err(Error::InnerSolver {
        iterations: INNER_CAP,
        residual: change,
    })
}

#[cfg(test)]
mod tests {
    use super::super::{mirror_step, prox_step, FeasibleSet, ProxSetup};
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn grid_argmin<F: Fn(f64, f64) -> f64>(f: F, inside: impl Fn(f64, f64) -> bool) -> (f64, f64) {
        let mut best = (f64::INFINITY, 0.0, 0.0);
        let steps = 2000;
        for i in 0..=steps {
            for j in 0..=steps {
                let a = -1.5 + 3.0 * i as f64 / steps as f64;
                let b = -1.5 + 3.0 * j as f64 / steps as f64;
                if inside(a, b) {
                    let v = f(a, b);
                    if v < best.0 {
                        best = (v, a, b);
                    }
                }
            }
        }
        (best.1, best.2)
    }

    #[test]
    fn entropy_prox_closed_form() {
        let s = ProxSetup::entropy(2).unwrap();
        let m = LocalModel::linear(vec![0.5, 0.5], vec![4f64.ln(), 0.0]);
        let out = prox_step(&s, &[0.5, 0.5], &m, 1.0, DEFAULT_INNER_TOL).unwrap();
        assert_abs_diff_eq!(out.point[0], 0.2, epsilon = 1e-12);
        assert_abs_diff_eq!(out.point[1], 0.8, epsilon = 1e-12);
        assert!(out.residual < 1e-12);
        // grid search over the segment
        let obj = |a: f64| {
            let y = [a, 1.0 - a];
            m.eval(&y) + s.divergence(&y, &[0.5, 0.5])
        };
        let best = (1..100_000)
            .map(|i| i as f64 / 100_000.0)
            .min_by(|a, b| obj(*a).total_cmp(&obj(*b)))
            .unwrap();
        assert_abs_diff_eq!(best, 0.2, epsilon = 1e-4);
    }

    #[test]
    fn ball_prox_projects_radially() {
        let s = ProxSetup::euclidean(FeasibleSet::ball(vec![0.0, 0.0], 1.0)).unwrap();
        let m = LocalModel::linear(vec![0.0, 0.0], vec![-3.0, 0.0]);
        let out = prox_step(&s, &[0.0, 0.0], &m, 1.0, DEFAULT_INNER_TOL).unwrap();
        assert_eq!(out.point, vec![1.0, 0.0]);
        let (a, b) = grid_argmin(
            |a, b| -3.0 * a + 0.5 * (a * a + b * b),
            |a, b| a * a + b * b <= 1.0,
        );
        assert_abs_diff_eq!(a, 1.0, epsilon = 2e-3);
        assert_abs_diff_eq!(b, 0.0, epsilon = 2e-3);
    }

    #[test]
    fn whole_space_prox_is_gradient_step() {
        let s = ProxSetup::euclidean(FeasibleSet::whole_space(2)).unwrap();
        let m = LocalModel::linear(vec![1.0, 2.0], vec![4.0, -2.0]);
        let out = prox_step(&s, &[1.0, 2.0], &m, 2.0, DEFAULT_INNER_TOL).unwrap();
        assert_eq!(out.point, vec![-1.0, 3.0]);
    }

    #[test]
    fn composite_box_matches_grid() {
        let s = ProxSetup::euclidean(FeasibleSet::cube(2, -1.0, 1.0)).unwrap();
        let m = LocalModel::composite(vec![0.2, -0.1], vec![0.5, -2.5], 0.7);
        let out = prox_step(&s, &[0.2, -0.1], &m, 1.0, DEFAULT_INNER_TOL).unwrap();
        let (a, b) = grid_argmin(
            |a, b| m.eval(&[a, b]) + 0.5 * ((a - 0.2).powi(2) + (b + 0.1).powi(2)),
            |a, b| a.abs() <= 1.0 && b.abs() <= 1.0,
        );
        assert_abs_diff_eq!(out.point[0], a, epsilon = 2e-3);
        assert_abs_diff_eq!(out.point[1], b, epsilon = 2e-3);
    }

    #[test]
    fn composite_ball_matches_grid() {
        let s = ProxSetup::euclidean(FeasibleSet::ball(vec![0.0, 0.0], 1.0)).unwrap();
        let m = LocalModel::composite(vec![0.0, 0.0], vec![-2.0, -0.6], 0.5);
        let out = prox_step(&s, &[0.0, 0.0], &m, 1.0, DEFAULT_INNER_TOL).unwrap();
        let (a, b) = grid_argmin(
            |a, b| m.eval(&[a, b]) + 0.5 * (a * a + b * b),
            |a, b| a * a + b * b <= 1.0,
        );
        assert!(out.inner_iterations > 0);
        let obj = |y: &[f64]| m.eval(y) + 0.5 * (y[0] * y[0] + y[1] * y[1]);
        assert!(obj(&out.point) <= obj(&[a, b]) + 1e-12);
        // KKT: the soft-thresholded point (1.5, 0.1) scaled onto the sphere
        let r = (1.5f64 * 1.5 + 0.01).sqrt();
        assert_abs_diff_eq!(out.point[0], 1.5 / r, epsilon = 1e-9);
        assert_abs_diff_eq!(out.point[1], 0.1 / r, epsilon = 1e-9);
    }

    #[test]
    fn halfspace_prox_uses_projection() {
        let set = FeasibleSet::halfspaces(vec![vec![1.0, 1.0]], vec![1.0]).unwrap();
        let s = ProxSetup::euclidean(set).unwrap();
        let y = mirror_step(&s, &[0.0, 0.0], &[-2.0, -2.0]).unwrap();
        assert_abs_diff_eq!(y[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(y[1], 0.5, epsilon = 1e-12);
    }

    fn setups() -> Vec<ProxSetup> {
        vec![
            ProxSetup::euclidean(FeasibleSet::cube(3, -1.0, 2.0)).unwrap(),
            ProxSetup::euclidean(FeasibleSet::ball(vec![0.5, 0.0, -0.5], 1.5)).unwrap(),
            ProxSetup::euclidean(FeasibleSet::simplex(3)).unwrap(),
            ProxSetup::entropy(3).unwrap(),
        ]
    }

    proptest! {
        #[test]
        fn prox_output_is_feasible_and_optimal(
            which in 0usize..4,
            g in prop::collection::vec(-5.0f64..5.0, 3),
            l in 0.1f64..10.0,
            seed in 0u64..1000,
        ) {
            let s = &setups()[which];
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let z = s.sample(&mut rng, 1.0);
            let m = LocalModel::linear(z.clone(), g.clone());
            let out = prox_step(s, &z, &m, l, DEFAULT_INNER_TOL).unwrap();
            prop_assert!(s.contains(&out.point));
            // variational inequality against sampled feasible points
            let dx = s.prox_gradient(&out.point);
            let dz = s.prox_gradient(&z);
            let grad: Vec<f64> = g.iter().zip(dx.iter().zip(&dz)).map(|(gi, (a, b))| gi + l * (a - b)).collect();
            for _ in 0..100 {
                let y = s.sample(&mut rng, 1.0);
                let v: f64 = grad.iter().zip(out.point.iter().zip(&y)).map(|(gi, (a, b))| gi * (a - b)).sum();
                prop_assert!(v <= 1e-9 * (1.0 + l), "residual {v}");
            }
        }

        #[test]
        fn divergence_is_strongly_convex(which in 0usize..4, seed in 0u64..1000) {
            let s = &setups()[which];
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = s.sample(&mut rng, 1.0);
            let y = s.sample(&mut rng, 1.0);
            let d = crate::linalg::sub(&y, &x);
            prop_assert!(s.divergence(&y, &x) >= 0.5 * s.norm(&d).powi(2) - 1e-12);
            prop_assert_eq!(s.divergence(&x, &x), 0.0);
        }

        #[test]
        fn diameter_dominates_samples(which in 0usize..4, seed in 0u64..200) {
            let s = &setups()[which];
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x0 = s.sample(&mut rng, 1.0);
            let bound = s.max_divergence(&x0).unwrap();
            for _ in 0..1000 {
                let x = s.sample(&mut rng, 1.0);
                prop_assert!(s.divergence(&x, &x0) <= bound + 1e-12);
            }
        }
    }
}
