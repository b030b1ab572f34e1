//! Prox structures: Bregman divergences, prox/mirror steps and feasible sets.
//!
//! A [`ProxSetup`] pairs a norm with a prox function `d` that is 1-strongly convex
//! with respect to it on the feasible set:
//!
//! | prox function        | norm | sets                          |
//! |----------------------|------|-------------------------------|
//! | squared Euclidean    | l2   | any [`FeasibleSet`]           |
//! | negative entropy     | l1   | standard simplex only         |
//!
//! [`ProductSetup`] glues blocks together (saddle problems) with the norm
//! `sqrt(|u|^2 + |v|^2)` and the divergence `V_u + V_v`.

mod prox;
mod set;

pub use prox::{LocalModel, ProxOutcome, DEFAULT_INNER_TOL, INNER_CAP};
pub use set::{FeasibleSet, FEASIBILITY_TOL};

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{norm1, norm2, norm_inf};

/// Coordinates are clamped to this floor before logarithms.
pub const ENTROPY_FLOOR: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Norm {
    L1,
    L2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProxFunction {
    SquaredEuclidean,
    NegativeEntropy,
}

/// Operations every prox structure supports. Inputs are assumed to have the right
/// dimension; the free functions of this module check it.
pub trait ProxGeometry: Send + Sync {
    fn dim(&self) -> usize;
    fn norm(&self, x: &[f64]) -> f64;
    fn dual_norm(&self, g: &[f64]) -> f64;
    /// `V(y, x)`
    fn divergence(&self, y: &[f64], x: &[f64]) -> f64;
    /// Prox function value `d(x)`.
    fn prox_value(&self, x: &[f64]) -> f64;
    /// `argmin_Q d`
    fn prox_center(&self) -> Vec<f64>;
    /// `argmin_{x in Q} psi(x) + l * V(x, center)` for a model `psi`.
    fn prox(&self, center: &[f64], model: &LocalModel, l: f64, tol: f64) -> Result<ProxOutcome>;
    /// Upper bound on `max_{x in Q} V(x, x0)`.
    fn max_divergence(&self, x0: &[f64]) -> Result<f64>;
    /// `min_{x in Q} <c, x>`.
    fn linear_min(&self, c: &[f64]) -> Result<f64>;
    fn contains(&self, x: &[f64]) -> bool;
    fn sample(&self, rng: &mut ChaCha8Rng, spread: f64) -> Vec<f64>;
}

/// Norm, prox function and feasible set of one block.
#[derive(Debug, Clone, PartialEq)]
pub struct ProxSetup {
    norm: Norm,
    prox_fn: ProxFunction,
    set: FeasibleSet,
}

impl ProxSetup {
    pub fn new(norm: Norm, prox_fn: ProxFunction, set: FeasibleSet) -> Result<Self> {
        set.validate()?;
        match (prox_fn, norm) {
            (ProxFunction::SquaredEuclidean, Norm::L2) => {}
            (ProxFunction::NegativeEntropy, Norm::L1) => {
                if !matches!(set, FeasibleSet::Simplex { .. }) {
                    return Err(Error::InvalidSetup(
                        "negative entropy requires the standard simplex".into(),
                    ));
                }
            }
            (p, n) => {
                return Err(Error::InvalidSetup(format!(
                    "{p:?} is not 1-strongly convex with respect to {n:?}"
                )))
            }
        }
        Ok(ProxSetup { norm, prox_fn, set })
    }

    /// Squared Euclidean prox function with the l2 norm.
    pub fn euclidean(set: FeasibleSet) -> Result<Self> {
        Self::new(Norm::L2, ProxFunction::SquaredEuclidean, set)
    }

    /// Negative entropy on the simplex with the l1 norm.
    pub fn entropy(dim: usize) -> Result<Self> {
        Self::new(Norm::L1, ProxFunction::NegativeEntropy, FeasibleSet::simplex(dim))
    }

    pub fn norm_kind(&self) -> Norm {
        self.norm
    }

    pub fn prox_fn(&self) -> ProxFunction {
        self.prox_fn
    }

    pub fn set(&self) -> &FeasibleSet {
        &self.set
    }

    pub(crate) fn prox_gradient(&self, x: &[f64]) -> Vec<f64> {
        match self.prox_fn {
            ProxFunction::SquaredEuclidean => x.to_vec(),
            ProxFunction::NegativeEntropy => {
                x.iter().map(|v| v.max(ENTROPY_FLOOR).ln() + 1.0).collect()
            }
        }
    }
}

impl ProxGeometry for ProxSetup {
    fn dim(&self) -> usize {
        self.set.dim()
    }

    fn norm(&self, x: &[f64]) -> f64 {
        match self.norm {
            Norm::L1 => norm1(x),
            Norm::L2 => norm2(x),
        }
    }

    fn dual_norm(&self, g: &[f64]) -> f64 {
        match self.norm {
            Norm::L1 => norm_inf(g),
            Norm::L2 => norm2(g),
        }
    }

    fn divergence(&self, y: &[f64], x: &[f64]) -> f64 {
        match self.prox_fn {
            ProxFunction::SquaredEuclidean => {
                0.5 * y.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
            }
            ProxFunction::NegativeEntropy => {
                // sum y ln(y/x) - sum y + sum x, with 0 ln 0 = 0
                let v: f64 = y
                    .iter()
                    .zip(x)
                    .map(|(&yi, &xi)| {
                        let xi = xi.max(ENTROPY_FLOOR);
                        let yi = yi.max(0.0);
                        let t = if yi > 0.0 { yi * (yi / xi).ln() } else { 0.0 };
                        t - yi + xi
                    })
                    .sum();
                v.max(0.0)
            }
        }
    }

    fn prox_value(&self, x: &[f64]) -> f64 {
        match self.prox_fn {
            ProxFunction::SquaredEuclidean => 0.5 * x.iter().map(|v| v * v).sum::<f64>(),
            ProxFunction::NegativeEntropy => x
                .iter()
                .map(|&v| if v > 0.0 { v * v.ln() } else { 0.0 })
                .sum(),
        }
    }

    fn prox_center(&self) -> Vec<f64> {
        let n = self.dim();
        match self.prox_fn {
            ProxFunction::NegativeEntropy => vec![1.0 / n as f64; n],
            ProxFunction::SquaredEuclidean => self
                .set
                .project(&vec![0.0; n])
                .expect("validated set admits a projection"),
        }
    }

    fn prox(&self, center: &[f64], model: &LocalModel, l: f64, tol: f64) -> Result<ProxOutcome> {
        prox::prox_block(self, center, model, l, tol)
    }

    fn max_divergence(&self, x0: &[f64]) -> Result<f64> {
        match (&self.set, self.prox_fn) {
            (FeasibleSet::WholeSpace { .. }, _) => Err(Error::UnboundedSet),
            (FeasibleSet::Halfspaces { .. }, _) => Err(Error::Unsupported(
                "no closed-form diameter for a halfspace intersection".into(),
            )),
            (FeasibleSet::Simplex { .. }, ProxFunction::NegativeEntropy) => {
                // KL(e_i || x0) = -ln x0_i, maximized at the smallest coordinate
                Ok(x0
                    .iter()
                    .map(|v| -v.max(ENTROPY_FLOOR).ln())
                    .fold(f64::NEG_INFINITY, f64::max))
            }
            (FeasibleSet::Simplex { .. }, ProxFunction::SquaredEuclidean) => {
                let sq: f64 = x0.iter().map(|v| v * v).sum();
                let min = x0.iter().copied().fold(f64::INFINITY, f64::min);
                Ok(0.5 * (sq - 2.0 * min + 1.0))
            }
            (FeasibleSet::Box { lo, hi }, _) => Ok(0.5
                * x0
                    .iter()
                    .zip(lo.iter().zip(hi))
                    .map(|(x, (l, h))| ((x - l) * (x - l)).max((h - x) * (h - x)))
                    .sum::<f64>()),
            (FeasibleSet::Ball { center, radius }, _) => {
                let r = crate::linalg::dist2(x0, center) + radius;
                Ok(0.5 * r * r)
            }
        }
    }

    fn linear_min(&self, c: &[f64]) -> Result<f64> {
        self.set.linear_min(c)
    }

    fn contains(&self, x: &[f64]) -> bool {
        self.set.contains(x)
    }

    fn sample(&self, rng: &mut ChaCha8Rng, spread: f64) -> Vec<f64> {
        self.set.sample(rng, spread)
    }
}

/// Cartesian product of prox setups, e.g. `simplex x simplex` for matrix games.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductSetup {
    blocks: Vec<ProxSetup>,
}

impl ProductSetup {
    pub fn new(blocks: Vec<ProxSetup>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::InvalidSetup("product of zero blocks".into()));
        }
        Ok(ProductSetup { blocks })
    }

    pub fn blocks(&self) -> &[ProxSetup] {
        &self.blocks
    }

    /// Splits a concatenated vector into block slices.
    pub fn split<'a>(&self, x: &'a [f64]) -> Vec<&'a [f64]> {
        let mut out = Vec::with_capacity(self.blocks.len());
        let mut start = 0;
        for b in &self.blocks {
            let end = start + b.dim();
            out.push(&x[start..end]);
            start = end;
        }
        out
    }

    fn fold_blocks<F: Fn(&ProxSetup, &[f64], &[f64]) -> f64>(
        &self,
        a: &[f64],
        b: &[f64],
        f: F,
    ) -> f64 {
        self.split(a)
            .into_iter()
            .zip(self.split(b))
            .zip(&self.blocks)
            .map(|((ai, bi), s)| f(s, ai, bi))
            .sum()
    }
}

impl ProxGeometry for ProductSetup {
    fn dim(&self) -> usize {
        self.blocks.iter().map(ProxGeometry::dim).sum()
    }

    fn norm(&self, x: &[f64]) -> f64 {
        self.fold_blocks(x, x, |s, a, _| s.norm(a).powi(2)).sqrt()
    }

    fn dual_norm(&self, g: &[f64]) -> f64 {
        self.fold_blocks(g, g, |s, a, _| s.dual_norm(a).powi(2)).sqrt()
    }

    fn divergence(&self, y: &[f64], x: &[f64]) -> f64 {
        self.fold_blocks(y, x, |s, a, b| s.divergence(a, b))
    }

    fn prox_value(&self, x: &[f64]) -> f64 {
        self.fold_blocks(x, x, |s, a, _| s.prox_value(a))
    }

    fn prox_center(&self) -> Vec<f64> {
        self.blocks.iter().flat_map(|b| b.prox_center()).collect()
    }

    fn prox(&self, center: &[f64], model: &LocalModel, l: f64, tol: f64) -> Result<ProxOutcome> {
        let centers = self.split(center);
        let anchors = self.split(&model.anchor);
        let slopes = self.split(&model.slope);
        let mut out = ProxOutcome {
            point: Vec::with_capacity(center.len()),
            residual: 0.0,
            inner_iterations: 0,
        };
        for (i, block) in self.blocks.iter().enumerate() {
            let sub_model = LocalModel {
                anchor: anchors[i].to_vec(),
                slope: slopes[i].to_vec(),
                l1_weight: model.l1_weight,
            };
            let r = block.prox(centers[i], &sub_model, l, tol)?;
            out.point.extend(r.point);
            out.residual += r.residual;
            out.inner_iterations += r.inner_iterations;
        }
        Ok(out)
    }

    fn max_divergence(&self, x0: &[f64]) -> Result<f64> {
        self.split(x0)
            .into_iter()
            .zip(&self.blocks)
            .map(|(x, b)| b.max_divergence(x))
            .sum()
    }

    fn linear_min(&self, c: &[f64]) -> Result<f64> {
        self.split(c)
            .into_iter()
            .zip(&self.blocks)
            .map(|(ci, b)| b.linear_min(ci))
            .sum()
    }

    fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && self
                .split(x)
                .into_iter()
                .zip(&self.blocks)
                .all(|(xi, b)| b.contains(xi))
    }

    fn sample(&self, rng: &mut ChaCha8Rng, spread: f64) -> Vec<f64> {
        self.blocks
            .iter()
            .flat_map(|b| b.sample(rng, spread))
            .collect()
    }
}

/// `V(y, x)` with dimension checks.
pub fn bregman<G: ProxGeometry + ?Sized>(setup: &G, y: &[f64], x: &[f64]) -> Result<f64> {
    check_dim(setup.dim(), y.len())?;
    check_dim(setup.dim(), x.len())?;
    Ok(setup.divergence(y, x))
}

/// `argmin_{x in Q} psi(x, z) + l * V(x, z)`.
pub fn prox_step<G: ProxGeometry + ?Sized>(
    setup: &G,
    z: &[f64],
    model: &LocalModel,
    l: f64,
    tol: f64,
) -> Result<ProxOutcome> {
    check_dim(setup.dim(), z.len())?;
    model.check_dim(setup.dim())?;
    if !(l > 0.0 && l.is_finite()) {
        return Err(Error::InvalidParameter(format!("prox weight L must be positive, got {l}")));
    }
    setup.prox(z, model, l, tol)
}

/// `Mirr_x(g)`: the prox step with the linear model `<g, y - x>` and unit weight.
pub fn mirror_step<G: ProxGeometry + ?Sized>(
    setup: &G,
    x: &[f64],
    scaled_grad: &[f64],
) -> Result<Vec<f64>> {
    check_dim(setup.dim(), scaled_grad.len())?;
    if scaled_grad.iter().all(|g| *g == 0.0) {
        check_dim(setup.dim(), x.len())?;
        return Ok(x.to_vec());
    }
    let model = LocalModel::linear(x.to_vec(), scaled_grad.to_vec());
    Ok(prox_step(setup, x, &model, 1.0, DEFAULT_INNER_TOL)?.point)
}

/// Upper bound on `max_{x in Q} V(x, x0)`.
pub fn diameter_bound<G: ProxGeometry + ?Sized>(setup: &G, x0: &[f64]) -> Result<f64> {
    check_dim(setup.dim(), x0.len())?;
    setup.max_divergence(x0)
}

pub fn dual_norm<G: ProxGeometry + ?Sized>(setup: &G, g: &[f64]) -> Result<f64> {
    check_dim(setup.dim(), g.len())?;
    Ok(setup.dual_norm(g))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;

    fn euclid(set: FeasibleSet) -> ProxSetup {
        ProxSetup::euclidean(set).unwrap()
    }

    #[test]
    fn squared_euclidean_divergence() {
        let s = euclid(FeasibleSet::whole_space(2));
        assert_eq!(bregman(&s, &[1.0, 0.0], &[0.0, 0.0]).unwrap(), 0.5);
        assert_eq!(bregman(&s, &[0.3, -2.0], &[0.3, -2.0]).unwrap(), 0.0);
    }

    #[test]
    fn entropy_divergence_is_kl() {
        let s = ProxSetup::entropy(2).unwrap();
        // 0.5 ln 2 + 0.5 ln(2/3), evaluated by hand
        let expected = 0.5 * (0.5_f64 / 0.25).ln() + 0.5 * (0.5_f64 / 0.75).ln();
        let v = bregman(&s, &[0.5, 0.5], &[0.25, 0.75]).unwrap();
        assert_abs_diff_eq!(v, expected, epsilon = 1e-15);
        assert_abs_diff_eq!(v, 0.1438, epsilon = 1e-4);
        assert_eq!(bregman(&s, &[0.25, 0.75], &[0.25, 0.75]).unwrap(), 0.0);
    }

    #[test]
    fn setup_validation() {
        assert!(matches!(
            ProxSetup::new(Norm::L1, ProxFunction::NegativeEntropy, FeasibleSet::cube(2, 0.0, 1.0)),
            Err(Error::InvalidSetup(_))
        ));
        assert!(ProxSetup::new(Norm::L1, ProxFunction::SquaredEuclidean, FeasibleSet::simplex(2))
            .is_err());
        let s = euclid(FeasibleSet::whole_space(2));
        assert_eq!(
            bregman(&s, &[1.0], &[0.0, 0.0]),
            Err(Error::DimensionMismatch { expected: 2, found: 1 })
        );
    }

    #[test]
    fn diameter_bounds() {
        let e = ProxSetup::entropy(4).unwrap();
        assert_abs_diff_eq!(diameter_bound(&e, &[0.25; 4]).unwrap(), 4f64.ln(), epsilon = 1e-15);
        let b = euclid(FeasibleSet::ball(vec![1.0, 1.0], 2.0));
        assert_eq!(diameter_bound(&b, &[1.0, 1.0]).unwrap(), 2.0);
        let w = euclid(FeasibleSet::whole_space(2));
        assert_eq!(diameter_bound(&w, &[0.0, 0.0]), Err(Error::UnboundedSet));
    }

    #[test]
    fn dual_norms() {
        let l2 = euclid(FeasibleSet::whole_space(2));
        assert_eq!(dual_norm(&l2, &[3.0, 4.0]).unwrap(), 5.0);
        let l1 = ProxSetup::entropy(2).unwrap();
        assert_eq!(dual_norm(&l1, &[3.0, -4.0]).unwrap(), 4.0);
        assert_eq!(dual_norm(&l1, &[0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn mirror_step_zero_gradient_is_identity() {
        let b = euclid(FeasibleSet::cube(2, -1.0, 1.0));
        assert_eq!(mirror_step(&b, &[0.3, 0.1], &[0.0, 0.0]).unwrap(), vec![0.3, 0.1]);
        let e = ProxSetup::entropy(3).unwrap();
        let x = [1.0 / 3.0; 3];
        assert_eq!(mirror_step(&e, &x, &[0.0; 3]).unwrap(), x.to_vec());
    }

    #[test]
    fn mirror_step_on_box_clamps() {
        let b = euclid(FeasibleSet::cube(2, -1.0, 1.0));
        assert_eq!(mirror_step(&b, &[0.0, 0.0], &[2.0, 0.0]).unwrap(), vec![-1.0, 0.0]);
    }

    #[test]
    fn product_norms_and_divergence() {
        let p = ProductSetup::new(vec![
            ProxSetup::entropy(2).unwrap(),
            euclid(FeasibleSet::cube(1, 0.0, 1.0)),
        ])
        .unwrap();
        assert_eq!(p.dim(), 3);
        // sqrt(|u|_1^2 + |v|_2^2)
        assert_abs_diff_eq!(p.norm(&[0.3, -0.4, 1.2]), (0.49_f64 + 1.44).sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(p.dual_norm(&[0.3, -0.4, 1.2]), (0.16_f64 + 1.44).sqrt(), epsilon = 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let x = p.sample(&mut rng, 1.0);
            let y = p.sample(&mut rng, 1.0);
            let v = p.divergence(&y, &x);
            assert!(v >= 0.5 * p.norm(&crate::linalg::sub(&y, &x)).powi(2) - 1e-12);
        }
    }
}
