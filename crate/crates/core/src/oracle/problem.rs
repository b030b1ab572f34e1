use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::geometry::FeasibleSet;
use crate::linalg::{dist2, dot, mat_vec, norm2};

/// Objective functional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Objective {
    /// `1/2 x^T Q x - b^T x`
    Quadratic { q: Vec<Vec<f64>>, b: Vec<f64> },
    /// `max_i <a_i, x> + b_i`
    MaxAffine { a: Vec<Vec<f64>>, b: Vec<f64> },
    /// `1/2 x^T Q x - b^T x + w |x|_1`
    Composite {
        q: Vec<Vec<f64>>,
        b: Vec<f64>,
        l1_weight: f64,
    },
    /// `|x|_2`
    Norm { dim: usize },
}

impl Objective {
    pub fn dim(&self) -> usize {
        match self {
            Objective::Quadratic { b, .. } | Objective::Composite { b, .. } => b.len(),
            Objective::MaxAffine { a, .. } => a.first().map_or(0, Vec::len),
            Objective::Norm { dim } => *dim,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.dim();
        if n == 0 {
            return Err(Error::InvalidParameter("objective of dimension 0".into()));
        }
        match self {
            Objective::Quadratic { q, .. } | Objective::Composite { q, .. } => {
                check_dim(n, q.len())?;
                for (i, row) in q.iter().enumerate() {
                    check_dim(n, row.len())?;
                    for (j, v) in row.iter().enumerate() {
                        if (v - q[j][i]).abs() > 1e-12 * (1.0 + v.abs()) {
                            return Err(Error::InvalidParameter("Q is not symmetric".into()));
                        }
                    }
                }
                if min_eigenvalue(q) < -1e-10 {
                    return Err(Error::InvalidParameter("Q is not positive semidefinite".into()));
                }
                if let Objective::Composite { l1_weight, .. } = self {
                    if *l1_weight < 0.0 {
                        return Err(Error::InvalidParameter("negative l1 weight".into()));
                    }
                }
            }
            Objective::MaxAffine { a, b } => {
                check_dim(a.len(), b.len())?;
                for row in a {
                    check_dim(n, row.len())?;
                }
            }
            Objective::Norm { .. } => {}
        }
        Ok(())
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            Objective::Quadratic { q, b } => quad_value(q, b, x),
            Objective::Composite { q, b, l1_weight } => {
                quad_value(q, b, x) + l1_weight * crate::linalg::norm1(x)
            }
            Objective::MaxAffine { a, b } => a
                .iter()
                .zip(b)
                .map(|(ai, bi)| dot(ai, x) + bi)
                .fold(f64::NEG_INFINITY, f64::max),
            Objective::Norm { .. } => norm2(x),
        }
    }

    /// A subgradient; ties in max-affine go to the lowest index, `sign(0) = 0`.
    pub fn subgradient(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Objective::Quadratic { q, b } => quad_gradient(q, b, x),
            Objective::Composite { q, b, l1_weight } => quad_gradient(q, b, x)
                .into_iter()
                .zip(x)
                .map(|(g, xi)| g + l1_weight * sign(*xi))
                .collect(),
            Objective::MaxAffine { a, .. } => a[self.active_index(x)].clone(),
            Objective::Norm { .. } => {
                let r = norm2(x);
                if r == 0.0 {
                    vec![0.0; x.len()]
                } else {
                    x.iter().map(|v| v / r).collect()
                }
            }
        }
    }

    /// Gradient of the smooth part and the l1 weight of the nonsmooth part.
    pub fn split_gradient(&self, x: &[f64]) -> (Vec<f64>, f64) {
        match self {
            Objective::Composite { q, b, l1_weight } => (quad_gradient(q, b, x), *l1_weight),
            _ => (self.subgradient(x), 0.0),
        }
    }

    /// Lowest index attaining the max of a max-affine objective.
    pub fn active_index(&self, x: &[f64]) -> usize {
        match self {
            Objective::MaxAffine { a, b } => {
                let mut best = 0;
                let mut best_val = f64::NEG_INFINITY;
                for (i, (ai, bi)) in a.iter().zip(b).enumerate() {
                    let v = dot(ai, x) + bi;
                    if v > best_val {
                        best = i;
                        best_val = v;
                    }
                }
                best
            }
            _ => 0,
        }
    }

    /// Largest eigenvalue of the quadratic part, or 0 for nonsmooth kinds.
    pub fn smoothness(&self) -> f64 {
        match self {
            Objective::Quadratic { q, .. } | Objective::Composite { q, .. } => max_eigenvalue(q),
            _ => 0.0,
        }
    }

    /// Bound on `|g(x) - g(y)|_2` over subgradients `g` of the nonsmooth part.
    pub fn subgradient_jump(&self) -> f64 {
        match self {
            Objective::Quadratic { .. } => 0.0,
            Objective::Composite { l1_weight, b, .. } => 2.0 * l1_weight * (b.len() as f64).sqrt(),
            Objective::MaxAffine { a, .. } => {
                let mut worst = 0.0_f64;
                for i in 0..a.len() {
                    for j in i + 1..a.len() {
                        worst = worst.max(dist2(&a[i], &a[j]));
                    }
                }
                worst
            }
            Objective::Norm { .. } => 2.0,
        }
    }
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn quad_value(q: &[Vec<f64>], b: &[f64], x: &[f64]) -> f64 {
    0.5 * dot(x, &mat_vec(q, x)) - dot(b, x)
}

fn quad_gradient(q: &[Vec<f64>], b: &[f64], x: &[f64]) -> Vec<f64> {
    mat_vec(q, x).iter().zip(b).map(|(a, c)| a - c).collect()
}

fn eigenvalues(q: &[Vec<f64>]) -> Vec<f64> {
    let n = q.len();
    let m = DMatrix::from_fn(n, n, |i, j| q[i][j]);
    SymmetricEigen::new(m).eigenvalues.iter().copied().collect()
}

pub fn max_eigenvalue(q: &[Vec<f64>]) -> f64 {
    eigenvalues(q).into_iter().fold(f64::NEG_INFINITY, f64::max)
}

pub fn min_eigenvalue(q: &[Vec<f64>]) -> f64 {
    eigenvalues(q).into_iter().fold(f64::INFINITY, f64::min)
}

/// Convex constraint functional; the feasible region is `g(x) <= 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Constraint {
    /// `<a, x> + b`
    Affine { a: Vec<f64>, b: f64 },
    /// `|x - center|_2 - radius`
    NormBall { center: Vec<f64>, radius: f64 },
}

impl Constraint {
    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            Constraint::Affine { a, b } => dot(a, x) + b,
            Constraint::NormBall { center, radius } => dist2(x, center) - radius,
        }
    }

    pub fn subgradient(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Constraint::Affine { a, .. } => a.clone(),
            Constraint::NormBall { center, .. } => {
                let r = dist2(x, center);
                if r == 0.0 {
                    vec![0.0; x.len()]
                } else {
                    x.iter().zip(center).map(|(a, c)| (a - c) / r).collect()
                }
            }
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Constraint::Affine { a, .. } => a.len(),
            Constraint::NormBall { center, .. } => center.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceOptimum {
    pub f_star: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_star: Option<Vec<f64>>,
}

/// Objective, feasible set, constraints and optional ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    #[serde(flatten)]
    pub objective: Objective,
    pub set: FeasibleSet,
    #[serde(default)]
    pub constraints: Vec<Constraint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<ReferenceOptimum>,
    /// Lipschitz constant of the objective.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective_lipschitz: Option<f64>,
    /// Lipschitz constant of the constraint functional.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constraint_lipschitz: Option<f64>,
    #[serde(default)]
    pub seed: u64,
}

impl ProblemSpec {
    pub fn new(objective: Objective, set: FeasibleSet) -> Result<Self> {
        let spec = ProblemSpec {
            objective,
            set,
            constraints: Vec::new(),
            reference: None,
            objective_lipschitz: None,
            constraint_lipschitz: None,
            seed: 0,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_reference(mut self, f_star: f64, x_star: Option<Vec<f64>>) -> Result<Self> {
        self.reference = Some(ReferenceOptimum { f_star, x_star });
        self.validate()?;
        Ok(self)
    }

    pub fn with_constraint(mut self, c: Constraint) -> Result<Self> {
        self.constraints.push(c);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        self.objective.validate()?;
        self.set.validate()?;
        let n = self.objective.dim();
        check_dim(n, self.set.dim())?;
        for c in &self.constraints {
            check_dim(n, c.dim())?;
        }
        if let Some(ReferenceOptimum {
            x_star: Some(x), ..
        }) = &self.reference
        {
            check_dim(n, x.len())?;
            let v = self.set.violation(x).max(self.constraint_value(x).max(0.0));
            if v > 1e-9 {
                return Err(Error::Infeasible { violation: v });
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.objective.dim()
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.objective.value(x)
    }

    /// `g(x) = max_i g_i(x)`, or `-inf` without constraints.
    pub fn constraint_value(&self, x: &[f64]) -> f64 {
        self.constraints
            .iter()
            .map(|c| c.value(x))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Lowest index attaining `g(x)` together with its subgradient.
    pub fn constraint_subgradient(&self, x: &[f64]) -> Option<(usize, Vec<f64>)> {
        let mut best: Option<(usize, f64)> = None;
        for (i, c) in self.constraints.iter().enumerate() {
            let v = c.value(x);
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((i, v));
            }
        }
        best.map(|(i, _)| (i, self.constraints[i].subgradient(x)))
    }

    pub fn f_star(&self) -> Option<f64> {
        self.reference.as_ref().map(|r| r.f_star)
    }

    pub fn x_star(&self) -> Option<&[f64]> {
        self.reference.as_ref().and_then(|r| r.x_star.as_deref())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity(n: usize) -> Vec<Vec<f64>> {
        (0..n)
            .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect()
    }

    #[test]
    fn quadratic_value_and_gradient() {
        let f = Objective::Quadratic {
            q: identity(2),
            b: vec![1.0, 0.0],
        };
        assert_eq!(f.value(&[1.0, 2.0]), 1.5);
        assert_eq!(f.subgradient(&[1.0, 2.0]), vec![0.0, 2.0]);
        assert_eq!(f.smoothness(), 1.0);
    }

    #[test]
    fn max_affine_ties_go_low() {
        let f = Objective::MaxAffine {
            a: vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0]],
            b: vec![0.0, 0.0, 0.0],
        };
        assert_eq!(f.active_index(&[1.0, 1.0]), 0);
        assert_eq!(f.active_index(&[0.0, 2.0]), 1);
        assert_eq!(f.subgradient_jump(), 2f64.sqrt());
    }

    #[test]
    fn asymmetric_q_rejected() {
        let f = Objective::Quadratic {
            q: vec![vec![1.0, 2.0], vec![0.0, 1.0]],
            b: vec![0.0, 0.0],
        };
        assert!(f.validate().is_err());
    }

    #[test]
    fn infeasible_reference_rejected() {
        let p = ProblemSpec::new(Objective::Norm { dim: 2 }, FeasibleSet::whole_space(2))
            .unwrap()
            .with_constraint(Constraint::Affine {
                a: vec![-1.0, 0.0],
                b: 1.0,
            })
            .unwrap();
        assert!(p.clone().with_reference(1.0, Some(vec![1.0, 0.0])).is_ok());
        assert!(matches!(
            p.with_reference(0.0, Some(vec![0.0, 0.0])),
            Err(Error::Infeasible { .. })
        ));
    }

    #[test]
    fn json_layout_is_flat() {
        let p = ProblemSpec::new(
            Objective::Quadratic {
                q: identity(2),
                b: vec![0.0, 0.0],
            },
            FeasibleSet::whole_space(2),
        )
        .unwrap();
        let s = serde_json::to_string(&p).unwrap();
        assert!(s.starts_with("{\"kind\":\"quadratic\""));
        let back: ProblemSpec = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
    }
}
