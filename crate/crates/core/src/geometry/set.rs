use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{dot, norm2, sub};

/// Absolute tolerance of every membership test.
pub const FEASIBILITY_TOL: f64 = 1e-12;

const DYKSTRA_CAP: usize = 10_000;

/// Closed convex feasible set `Q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FeasibleSet {
    WholeSpace { dim: usize },
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
    Simplex { dim: usize },
    /// `{x : <normals[i], x> <= offsets[i]}`
    Halfspaces {
        normals: Vec<Vec<f64>>,
        offsets: Vec<f64>,
    },
}

impl FeasibleSet {
    pub fn whole_space(dim: usize) -> Self {
        FeasibleSet::WholeSpace { dim }
    }

    pub fn cube(dim: usize, lo: f64, hi: f64) -> Self {
        FeasibleSet::Box {
            lo: vec![lo; dim],
            hi: vec![hi; dim],
        }
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Self {
        FeasibleSet::Ball { center, radius }
    }

    pub fn simplex(dim: usize) -> Self {
        FeasibleSet::Simplex { dim }
    }

    /// Builds a halfspace intersection and probes it for nonemptiness.
    pub fn halfspaces(normals: Vec<Vec<f64>>, offsets: Vec<f64>) -> Result<Self> {
        let set = FeasibleSet::Halfspaces { normals, offsets };
        set.validate()?;
        Ok(set)
    }

    pub fn dim(&self) -> usize {
        match self {
            FeasibleSet::WholeSpace { dim } | FeasibleSet::Simplex { dim } => *dim,
            FeasibleSet::Box { lo, .. } => lo.len(),
            FeasibleSet::Ball { center, .. } => center.len(),
            FeasibleSet::Halfspaces { normals, .. } => normals.first().map_or(0, Vec::len),
        }
    }

    pub fn is_bounded(&self) -> bool {
        matches!(
            self,
            FeasibleSet::Box { .. } | FeasibleSet::Ball { .. } | FeasibleSet::Simplex { .. }
        )
    }

    /// Structural checks; halfspace intersections are probed for a feasible point.
    pub fn validate(&self) -> Result<()> {
        if self.dim() == 0 {
            return Err(Error::InvalidSetup("dimension must be at least 1".into()));
        }
        match self {
            FeasibleSet::WholeSpace { .. } | FeasibleSet::Simplex { .. } => Ok(()),
            FeasibleSet::Box { lo, hi } => {
                check_dim(lo.len(), hi.len())?;
                for (l, h) in lo.iter().zip(hi) {
                    if !l.is_finite() || !h.is_finite() || l > h {
                        return Err(Error::InvalidSetup(format!("bad box bounds [{l}, {h}]")));
                    }
                }
                Ok(())
            }
            FeasibleSet::Ball { center, radius } => {
                if !radius.is_finite() || *radius < 0.0 || center.iter().any(|c| !c.is_finite()) {
                    return Err(Error::InvalidSetup(format!("bad ball radius {radius}")));
                }
                Ok(())
            }
            FeasibleSet::Halfspaces { normals, offsets } => {
                check_dim(normals.len(), offsets.len())?;
                let n = self.dim();
                for a in normals {
                    check_dim(n, a.len())?;
                }
                let probe = self.project(&vec![0.0; n])?;
                let violation = self.violation(&probe);
                if violation > 1e-9 {
                    return Err(Error::EmptySet(format!(
                        "feasibility probe left violation {violation:e}"
                    )));
                }
                Ok(())
            }
        }
    }

    /// Largest constraint violation of `x` (0 when feasible).
    pub fn violation(&self, x: &[f64]) -> f64 {
        match self {
            FeasibleSet::WholeSpace { .. } => 0.0,
            FeasibleSet::Box { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .map(|(v, (l, h))| (l - v).max(v - h).max(0.0))
                .fold(0.0, f64::max),
            FeasibleSet::Ball { center, radius } => {
                (crate::linalg::dist2(x, center) - radius).max(0.0)
            }
            FeasibleSet::Simplex { .. } => {
                let neg = x.iter().fold(0.0_f64, |m, v| m.max(-v));
                let sum: f64 = x.iter().sum();
                neg.max((sum - 1.0).abs())
            }
            FeasibleSet::Halfspaces { normals, offsets } => normals
                .iter()
                .zip(offsets)
                .map(|(a, b)| (dot(a, x) - b).max(0.0))
                .fold(0.0, f64::max),
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && x.iter().all(|v| v.is_finite()) && self.violation(x) <= FEASIBILITY_TOL
    }

    /// Euclidean projection onto the set.
    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), x.len())?;
        Ok(match self {
            FeasibleSet::WholeSpace { .. } => x.to_vec(),
            FeasibleSet::Box { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .map(|(v, (l, h))| v.clamp(*l, *h))
                .collect(),
            FeasibleSet::Ball { center, radius } => {
                let d = sub(x, center);
                let r = norm2(&d);
                if r <= *radius {
                    x.to_vec()
                } else {
                    center
                        .iter()
                        .zip(&d)
                        .map(|(c, di)| c + di * (radius / r))
                        .collect()
                }
            }
            FeasibleSet::Simplex { .. } => project_simplex(x),
            FeasibleSet::Halfspaces { normals, offsets } => {
                dykstra_halfspaces(normals, offsets, x)?.0
            }
        })
    }

    /// A minimizer of `<c, x>` over the set; ties go to the lowest index.
    pub fn linear_minimizer(&self, c: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), c.len())?;
        match self {
            FeasibleSet::WholeSpace { .. } => {
                if c.iter().all(|v| *v == 0.0) {
                    Ok(vec![0.0; c.len()])
                } else {
                    Err(Error::UnboundedSet)
                }
            }
            FeasibleSet::Box { lo, hi } => Ok(c
                .iter()
                .zip(lo.iter().zip(hi))
                .map(|(ci, (l, h))| if *ci < 0.0 { *h } else { *l })
                .collect()),
            FeasibleSet::Ball { center, radius } => {
                let nc = norm2(c);
                if nc == 0.0 {
                    return Ok(center.clone());
                }
                Ok(center
                    .iter()
                    .zip(c)
                    .map(|(z, ci)| z - radius * ci / nc)
                    .collect())
            }
            FeasibleSet::Simplex { dim } => {
                let mut best = 0;
                for (i, ci) in c.iter().enumerate() {
                    if *ci < c[best] {
                        best = i;
                    }
                }
                let mut e = vec![0.0; *dim];
                e[best] = 1.0;
                Ok(e)
            }
            FeasibleSet::Halfspaces { .. } => Err(Error::Unsupported(
                "linear minimization over a halfspace intersection".into(),
            )),
        }
    }

    /// `min_{x in Q} <c, x>`.
    pub fn linear_min(&self, c: &[f64]) -> Result<f64> {
        Ok(dot(c, &self.linear_minimizer(c)?))
    }

    /// Draws a feasible point. Unbounded sets are sampled in the cube `[-spread, spread]^n`.
    pub fn sample(&self, rng: &mut ChaCha8Rng, spread: f64) -> Vec<f64> {
        let n = self.dim();
        match self {
            FeasibleSet::WholeSpace { .. } => {
                (0..n).map(|_| rng.random_range(-spread..=spread)).collect()
            }
            FeasibleSet::Box { lo, hi } => lo
                .iter()
                .zip(hi)
                .map(|(l, h)| if l == h { *l } else { rng.random_range(*l..=*h) })
                .collect(),
            FeasibleSet::Ball { center, radius } => {
                let dir: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
                let len = norm2(&dir).max(f64::MIN_POSITIVE);
                let r = radius * rng.random::<f64>().powf(1.0 / n as f64);
                center
                    .iter()
                    .zip(&dir)
                    .map(|(c, d)| c + r * d / len)
                    .collect()
            }
            FeasibleSet::Simplex { .. } => {
                let e: Vec<f64> = (0..n).map(|_| Exp1.sample(rng)).collect();
                let s: f64 = e.iter().sum();
                e.into_iter().map(|v| v / s).collect()
            }
            FeasibleSet::Halfspaces { normals, offsets } => {
                let raw: Vec<f64> = (0..n).map(|_| rng.random_range(-spread..=spread)).collect();
                dykstra_halfspaces(normals, offsets, &raw)
                    .map(|r| r.0)
                    .unwrap_or(raw)
            }
        }
    }
}

/// Sort-based Euclidean projection onto the probability simplex.
pub(crate) fn project_simplex(x: &[f64]) -> Vec<f64> {
    let mut u = x.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (j, uj) in u.iter().enumerate() {
        cumulative += uj;
        let t = (cumulative - 1.0) / (j + 1) as f64;
        if uj - t > 0.0 {
            theta = t;
        }
    }
    x.iter().map(|v| (v - theta).max(0.0)).collect()
}

/// Dykstra's alternating projections onto an intersection of halfspaces.
/// Returns the projection and the number of sweeps.
pub(crate) fn dykstra_halfspaces(
    normals: &[Vec<f64>],
    offsets: &[f64],
    x: &[f64],
) -> Result<(Vec<f64>, usize)> {
    let m = normals.len();
    let mut point = x.to_vec();
    let mut corrections = vec![vec![0.0; x.len()]; m];
    for sweep in 1..=DYKSTRA_CAP {
        let mut change = 0.0_f64;
        for i in 0..m {
            let a = &normals[i];
            let aa = dot(a, a);
            let shifted: Vec<f64> = point.iter().zip(&corrections[i]).map(|(p, c)| p + c).collect();
            let excess = dot(a, &shifted) - offsets[i];
            let projected: Vec<f64> = if excess > 0.0 && aa > 0.0 {
                shifted.iter().zip(a).map(|(s, ai)| s - excess / aa * ai).collect()
            } else {
                shifted.clone()
            };
            for k in 0..x.len() {
                corrections[i][k] = shifted[k] - projected[k];
                change = change.max((projected[k] - point[k]).abs());
            }
            point = projected;
        }
        let violation = normals
            .iter()
            .zip(offsets)
            .map(|(a, b)| (dot(a, &point) - b).max(0.0))
            .fold(0.0, f64::max);
        if change <= 1e-15 && violation <= 1e-13 {
            return Ok((point, sweep));
        }
    }
    Err(Error::InnerSolver {
        iterations: DYKSTRA_CAP,
        residual: normals
            .iter()
            .zip(offsets)
            .map(|(a, b)| (dot(a, &point) - b).max(0.0))
            .fold(0.0, f64::max),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn simplex_projection_of_interior_point_is_identity() {
        let p = project_simplex(&[0.2, 0.3, 0.5]);
        for (a, b) in p.iter().zip([0.2, 0.3, 0.5]) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn simplex_projection_clips_negative_mass() {
        let p = project_simplex(&[2.0, 0.0]);
        assert_eq!(p, vec![1.0, 0.0]);
        let p = project_simplex(&[0.0, 0.0]);
        assert_eq!(p, vec![0.5, 0.5]);
    }

    #[test]
    fn ball_projection_is_radial() {
        let set = FeasibleSet::ball(vec![0.0, 0.0], 1.0);
        let p = set.project(&[3.0, 0.0]).unwrap();
        assert_eq!(p, vec![1.0, 0.0]);
    }

    #[test]
    fn empty_halfspace_intersection_is_rejected() {
        // x <= -1 and -x <= -1
        let err = FeasibleSet::halfspaces(vec![vec![1.0], vec![-1.0]], vec![-1.0, -1.0]);
        assert!(err.is_err());
    }

    #[test]
    fn halfspace_projection_lands_on_the_corner() {
        let set =
            FeasibleSet::halfspaces(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![0.0, 0.0]).unwrap();
        let p = set.project(&[1.0, 2.0]).unwrap();
        assert!(p[0].abs() < 1e-12 && p[1].abs() < 1e-12);
        assert!(set.contains(&p));
    }

    #[test]
    fn samples_are_feasible() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let sets = [
            FeasibleSet::cube(3, -1.0, 2.0),
            FeasibleSet::ball(vec![1.0, 1.0, 1.0], 0.5),
            FeasibleSet::simplex(3),
            FeasibleSet::whole_space(3),
        ];
        for set in &sets {
            for _ in 0..200 {
                let x = set.sample(&mut rng, 2.0);
                assert!(set.contains(&x), "{set:?} {x:?}");
            }
        }
    }

    #[test]
    fn linear_minimizers() {
        let b = FeasibleSet::cube(2, -1.0, 1.0);
        assert_eq!(b.linear_minimizer(&[1.0, -2.0]).unwrap(), vec![-1.0, 1.0]);
        let s = FeasibleSet::simplex(3);
        assert_eq!(s.linear_min(&[3.0, 1.0, 1.0]).unwrap(), 1.0);
        assert_eq!(s.linear_minimizer(&[3.0, 1.0, 1.0]).unwrap(), vec![0.0, 1.0, 0.0]);
        let w = FeasibleSet::whole_space(2);
        assert_eq!(w.linear_min(&[1.0, 0.0]), Err(Error::UnboundedSet));
    }
}
