//! Independent ground-truth solvers for small instances.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geometry::FeasibleSet;
use crate::linalg::dot;
use crate::oracle::Objective;

/// Largest number of vertices the enumerator will visit.
pub const VERTEX_CAP: usize = 5_000_000;
const LP_TOL: f64 = 1e-9;

/// Small linear program `min <c, z>` subject to `G z <= h` and `E z = e`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LinearProgram {
    pub cost: Vec<f64>,
    pub ineq: Vec<Vec<f64>>,
    pub ineq_rhs: Vec<f64>,
    pub eq: Vec<Vec<f64>>,
    pub eq_rhs: Vec<f64>,
}

impl LinearProgram {
    pub fn new(cost: Vec<f64>) -> Self {
        LinearProgram {
            cost,
            ..Default::default()
        }
    }

    pub fn le(&mut self, row: Vec<f64>, rhs: f64) {
        self.ineq.push(row);
        self.ineq_rhs.push(rhs);
    }

    pub fn eq(&mut self, row: Vec<f64>, rhs: f64) {
        self.eq.push(row);
        self.eq_rhs.push(rhs);
    }

    /// Adds the constraints of `set` on the first `set.dim()` variables.
    pub fn restrict_to(&mut self, set: &FeasibleSet) -> Result<()> {
        let d = self.cost.len();
        let n = set.dim();
        let unit = |i: usize, s: f64| {
            let mut r = vec![0.0; d];
            r[i] = s;
            r
        };
        match set {
            FeasibleSet::Box { lo, hi } => {
                for i in 0..n {
                    self.le(unit(i, 1.0), hi[i]);
                    self.le(unit(i, -1.0), -lo[i]);
                }
            }
            FeasibleSet::Simplex { .. } => {
                for i in 0..n {
                    self.le(unit(i, -1.0), 0.0);
                }
                let mut row = vec![0.0; d];
                row[..n].iter_mut().for_each(|v| *v = 1.0);
                self.eq(row, 1.0);
            }
            FeasibleSet::Halfspaces { normals, offsets } => {
                for (a, b) in normals.iter().zip(offsets) {
                    let mut row = vec![0.0; d];
                    row[..n].copy_from_slice(a);
                    self.le(row, *b);
                }
            }
            _ => {
                return Err(Error::Unsupported(
                    "vertex enumeration needs a polyhedral feasible set".into(),
                ))
            }
        }
        Ok(())
    }

    /// Exhaustive vertex enumeration. Assumes the optimum is attained at a vertex,
    /// which holds for bounded nonempty polyhedra.
    pub fn solve_by_vertices(&self) -> Result<(f64, Vec<f64>)> {
        let d = self.cost.len();
        let k = self.eq.len();
        if k > d {
            return Err(Error::InvalidSetup("more equalities than variables".into()));
        }
        let need = d - k;
        let m = self.ineq.len();
        if need > m {
            return Err(Error::UnboundedSet);
        }
        let mut best: Option<(f64, Vec<f64>)> = None;
        let mut visited = 0usize;
        let mut combo: Vec<usize> = (0..need).collect();
        loop {
            visited += 1;
            if visited > VERTEX_CAP {
                return Err(Error::Unsupported("too many vertices to enumerate".into()));
            }
            if let Some(z) = self.vertex(&combo) {
                let v = dot(&self.cost, &z);
                if best.as_ref().is_none_or(|(b, _)| v < *b - 1e-12) {
                    best = Some((v, z));
                }
            }
            if !next_combination(&mut combo, m) {
                break;
            }
        }
        best.ok_or_else(|| Error::EmptySet("no feasible vertex".into()))
    }

    fn vertex(&self, active: &[usize]) -> Option<Vec<f64>> {
        let d = self.cost.len();
        let rows: Vec<(&Vec<f64>, f64)> = self
            .eq
            .iter()
            .zip(self.eq_rhs.iter().copied())
            .chain(active.iter().map(|&i| (&self.ineq[i], self.ineq_rhs[i])))
            .collect();
        let a = DMatrix::from_fn(d, d, |i, j| rows[i].0[j]);
        let b = DVector::from_iterator(d, rows.iter().map(|r| r.1));
        let lu = a.lu();
        if !lu.is_invertible() {
            return None;
        }
        let z = lu.solve(&b)?;
        let z: Vec<f64> = z.iter().copied().collect();
        if !z.iter().all(|v| v.is_finite()) {
            return None;
        }
        let scale = 1.0 + z.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let feasible = self
            .ineq
            .iter()
            .zip(&self.ineq_rhs)
            .all(|(g, h)| dot(g, &z) <= h + LP_TOL * scale)
            && self
                .eq
                .iter()
                .zip(&self.eq_rhs)
                .all(|(g, h)| (dot(g, &z) - h).abs() <= LP_TOL * scale);
        feasible.then_some(z)
    }
}

fn next_combination(c: &mut [usize], m: usize) -> bool {
    let k = c.len();
    if k == 0 {
        return false;
    }
    let mut i = k;
    while i > 0 {
        i -= 1;
        if c[i] < m - k + i {
            c[i] += 1;
            for j in i + 1..k {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// `min_{x in Q} max_i <a_i, x> + b_i` over a polyhedral `Q`, as `(f*, x*)`.
pub fn max_affine_minimum(a: &[Vec<f64>], b: &[f64], set: &FeasibleSet) -> Result<(f64, Vec<f64>)> {
    let n = set.dim();
    let mut cost = vec![0.0; n + 1];
    cost[n] = 1.0;
    let mut lp = LinearProgram::new(cost);
    for (ai, bi) in a.iter().zip(b) {
        let mut row = ai.clone();
        row.push(-1.0);
        lp.le(row, -bi);
    }
    lp.restrict_to(set)?;
    let (_, z) = lp.solve_by_vertices()?;
    let x = z[..n].to_vec();
    let f = Objective::MaxAffine {
        a: a.to_vec(),
        b: b.to_vec(),
    }
    .value(&x);
    Ok((f, x))
}

/// Solves `Q x = b` for a symmetric positive definite `Q`.
pub fn solve_spd(q: &[Vec<f64>], b: &[f64]) -> Result<Vec<f64>> {
    let n = b.len();
    let m = DMatrix::from_fn(n, n, |i, j| q[i][j]);
    let chol = m
        .cholesky()
        .ok_or_else(|| Error::InvalidParameter("matrix is not positive definite".into()))?;
    Ok(chol.solve(&DVector::from_column_slice(b)).iter().copied().collect())
}

/// Value and optimal row strategy of `min_u max_v u^T A v` over two simplices.
pub fn game_value(a: &[Vec<f64>]) -> Result<(f64, Vec<f64>)> {
    let rows = a.len();
    let cols = a.first().map_or(0, Vec::len);
    let mut cost = vec![0.0; rows + 1];
    cost[rows] = 1.0;
    let mut lp = LinearProgram::new(cost);
    for j in 0..cols {
        let mut row: Vec<f64> = a.iter().map(|r| r[j]).collect();
        row.push(-1.0);
        lp.le(row, 0.0);
    }
    lp.restrict_to(&FeasibleSet::simplex(rows))?;
    let (v, z) = lp.solve_by_vertices()?;
    Ok((v, z[..rows].to_vec()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn combinations_are_exhaustive() {
        let mut c = vec![0, 1];
        let mut count = 1;
        while next_combination(&mut c, 5) {
            count += 1;
        }
        assert_eq!(count, 10);
    }

    #[test]
    fn max_affine_on_a_box() {
        // max(x, -x, y - 1) on [-1, 1]^2 is 0 on {x = 0, y <= 1}
        let a = vec![vec![1.0, 0.0], vec![-1.0, 0.0], vec![0.0, 1.0]];
        let b = vec![0.0, 0.0, -1.0];
        let (f, x) = max_affine_minimum(&a, &b, &FeasibleSet::cube(2, -1.0, 1.0)).unwrap();
        assert_abs_diff_eq!(f, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(x[0], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn matches_dense_grid() {
        let a = vec![vec![0.3, -1.2], vec![-0.7, 0.4], vec![1.1, 0.9], vec![-0.2, -0.5]];
        let b = vec![0.1, -0.3, -0.6, 0.2];
        let f = Objective::MaxAffine { a: a.clone(), b: b.clone() };
        let (fs, xs) = max_affine_minimum(&a, &b, &FeasibleSet::cube(2, -1.0, 1.0)).unwrap();
        assert_abs_diff_eq!(f.value(&xs), fs, epsilon = 1e-12);
        let steps = 400;
        let mut grid = f64::INFINITY;
        for i in 0..=steps {
            for j in 0..=steps {
                let x = [-1.0 + 2.0 * i as f64 / steps as f64, -1.0 + 2.0 * j as f64 / steps as f64];
                grid = grid.min(f.value(&x));
            }
        }
        assert!(grid >= fs - 1e-12);
        assert!(grid - fs <= 0.01);
    }

    #[test]
    fn diagonal_game_value() {
        let (v, u) = game_value(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_abs_diff_eq!(v, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(u[0], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn spd_solve() {
        let x = solve_spd(&[vec![2.0, 1.0], vec![1.0, 3.0]], &[3.0, 4.0]).unwrap();
        assert_abs_diff_eq!(x[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(x[1], 1.0, epsilon = 1e-12);
    }
}
