//! Adaptive mirror prox for abstract equilibrium problems.
//!
//! An [`EquilibriumModel`] wraps a bifunction `psi(x, y)`; for a variational
//! inequality with field `G` it is `<G(y), x - y>` plus an optional `w (|x|_1 - |y|_1)`.
//! [`run_mirror_prox`] performs the extragradient pair of prox steps with adaptive
//! `L` and `Δ`, and the certificates in this module measure the quality of the
//! weighted average it returns.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::geometry::{
    FeasibleSet, LocalModel, ProductSetup, ProxGeometry, ProxSetup, DEFAULT_INNER_TOL,
};
use crate::linalg::{axpy, dot, mat_t_vec, mat_vec, norm1, sub};
use crate::oracle::{max_eigenvalue, min_eigenvalue};
use crate::trace::{Cell, TraceTable};

const ACCEPT_SLACK: f64 = 1e-12;
const DOUBLING_CAP_LOG2: i32 = 60;
const ASCENT_STEPS: usize = 20_000;
const ASCENT_STARTS: usize = 8;

/// Affine field `G(x) = M x + c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineOperator {
    pub matrix: Vec<Vec<f64>>,
    pub offset: Vec<f64>,
}

impl AffineOperator {
    pub fn new(matrix: Vec<Vec<f64>>, offset: Vec<f64>) -> Result<Self> {
        let n = offset.len();
        check_dim(n, matrix.len())?;
        for row in &matrix {
            check_dim(n, row.len())?;
        }
        Ok(AffineOperator { matrix, offset })
    }

    pub fn constant(offset: Vec<f64>) -> Self {
        let n = offset.len();
        AffineOperator {
            matrix: vec![vec![0.0; n]; n],
            offset,
        }
    }

    pub fn dim(&self) -> usize {
        self.offset.len()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        mat_vec(&self.matrix, x)
            .iter()
            .zip(&self.offset)
            .map(|(a, b)| a + b)
            .collect()
    }

    fn symmetric_part(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| 0.5 * (self.matrix[i][j] + self.matrix[j][i]))
                    .collect()
            })
            .collect()
    }

    /// `<M x, x> = 0` for every `x`.
    pub fn is_skew(&self) -> bool {
        self.symmetric_part()
            .iter()
            .flatten()
            .all(|v| v.abs() <= 1e-14)
    }

    pub fn is_monotone(&self) -> bool {
        self.dim() == 0 || min_eigenvalue(&self.symmetric_part()) >= -1e-12
    }
}

/// Variational inequality over a product of feasible sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VIProblem {
    pub operator: AffineOperator,
    pub blocks: Vec<FeasibleSet>,
    /// Weight `w` of the mixed term `h(x) = w |x|_1`.
    #[serde(default)]
    pub l1_weight: f64,
    pub monotone: bool,
}

impl VIProblem {
    pub fn new(operator: AffineOperator, blocks: Vec<FeasibleSet>) -> Result<Self> {
        let n: usize = blocks.iter().map(FeasibleSet::dim).sum();
        check_dim(operator.dim(), n)?;
        for b in &blocks {
            b.validate()?;
            if !b.is_bounded() {
                return Err(Error::UnboundedSet);
            }
        }
        let monotone = operator.is_monotone();
        Ok(VIProblem {
            operator,
            blocks,
            l1_weight: 0.0,
            monotone,
        })
    }

    pub fn with_l1(mut self, weight: f64) -> Result<Self> {
        if !(weight >= 0.0 && weight.is_finite()) {
            return Err(Error::InvalidParameter("l1 weight must be nonnegative".into()));
        }
        self.l1_weight = weight;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.operator.dim()
    }

    /// Entropy on simplex blocks, squared Euclidean elsewhere.
    pub fn default_setup(&self) -> Result<ProductSetup> {
        let blocks = self
            .blocks
            .iter()
            .map(|b| match b {
                FeasibleSet::Simplex { dim } => ProxSetup::entropy(*dim),
                other => ProxSetup::euclidean(other.clone()),
            })
            .collect::<Result<Vec<_>>>()?;
        ProductSetup::new(blocks)
    }

    fn split<'a>(&self, x: &'a [f64]) -> Vec<&'a [f64]> {
        let mut start = 0;
        self.blocks
            .iter()
            .map(|b| {
                let s = &x[start..start + b.dim()];
                start += b.dim();
                s
            })
            .collect()
    }

    fn linear_min(&self, c: &[f64]) -> Result<f64> {
        self.split(c)
            .into_iter()
            .zip(&self.blocks)
            .map(|(ci, b)| b.linear_min(ci))
            .sum()
    }

    fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(x.len());
        for (xi, b) in self.split(x).into_iter().zip(&self.blocks) {
            out.extend(b.project(xi)?);
        }
        Ok(out)
    }
}

/// Constants of a `(δ, Δ, L)`-model of an equilibrium problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumParams {
    pub value_error: f64,
    pub gradient_error: f64,
    pub smoothness: f64,
}

/// `psi_δ(x, y)` for a VI, together with its declared constants.
#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumModel {
    pub problem: VIProblem,
    pub params: EquilibriumParams,
    pub inner_tol: f64,
}

/// Exact model `psi(x, y) = <G(y), x - y> + h(x) - h(y)`. `L` is left at infinity
/// until declared with [`EquilibriumModel::with_params`].
pub fn model_from_vi(problem: VIProblem) -> EquilibriumModel {
    EquilibriumModel {
        problem,
        params: EquilibriumParams {
            value_error: 0.0,
            gradient_error: 0.0,
            smoothness: f64::INFINITY,
        },
        inner_tol: DEFAULT_INNER_TOL,
    }
}

/// Sampled residuals of the model properties; each is `max(lhs - rhs)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumCheck {
    pub samples: usize,
    pub identity: f64,
    pub convexity: f64,
    pub monotonicity: f64,
    pub smoothness: f64,
}

impl EquilibriumCheck {
    pub fn passed(&self, tol: f64) -> bool {
        [self.identity, self.convexity, self.monotonicity, self.smoothness]
            .iter()
            .all(|v| *v <= tol)
    }
}

impl EquilibriumModel {
    pub fn with_params(mut self, params: EquilibriumParams) -> Self {
        self.params = params;
        self
    }

    pub fn dim(&self) -> usize {
        self.problem.dim()
    }

    pub fn field(&self, y: &[f64]) -> Vec<f64> {
        self.problem.operator.apply(y)
    }

    pub fn psi(&self, x: &[f64], y: &[f64]) -> f64 {
        self.psi_with_field(x, y, &self.field(y))
    }

    fn psi_with_field(&self, x: &[f64], y: &[f64], gy: &[f64]) -> f64 {
        let w = self.problem.l1_weight;
        let mixed = if w == 0.0 { 0.0 } else { w * (norm1(x) - norm1(y)) };
        dot(gy, &sub(x, y)) + mixed
    }

    /// `x -> psi(x, y)` as a prox model.
    pub fn local_model(&self, y: &[f64], gy: &[f64]) -> LocalModel {
        if self.problem.l1_weight == 0.0 {
            LocalModel::linear(y.to_vec(), gy.to_vec())
        } else {
            LocalModel::composite(y.to_vec(), gy.to_vec(), self.problem.l1_weight)
        }
    }

    /// Samples `samples` triples and evaluates identity, midpoint convexity in the
    /// first argument, δ-monotonicity and the relative smoothness inequality.
    pub fn check<G: ProxGeometry + ?Sized>(&self, setup: &G, samples: usize, seed: u64) -> Result<EquilibriumCheck> {
        check_dim(setup.dim(), self.dim())?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = self.params;
        let mut out = EquilibriumCheck {
            samples,
            identity: f64::NEG_INFINITY,
            convexity: f64::NEG_INFINITY,
            monotonicity: f64::NEG_INFINITY,
            smoothness: f64::NEG_INFINITY,
        };
        for _ in 0..samples {
            let x = setup.sample(&mut rng, 1.0);
            let y = setup.sample(&mut rng, 1.0);
            let z = setup.sample(&mut rng, 1.0);
            out.identity = out.identity.max(self.psi(&x, &x).abs());
            let mid: Vec<f64> = x.iter().zip(&z).map(|(a, b)| 0.5 * (a + b)).collect();
            let chord = 0.5 * (self.psi(&x, &y) + self.psi(&z, &y));
            out.convexity = out.convexity.max(self.psi(&mid, &y) - chord);
            out.monotonicity = out
                .monotonicity
                .max(self.psi(&x, &y) + self.psi(&y, &x) - p.value_error);
            let rhs = self.psi(&x, &z)
                + self.psi(&z, &y)
                + p.smoothness * (setup.divergence(&x, &z) + setup.divergence(&z, &y))
                + p.gradient_error * setup.norm(&sub(&y, &z))
                + p.value_error;
            out.smoothness = out.smoothness.max(self.psi(&x, &y) - rhs);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MirrorProxConfig {
    pub epsilon: f64,
    pub l0: f64,
    pub gradient_error0: f64,
    /// Use `V(x^{N+1}, y^{N+1})` instead of `V(y^{N+1}, x^{N+1})` in the acceptance test.
    #[serde(default)]
    pub swap_divergence: bool,
    #[serde(default = "default_iteration_cap")]
    pub max_iterations: usize,
}

fn default_iteration_cap() -> usize {
    1_000_000
}

impl MirrorProxConfig {
    pub fn new(epsilon: f64, l0: f64, gradient_error0: f64) -> Self {
        MirrorProxConfig {
            epsilon,
            l0,
            gradient_error0,
            swap_divergence: false,
            max_iterations: default_iteration_cap(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidParameter("epsilon must be positive".into()));
        }
        if !(self.l0 > 0.0 && self.l0.is_finite()) {
            return Err(Error::InvalidParameter("L0 must be positive".into()));
        }
        if !(self.gradient_error0 >= 0.0 && self.gradient_error0.is_finite()) {
            return Err(Error::InvalidParameter("initial gradient error must be nonnegative".into()));
        }
        Ok(())
    }
}

/// One accepted iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MirrorProxRecord {
    pub k: usize,
    pub l: f64,
    pub gradient_error: f64,
    pub y: Vec<f64>,
    pub x: Vec<f64>,
    /// `|y^{k+1} - x^{k+1}|`
    pub yx_distance: f64,
    pub inner_loops: usize,
    pub s: f64,
    pub prox_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MirrorProxReport {
    pub y_tilde: Vec<f64>,
    pub s_n: f64,
    pub iterations: usize,
    /// Largest residual reported by the prox subproblems.
    pub delta_tilde: f64,
    pub epsilon: f64,
    /// `max_{x in Q} V(x, x^0)`
    pub max_divergence: f64,
    /// `(1/S_N) Σ Δ_{k+1} |y^{k+1} - x^{k+1}| / L_{k+1}`
    pub noise_term: f64,
    pub operator_calls: usize,
    pub trace: Vec<MirrorProxRecord>,
}

impl MirrorProxReport {
    /// Right-hand side of the averaged inequality for a model with value error `delta`.
    pub fn averaged_bound(&self, delta: f64) -> f64 {
        self.epsilon + 2.0 * self.delta_tilde + delta + self.noise_term
    }

    /// Bound on the weak VI gap of `y_tilde`.
    pub fn weak_gap_bound(&self, delta: f64) -> f64 {
        self.epsilon + 2.0 * self.delta_tilde + 3.0 * delta + self.noise_term
    }

    /// Bound on the saddle gap of `y_tilde`.
    pub fn saddle_bound(&self, delta: f64) -> f64 {
        self.epsilon + 2.0 * self.delta_tilde + 2.0 * delta + self.noise_term
    }
}

/// Adaptive mirror prox started at the prox center, stopped once
/// `Σ 1/L_{k+1} >= max V(., x^0) / ε`.
pub fn run_mirror_prox<G: ProxGeometry + ?Sized>(
    model: &EquilibriumModel,
    setup: &G,
    config: &MirrorProxConfig,
) -> Result<MirrorProxReport> {
    config.validate()?;
    let n = model.dim();
    check_dim(setup.dim(), n)?;
    let delta = model.params.value_error;
    let mut x = setup.prox_center();
    let max_div = setup.max_divergence(&x)?;
    let target = max_div / config.epsilon;
    let cap = config.l0 * 2f64.powi(DOUBLING_CAP_LOG2);

    let mut l = config.l0;
    let mut big_delta = config.gradient_error0;
    let mut s = 0.0;
    let mut y_sum = vec![0.0; n];
    let mut noise = 0.0;
    let mut delta_tilde: f64 = 0.0;
    let mut calls = 0;
    let mut trace = Vec::new();

    while s < target {
        let k = trace.len();
        if k >= config.max_iterations {
            return Err(Error::BudgetExhausted {
                iterations: k,
                detail: format!("S = {s:e} is below the target {target:e}"),
            });
        }
        l /= 2.0;
        big_delta /= 2.0;
        let gx = model.field(&x);
        calls += 1;
        let x_model = model.local_model(&x, &gx);
        let mut loops = 0;
        let (y, x_next, residual) = loop {
            loops += 1;
            let y_out = setup.prox(&x, &x_model, l, model.inner_tol)?;
            let y = y_out.point;
            let gy = model.field(&y);
            calls += 1;
            let x_out = setup.prox(&x, &model.local_model(&y, &gy), l, model.inner_tol)?;
            let xn = x_out.point;
            let lhs = model.psi_with_field(&xn, &x, &gx);
            let psi_yx = model.psi_with_field(&y, &x, &gx);
            let psi_xy = model.psi_with_field(&xn, &y, &gy);
            let v_second = if config.swap_divergence {
                setup.divergence(&xn, &y)
            } else {
                setup.divergence(&y, &xn)
            };
            let rhs = psi_yx
                + psi_xy
                + l * (setup.divergence(&y, &x) + v_second)
                + big_delta * setup.norm(&sub(&y, &xn))
                + delta;
            let slack = ACCEPT_SLACK * (1.0 + lhs.abs() + psi_yx.abs() + psi_xy.abs());
            if lhs <= rhs + slack {
                break (y, xn, y_out.residual.max(x_out.residual));
            }
            l *= 2.0;
            big_delta *= 2.0;
            if l > cap {
                return Err(Error::DoublingCap { iteration: k, l });
            }
        };
        let dist = setup.norm(&sub(&y, &x_next));
        s += 1.0 / l;
        y_sum = axpy(&y_sum, 1.0 / l, &y);
        noise += big_delta * dist / l;
        delta_tilde = delta_tilde.max(residual);
        trace.push(MirrorProxRecord {
            k,
            l,
            gradient_error: big_delta,
            y,
            x: x_next.clone(),
            yx_distance: dist,
            inner_loops: loops,
            s,
            prox_residual: residual,
        });
        x = x_next;
    }
    let y_tilde = y_sum.iter().map(|v| v / s).collect();
    Ok(MirrorProxReport {
        y_tilde,
        s_n: s,
        iterations: trace.len(),
        delta_tilde,
        epsilon: config.epsilon,
        max_divergence: max_div,
        noise_term: if s > 0.0 { noise / s } else { 0.0 },
        operator_calls: calls,
        trace,
    })
}

/// `-(1/S_N) Σ psi(x, y^{k+1}) / L_{k+1}` at a point `x`.
pub fn averaged_residual(model: &EquilibriumModel, report: &MirrorProxReport, x: &[f64]) -> f64 {
    let total: f64 = report
        .trace
        .iter()
        .map(|r| model.psi(x, &r.y) / r.l)
        .sum();
    -total / report.s_n
}

/// Largest excess of the averaged residual over its bound across sampled points.
pub fn check_averaged_inequality<G: ProxGeometry + ?Sized>(
    model: &EquilibriumModel,
    setup: &G,
    report: &MirrorProxReport,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    check_dim(setup.dim(), model.dim())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bound = report.averaged_bound(model.params.value_error);
    Ok((0..samples)
        .map(|_| {
            let x = setup.sample(&mut rng, 1.0);
            averaged_residual(model, report, &x) - bound
        })
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Value of `max_{x in Q} <G(x), y - x>`, with a flag telling whether it is exact
/// or a lower bound from projected ascent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapCertificate {
    pub value: f64,
    pub exact: bool,
}

/// Weak VI gap of `y`.
///
/// For a skew (or zero) linear part the maximand is linear in `x`, and the maximum
/// comes from linear minimization over each block. Otherwise the concave maximand
/// is maximized by projected ascent from several starts.
pub fn vi_gap_certificate(problem: &VIProblem, y: &[f64]) -> Result<GapCertificate> {
    check_dim(problem.dim(), y.len())?;
    for b in &problem.blocks {
        if !matches!(
            b,
            FeasibleSet::Simplex { .. } | FeasibleSet::Box { .. } | FeasibleSet::Ball { .. }
        ) {
            return Err(Error::Unsupported(
                "gap certificate needs simplex, box or ball blocks".into(),
            ));
        }
    }
    if problem.l1_weight != 0.0 {
        return Err(Error::Unsupported("gap certificate for mixed VIs".into()));
    }
    let op = &problem.operator;
    if op.is_skew() {
        // <Mx + c, y - x> = <M^T y - c, x> + <c, y>
        let c = &op.offset;
        let slope: Vec<f64> = mat_t_vec(&op.matrix, y)
            .iter()
            .zip(c)
            .map(|(a, b)| b - a)
            .collect();
        let value = dot(c, y) - problem.linear_min(&slope)?;
        return Ok(GapCertificate { value, exact: true });
    }
    let objective = |x: &[f64]| dot(&op.apply(x), &sub(y, x));
    let sym = op.symmetric_part();
    let curvature = 2.0 * max_eigenvalue(&sym).max(1e-12);
    let step = 1.0 / curvature;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut best = objective(y);
    for start in 0..ASCENT_STARTS {
        let mut x = if start == 0 {
            y.to_vec()
        } else {
            let mut p = Vec::with_capacity(y.len());
            for b in &problem.blocks {
                p.extend(b.sample(&mut rng, 1.0));
            }
            p
        };
        for _ in 0..ASCENT_STEPS {
            // gradient of <Mx + c, y - x> is M^T (y - x) - M x - c
            let g: Vec<f64> = mat_t_vec(&op.matrix, &sub(y, &x))
                .iter()
                .zip(&op.apply(&x))
                .map(|(a, b)| a - b)
                .collect();
            let next = problem.project(&axpy(&x, step, &g))?;
            let moved = sub(&next, &x).iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            x = next;
            if moved <= 1e-14 {
                break;
            }
        }
        best = best.max(objective(&x));
    }
    Ok(GapCertificate {
        value: best,
        exact: false,
    })
}

/// Bilinear saddle problem `min_u max_v u^T A v` over `Q1 x Q2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaddleProblem {
    pub payoff: Vec<Vec<f64>>,
    pub rows: FeasibleSet,
    pub cols: FeasibleSet,
}

impl SaddleProblem {
    pub fn new(payoff: Vec<Vec<f64>>, rows: FeasibleSet, cols: FeasibleSet) -> Result<Self> {
        check_dim(rows.dim(), payoff.len())?;
        for r in &payoff {
            check_dim(cols.dim(), r.len())?;
        }
        Ok(SaddleProblem { payoff, rows, cols })
    }

    /// Matrix game over two simplices.
    pub fn matrix_game(payoff: Vec<Vec<f64>>) -> Result<Self> {
        let m = payoff.len();
        let n = payoff.first().map_or(0, Vec::len);
        Self::new(payoff, FeasibleSet::simplex(m), FeasibleSet::simplex(n))
    }

    pub fn value(&self, u: &[f64], v: &[f64]) -> f64 {
        dot(u, &mat_vec(&self.payoff, v))
    }

    /// `(u, v) -> (A v, -A^T u)`.
    pub fn to_vi(&self) -> Result<VIProblem> {
        let m = self.rows.dim();
        let n = self.cols.dim();
        let mut matrix = vec![vec![0.0; m + n]; m + n];
        for (i, row) in self.payoff.iter().enumerate() {
            for (j, a) in row.iter().enumerate() {
                matrix[i][m + j] = *a;
                matrix[m + j][i] = -a;
            }
        }
        let op = AffineOperator::new(matrix, vec![0.0; m + n])?;
        VIProblem::new(op, vec![self.rows.clone(), self.cols.clone()])
    }

    pub fn split<'a>(&self, x: &'a [f64]) -> (&'a [f64], &'a [f64]) {
        x.split_at(self.rows.dim())
    }
}

/// `max_{v in Q2} f(u, v) - min_{u in Q1} f(u, v)`.
pub fn saddle_gap(problem: &SaddleProblem, u: &[f64], v: &[f64]) -> Result<f64> {
    check_dim(problem.rows.dim(), u.len())?;
    check_dim(problem.cols.dim(), v.len())?;
    let row_payoff: Vec<f64> = mat_t_vec(&problem.payoff, u).iter().map(|a| -a).collect();
    let col_payoff = mat_vec(&problem.payoff, v);
    let upper = -problem.cols.linear_min(&row_payoff)?;
    let lower = problem.rows.linear_min(&col_payoff)?;
    Ok(upper - lower)
}

impl TraceTable for MirrorProxReport {
    fn columns(&self) -> &'static [&'static str] {
        &["k", "L", "Delta", "S", "inner_loops", "yx_distance", "prox_residual"]
    }

    fn rows(&self) -> Vec<Vec<Cell>> {
        self.trace
            .iter()
            .map(|r| {
                vec![
                    r.k.into(),
                    r.l.into(),
                    r.gradient_error.into(),
                    r.s.into(),
                    r.inner_loops.into(),
                    r.yx_distance.into(),
                    r.prox_residual.into(),
                ]
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference::game_value;
    use approx::assert_abs_diff_eq;

    fn diagonal_game() -> SaddleProblem {
        SaddleProblem::matrix_game(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap()
    }

    #[test]
    fn constant_field_psi() {
        let p = VIProblem::new(
            AffineOperator::constant(vec![1.0, -2.0]),
            vec![FeasibleSet::cube(2, -1.0, 1.0)],
        )
        .unwrap();
        let m = model_from_vi(p);
        assert_abs_diff_eq!(m.psi(&[0.5, 0.5], &[0.0, 0.0]), -0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(m.psi(&[0.3, -0.1], &[0.3, -0.1]), 0.0);
        let setup = m.problem.default_setup().unwrap();
        let c = m.check(&setup, 200, 1).unwrap();
        assert!(c.monotonicity.abs() <= 1e-15);
    }

    #[test]
    fn game_psi_matches_substitution() {
        let game = SaddleProblem::matrix_game(vec![vec![2.0, -1.0], vec![0.5, 3.0]]).unwrap();
        let m = model_from_vi(game.to_vi().unwrap());
        let (u, v) = ([0.3, 0.7], [0.6, 0.4]);
        let (u2, v2) = ([0.9, 0.1], [0.2, 0.8]);
        let x: Vec<f64> = u2.iter().chain(&v2).copied().collect();
        let y: Vec<f64> = u.iter().chain(&v).copied().collect();
        let av = mat_vec(&game.payoff, &v);
        let atu = mat_t_vec(&game.payoff, &u);
        let expected = dot(&av, &sub(&u2, &u)) - dot(&atu, &sub(&v2, &v));
        assert_abs_diff_eq!(m.psi(&x, &y), expected, epsilon = 1e-14);
    }

    #[test]
    fn diagonal_game_converges_to_uniform() {
        let game = diagonal_game();
        let vi = game.to_vi().unwrap();
        let setup = vi.default_setup().unwrap();
        let model = model_from_vi(vi);
        let eps = 1e-3;
        let r = run_mirror_prox(&model, &setup, &MirrorProxConfig::new(eps, 1.0, 0.0)).unwrap();
        assert!(r.s_n >= r.max_divergence / eps);
        let last = r.trace[r.trace.len() - 2].s;
        assert!(last < r.max_divergence / eps);
        let (u, v) = game.split(&r.y_tilde);
        let gap = saddle_gap(&game, u, v).unwrap();
        assert!(gap <= eps + 2.0 * r.delta_tilde + 1e-9, "gap {gap}");
        assert_abs_diff_eq!(u[0], 0.5, epsilon = 1e-2);
        assert_abs_diff_eq!(v[1], 0.5, epsilon = 1e-2);
    }

    #[test]
    fn zero_field_stops_quickly() {
        let p = VIProblem::new(
            AffineOperator::constant(vec![0.0; 3]),
            vec![FeasibleSet::simplex(3)],
        )
        .unwrap();
        let setup = p.default_setup().unwrap();
        let model = model_from_vi(p.clone());
        let r = run_mirror_prox(&model, &setup, &MirrorProxConfig::new(1e-3, 1.0, 0.0)).unwrap();
        assert!(r.iterations < 20);
        assert!(vi_gap_certificate(&p, &r.y_tilde).unwrap().value.abs() <= 1e-12);
    }

    #[test]
    fn certificate_of_game_matches_vertex_formula() {
        let a = vec![vec![0.2, -0.4, 1.0], vec![0.7, 0.1, -0.3]];
        let game = SaddleProblem::matrix_game(a.clone()).unwrap();
        let vi = game.to_vi().unwrap();
        let y = [0.4, 0.6, 0.1, 0.3, 0.6];
        let cert = vi_gap_certificate(&vi, &y).unwrap();
        assert!(cert.exact);
        let gap = saddle_gap(&game, &y[..2], &y[2..]).unwrap();
        assert_abs_diff_eq!(cert.value, gap, epsilon = 1e-14);
    }

    #[test]
    fn equilibrium_has_zero_gap() {
        let a = vec![vec![3.0, -1.0], vec![-2.0, 1.0]];
        let game = SaddleProblem::matrix_game(a.clone()).unwrap();
        let (value, u) = game_value(&a).unwrap();
        let at: Vec<Vec<f64>> = (0..2).map(|j| (0..2).map(|i| -a[i][j]).collect()).collect();
        let (neg, v) = game_value(&at).unwrap();
        assert_abs_diff_eq!(value, -neg, epsilon = 1e-12);
        assert_abs_diff_eq!(saddle_gap(&game, &u, &v).unwrap(), 0.0, epsilon = 1e-9);
    }

    #[test]
    fn constant_field_certificate_is_closed_form() {
        let c = vec![1.0, -2.0];
        let p = VIProblem::new(AffineOperator::constant(c.clone()), vec![FeasibleSet::cube(2, -1.0, 1.0)]).unwrap();
        let y = [0.25, 0.5];
        let cert = vi_gap_certificate(&p, &y).unwrap();
        // <c, y> - min_box <c, x> = (0.25 - 1) - (-1 - 2)
        assert_abs_diff_eq!(cert.value, 2.25, epsilon = 1e-15);
    }

    #[test]
    fn monotone_non_skew_uses_ascent() {
        let op = AffineOperator::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![0.0, 0.0]).unwrap();
        let p = VIProblem::new(op, vec![FeasibleSet::cube(2, -1.0, 1.0)]).unwrap();
        // max_x <x, y - x> = |y|^2 / 4 when y/2 is feasible
        let cert = vi_gap_certificate(&p, &[0.5, -1.0]).unwrap();
        assert!(!cert.exact);
        assert_abs_diff_eq!(cert.value, 0.3125, epsilon = 1e-10);
    }

    #[test]
    fn unbounded_blocks_are_rejected() {
        let r = VIProblem::new(AffineOperator::constant(vec![1.0]), vec![FeasibleSet::whole_space(1)]);
        assert_eq!(r.unwrap_err(), Error::UnboundedSet);
    }
}
