//! Seeded test instances with attached reference solutions.

use std::fmt;
use std::str::FromStr;

use inexact_opt::geometry::FeasibleSet;
use inexact_opt::oracle::{Constraint, Objective, ProblemSpec};
use inexact_opt::reference::{game_value, max_affine_minimum, solve_spd};
use inexact_opt::vi::SaddleProblem;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};

/// Spectrum bounds of generated quadratics.
pub const EIGEN_RANGE: (f64, f64) = (0.1, 10.0);
/// Entry scale of generated max-affine pieces.
pub const MAX_AFFINE_SCALE: f64 = 0.02;
/// Weight of the l1 term in composite instances.
pub const COMPOSITE_L1: f64 = 0.1;
const MAX_AFFINE_DIM_CAP: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemKind {
    /// `1/2 x^T Q x - b^T x` on the whole space, spectrum of `Q` spanning [0.1, 10].
    Quadratic,
    /// `max_i <a_i, x> + b_i` with `2n` pieces on `[-1, 1]^n`.
    MaxAffine,
    /// Diagonal quadratic plus `0.1 |x|_1` on the whole space.
    Composite,
    /// Random `n x n` matrix game with entries in [0, 1].
    MatrixGame,
    /// Identity payoff `n x n` game.
    DiagonalGame,
    /// `|x|_2` subject to `1 - x_1 <= 0`.
    HomogeneousNormConstrained,
    /// `sum x_i` subject to `x_1 - x_2 <= 0` on `[-1, 1]^n`.
    BoxLp,
}

impl ProblemKind {
    pub const ALL: [ProblemKind; 7] = [
        ProblemKind::Quadratic,
        ProblemKind::MaxAffine,
        ProblemKind::Composite,
        ProblemKind::MatrixGame,
        ProblemKind::DiagonalGame,
        ProblemKind::HomogeneousNormConstrained,
        ProblemKind::BoxLp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ProblemKind::Quadratic => "quadratic",
            ProblemKind::MaxAffine => "max-affine",
            ProblemKind::Composite => "composite",
            ProblemKind::MatrixGame => "matrix-game",
            ProblemKind::DiagonalGame => "diagonal-game",
            ProblemKind::HomogeneousNormConstrained => "homogeneous-norm-constrained",
            ProblemKind::BoxLp => "box-lp",
        }
    }
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProblemKind {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self> {
        ProblemKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| BenchError::UnknownKind(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "kebab-case")]
pub enum Instance {
    Minimization {
        problem: ProblemSpec,
    },
    Game {
        game: SaddleProblem,
        value: f64,
        row_strategy: Vec<f64>,
        col_strategy: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedProblem {
    pub kind: ProblemKind,
    pub dim: usize,
    pub seed: u64,
    pub instance: Instance,
}

impl GeneratedProblem {
    pub fn problem(&self) -> Option<&ProblemSpec> {
        match &self.instance {
            Instance::Minimization { problem } => Some(problem),
            Instance::Game { .. } => None,
        }
    }
}

pub fn generate_problem(kind: ProblemKind, dim: usize, seed: u64) -> Result<GeneratedProblem> {
    if dim == 0 {
        return Err(BenchError::Config("dimension must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let instance = match kind {
        ProblemKind::Quadratic => minimization(quadratic(dim, &mut rng)?),
        ProblemKind::MaxAffine => minimization(max_affine(dim, &mut rng)?),
        ProblemKind::Composite => minimization(composite(dim, &mut rng)?),
        ProblemKind::MatrixGame => {
            let a: Vec<Vec<f64>> = (0..dim)
                .map(|_| (0..dim).map(|_| rng.random::<f64>()).collect())
                .collect();
            game(a)?
        }
        ProblemKind::DiagonalGame => {
            let a = (0..dim)
                .map(|i| (0..dim).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
                .collect();
            game(a)?
        }
        ProblemKind::HomogeneousNormConstrained => {
            let mut a = vec![0.0; dim];
            a[0] = -1.0;
            let mut xs = vec![0.0; dim];
            xs[0] = 1.0;
            let mut p = ProblemSpec::new(Objective::Norm { dim }, FeasibleSet::whole_space(dim))?
                .with_constraint(Constraint::Affine { a, b: 1.0 })?
                .with_reference(1.0, Some(xs))?;
            p.objective_lipschitz = Some(1.0);
            p.constraint_lipschitz = Some(1.0);
            minimization(p)
        }
        ProblemKind::BoxLp => {
            if dim < 2 {
                return Err(BenchError::Config("box-lp needs dimension at least 2".into()));
            }
            let mut a = vec![0.0; dim];
            a[0] = 1.0;
            a[1] = -1.0;
            let mut p = ProblemSpec::new(
                Objective::MaxAffine {
                    a: vec![vec![1.0; dim]],
                    b: vec![0.0],
                },
                FeasibleSet::cube(dim, -1.0, 1.0),
            )?
            .with_constraint(Constraint::Affine { a, b: 0.0 })?
            .with_reference(-(dim as f64), Some(vec![-1.0; dim]))?;
            p.objective_lipschitz = Some((dim as f64).sqrt());
            p.constraint_lipschitz = Some(2f64.sqrt());
            minimization(p)
        }
    };
    let mut out = GeneratedProblem {
        kind,
        dim,
        seed,
        instance,
    };
    if let Instance::Minimization { problem } = &mut out.instance {
        problem.seed = seed;
    }
    Ok(out)
}

fn minimization(problem: ProblemSpec) -> Instance {
    Instance::Minimization { problem }
}

fn spectrum(dim: usize) -> Vec<f64> {
    let (lo, hi) = EIGEN_RANGE;
    if dim == 1 {
        return vec![lo];
    }
    (0..dim)
        .map(|i| lo + (hi - lo) * i as f64 / (dim - 1) as f64)
        .collect()
}

fn normal_vec(dim: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..dim).map(|_| StandardNormal.sample(rng)).collect()
}

fn quadratic(dim: usize, rng: &mut ChaCha8Rng) -> Result<ProblemSpec> {
    let g: DMatrix<f64> = DMatrix::from_fn(dim, dim, |_, _| StandardNormal.sample(rng));
    let u = g.qr().q();
    let lambda = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(spectrum(dim)));
    let q: DMatrix<f64> = &u * lambda * u.transpose();
    let q: Vec<Vec<f64>> = (0..dim)
        .map(|i| (0..dim).map(|j| 0.5 * (q[(i, j)] + q[(j, i)])).collect())
        .collect();
    let b = normal_vec(dim, rng);
    let xs = solve_spd(&q, &b)?;
    let objective = Objective::Quadratic { q, b };
    let fs = objective.value(&xs);
    Ok(ProblemSpec::new(objective, FeasibleSet::whole_space(dim))?.with_reference(fs, Some(xs))?)
}

fn max_affine(dim: usize, rng: &mut ChaCha8Rng) -> Result<ProblemSpec> {
    if dim > MAX_AFFINE_DIM_CAP {
        return Err(BenchError::Config(format!(
            "max-affine reference solver supports dimension up to {MAX_AFFINE_DIM_CAP}"
        )));
    }
    let m = 2 * dim;
    let mut entry = || MAX_AFFINE_SCALE * rng.random_range(-1.0..=1.0);
    let a: Vec<Vec<f64>> = (0..m).map(|_| (0..dim).map(|_| entry()).collect()).collect();
    let b: Vec<f64> = (0..m).map(|_| entry()).collect();
    let set = FeasibleSet::cube(dim, -1.0, 1.0);
    let (fs, xs) = max_affine_minimum(&a, &b, &set)?;
    let lipschitz = a
        .iter()
        .map(|r| r.iter().map(|v| v * v).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    let mut p = ProblemSpec::new(Objective::MaxAffine { a, b }, set)?.with_reference(fs, Some(xs))?;
    p.objective_lipschitz = Some(lipschitz);
    Ok(p)
}

fn composite(dim: usize, rng: &mut ChaCha8Rng) -> Result<ProblemSpec> {
    let diag = spectrum(dim);
    let b = normal_vec(dim, rng);
    let xs: Vec<f64> = diag
        .iter()
        .zip(&b)
        .map(|(q, bi)| {
            let shrunk = bi.abs() - COMPOSITE_L1;
            if shrunk > 0.0 {
                bi.signum() * shrunk / q
            } else {
                0.0
            }
        })
        .collect();
    let q: Vec<Vec<f64>> = (0..dim)
        .map(|i| (0..dim).map(|j| if i == j { diag[i] } else { 0.0 }).collect())
        .collect();
    let objective = Objective::Composite {
        q,
        b,
        l1_weight: COMPOSITE_L1,
    };
    let fs = objective.value(&xs);
    Ok(ProblemSpec::new(objective, FeasibleSet::whole_space(dim))?.with_reference(fs, Some(xs))?)
}

fn game(a: Vec<Vec<f64>>) -> Result<Instance> {
    let (value, u) = game_value(&a)?;
    let rows = a.len();
    let cols = a[0].len();
    let neg_t: Vec<Vec<f64>> = (0..cols)
        .map(|j| (0..rows).map(|i| -a[i][j]).collect())
        .collect();
    let (_, v) = game_value(&neg_t)?;
    Ok(Instance::Game {
        game: SaddleProblem::matrix_game(a)?,
        value,
        row_strategy: u,
        col_strategy: v,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use inexact_opt::oracle::{max_eigenvalue, min_eigenvalue};

    #[test]
    fn quadratic_spectrum_and_solution() {
        let g = generate_problem(ProblemKind::Quadratic, 10, 7).unwrap();
        let p = g.problem().unwrap();
        let Objective::Quadratic { q, b } = &p.objective else {
            panic!("wrong objective")
        };
        assert!((min_eigenvalue(q) - 0.1).abs() < 1e-10);
        assert!((max_eigenvalue(q) - 10.0).abs() < 1e-10);
        let xs = p.x_star().unwrap();
        let residual: f64 = q
            .iter()
            .zip(b)
            .map(|(row, bi)| (row.iter().zip(xs).map(|(a, x)| a * x).sum::<f64>() - bi).abs())
            .fold(0.0, f64::max);
        assert!(residual < 1e-10);
    }

    #[test]
    fn diagonal_game_reference() {
        let g = generate_problem(ProblemKind::DiagonalGame, 2, 0).unwrap();
        let Instance::Game {
            value,
            row_strategy,
            col_strategy,
            ..
        } = g.instance
        else {
            panic!("not a game")
        };
        assert!((value - 0.5).abs() < 1e-12);
        for s in row_strategy.iter().chain(&col_strategy) {
            assert!((s - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn kind_names_round_trip() {
        for k in ProblemKind::ALL {
            assert_eq!(k.name().parse::<ProblemKind>().unwrap(), k);
            let json = serde_json::to_string(&k).unwrap();
            assert_eq!(json, format!("\"{}\"", k.name()));
        }
        assert!(matches!("cubic".parse::<ProblemKind>(), Err(BenchError::UnknownKind(_))));
    }
}
