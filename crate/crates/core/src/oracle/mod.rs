//! Inexact model oracles, controlled perturbations and model validation.

mod model;
mod perturb;
mod problem;
mod validate;

pub use model::{composite_model, standard_model, ModelForm, ModelOracle, ModelParams, NoiseSpec};
pub use perturb::{mix64, perturb_gradient, perturb_value, point_seed, unit_from_seed};
pub use problem::{max_eigenvalue, min_eigenvalue, Constraint, Objective, ProblemSpec, ReferenceOptimum};
pub use validate::{validate_model, ModelSide, ValidationReport, Violation, VALIDATION_TOL};
