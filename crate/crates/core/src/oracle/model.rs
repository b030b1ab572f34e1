use serde::{Deserialize, Serialize};

use super::perturb::{perturb_gradient, perturb_value, point_seed};
use super::problem::ProblemSpec;
use crate::error::{Error, Result};
use crate::geometry::{LocalModel, Norm};

/// Declared model constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Additive value error.
    pub value_error: f64,
    /// Gradient error radius.
    pub gradient_error: f64,
    pub smoothness: f64,
    #[serde(default)]
    pub strong_convexity: f64,
}

impl ModelParams {
    pub fn new(value_error: f64, gradient_error: f64, smoothness: f64, strong_convexity: f64) -> Result<Self> {
        let p = ModelParams {
            value_error,
            gradient_error,
            smoothness,
            strong_convexity,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.value_error, self.gradient_error, self.smoothness, self.strong_convexity];
        if all.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidParameter(format!("model constants must be finite and nonnegative: {self:?}")));
        }
        if self.smoothness <= 0.0 {
            return Err(Error::InvalidParameter("smoothness constant must be positive".into()));
        }
        if self.strong_convexity > self.smoothness {
            return Err(Error::InvalidParameter("strong convexity exceeds smoothness".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelForm {
    /// `<grad f(x), y - x>`
    #[default]
    Standard,
    /// `<grad g(x), y - x> + h(y) - h(x)` for `f = g + h`.
    Composite,
}

/// Injected inexactness.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NoiseSpec {
    #[serde(default)]
    pub value_error: f64,
    #[serde(default)]
    pub gradient_error: f64,
    #[serde(default)]
    pub seed: u64,
}

/// Evaluator for `f_delta` and the model `psi(., x)` of a problem.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelOracle {
    pub problem: ProblemSpec,
    pub form: ModelForm,
    pub noise: NoiseSpec,
    /// Norm whose dual ball bounds the gradient error.
    pub norm: Norm,
    pub params: ModelParams,
}

impl ModelOracle {
    pub fn exact(problem: ProblemSpec, params: ModelParams) -> Self {
        ModelOracle {
            problem,
            form: ModelForm::Standard,
            noise: NoiseSpec::default(),
            norm: Norm::L2,
            params,
        }
    }

    pub fn with_noise(mut self, noise: NoiseSpec) -> Self {
        self.noise = noise;
        self
    }

    pub fn with_form(mut self, form: ModelForm) -> Self {
        self.form = form;
        self
    }

    pub fn with_norm(mut self, norm: Norm) -> Self {
        self.norm = norm;
        self
    }

    pub fn dim(&self) -> usize {
        self.problem.dim()
    }

    pub fn exact_value(&self, x: &[f64]) -> f64 {
        self.problem.value(x)
    }

    /// `f_delta(x)` in `[f(x) - delta, f(x)]`.
    pub fn value(&self, x: &[f64]) -> f64 {
        let seed = point_seed(self.noise.seed ^ 0x005E_ED0F_F00D, x);
        perturb_value(self.problem.value(x), self.noise.value_error, seed)
    }

    /// Model `psi(., x)` with the perturbed gradient.
    pub fn local_model(&self, x: &[f64]) -> LocalModel {
        let seed = point_seed(self.noise.seed, x);
        match self.form {
            ModelForm::Standard => {
                let g = self.problem.objective.subgradient(x);
                let g = perturb_gradient(&g, self.noise.gradient_error, seed, self.norm);
                LocalModel::linear(x.to_vec(), g)
            }
            ModelForm::Composite => {
                let (g, w) = self.problem.objective.split_gradient(x);
                let g = perturb_gradient(&g, self.noise.gradient_error, seed, self.norm);
                LocalModel::composite(x.to_vec(), g, w)
            }
        }
    }

    pub fn model_value(&self, y: &[f64], x: &[f64]) -> f64 {
        self.local_model(x).eval(y)
    }
}

/// `psi(y, x) = <grad f(x), y - x>` with the exact subgradient.
pub fn standard_model(problem: &ProblemSpec, x: &[f64]) -> LocalModel {
    LocalModel::linear(x.to_vec(), problem.objective.subgradient(x))
}

/// `psi(y, x) = <grad~ g(x), y - x> + h(y) - h(x)` with `|grad~ g - grad g|_2 = gradient_error`.
pub fn composite_model(problem: &ProblemSpec, x: &[f64], gradient_error: f64, seed: u64) -> LocalModel {
    let (g, w) = problem.objective.split_gradient(x);
    let g = perturb_gradient(&g, gradient_error, point_seed(seed, x), Norm::L2);
    LocalModel::composite(x.to_vec(), g, w)
}
