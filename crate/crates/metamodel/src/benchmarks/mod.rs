//! Reproducible test models bundled with their input models: the analytical
//! beam-deflection function, a configurable linear truss solved by the
//! direct stiffness method, and a random-field functional built on an EOLE
//! discretization.

mod beam;
mod eole;
mod truss;

pub use beam::{beam_deflection, beam_input_model};
pub use eole::{eole_build, EoleField, GridSpec};
pub use truss::{truss_input_model, TrussGeometry, TrussProblem};

use thiserror::Error;

use crate::input::{InputError, InputModel};

#[derive(Debug, Error)]
pub enum BenchmarkError {
    #[error("input {index} must be strictly positive, got {value}")]
    NonPositiveInput { index: usize, value: f64 },
    #[error("expected {expected} inputs, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("stiffness matrix is singular; the structure is a mechanism")]
    SingularStiffness,
    #[error("truss geometry: {0}")]
    BadGeometry(String),
    #[error("correlation matrix is not positive semi-definite (eigenvalue {0})")]
    NotPsd(f64),
    #[error("trace fraction must lie in (0, 1], got {0}")]
    BadTraceFraction(f64),
    #[error(transparent)]
    Input(#[from] InputError),
    #[error("model response is not finite")]
    NonFiniteResponse,
}

/// A named benchmark: its evaluator plus the probabilistic input model the
/// surrogates are built against.
pub enum Benchmark {
    Beam,
    Truss(TrussProblem),
    EoleField(EoleField),
}

impl Benchmark {
    pub fn names() -> &'static [&'static str] {
        &["beam", "truss", "eole-field"]
    }

    /// Resolves a registered benchmark by name with its default setup.
    pub fn by_name(name: &str) -> Option<Result<Benchmark, BenchmarkError>> {
        match name {
            "beam" => Some(Ok(Benchmark::Beam)),
            "truss" => Some(Ok(Benchmark::Truss(TrussProblem::default()))),
            "eole-field" => Some(eole::default_field().map(Benchmark::EoleField)),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Benchmark::Beam => "beam",
            Benchmark::Truss(_) => "truss",
            Benchmark::EoleField(_) => "eole-field",
        }
    }

    pub fn dimension(&self) -> usize {
        match self {
            Benchmark::Beam => 5,
            Benchmark::Truss(_) => 10,
            Benchmark::EoleField(field) => field.retained(),
        }
    }

    pub fn input_model(&self) -> Result<InputModel, BenchmarkError> {
        match self {
            Benchmark::Beam => Ok(beam_input_model()?),
            Benchmark::Truss(_) => Ok(truss_input_model()?),
            Benchmark::EoleField(field) => Ok(field.input_model()?),
        }
    }

    /// Evaluates the model at one physical-space point.
    pub fn evaluate(&self, x: &[f64]) -> Result<f64, BenchmarkError> {
        let value = match self {
            Benchmark::Beam => beam_deflection(x)?,
            Benchmark::Truss(problem) => problem.deflection(x)?,
            Benchmark::EoleField(field) => field.functional(x)?,
        };
        if !value.is_finite() {
            return Err(BenchmarkError::NonFiniteResponse);
        }
        Ok(value)
    }

    /// Evaluates the model over design rows.
    pub fn evaluate_batch(
        &self,
        points: &nalgebra::DMatrix<f64>,
    ) -> Result<Vec<f64>, BenchmarkError> {
        let mut out = Vec::with_capacity(points.nrows());
        let mut x = vec![0.0; points.ncols()];
        for i in 0..points.nrows() {
            for j in 0..points.ncols() {
                x[j] = points[(i, j)];
            }
            out.push(self.evaluate(&x)?);
        }
        Ok(out)
    }
}
