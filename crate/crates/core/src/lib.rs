//! Numerical laboratory for critical Markov branching processes with
//! immigration under heavy-tailed offspring and immigration laws.
//!
//! The process is driven by the infinitesimal generating functions
//! `f(s) = (1-s)^{1+ν} 𝓛(1/(1-s))` and `g(s) = -(1-s)^δ ℓ(1/(1-s))`.
//! The crate computes the transition generating functions, the limit
//! generating functions of the invariant measures (`U` when `γ = δ - ν > 0`,
//! `π` and `ℬ` when `γ < 0`), power-series coefficients by circle sampling,
//! and measured convergence rates. An exact event-driven simulator provides
//! an independent check on the kernel.
//!
//! Module map:
//! - [`laws`]: offspring and immigration intensity families, validation, evaluation
//! - [`rvcalc`]: slowly varying specs, `Λ`, `𝒩`, `τ`, `T`, `𝓜`, remainder checks
//! - [`kernel`]: `F(t;s)`, `𝒫_i(t;s)` and transition probabilities
//! - [`invariants`]: `U`, `ℬ`, `π`, coefficient extraction, invariance, ratio limits
//! - [`asymptotics`]: rate fits and auxiliary-identity verifiers
//! - [`sim`]: exact Monte Carlo with reproducible per-replicate streams

// `!(x > 0.0)` rejects NaN along with the out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod inversion;
pub mod invariants;
pub mod kernel;
pub mod laws;
pub mod ode;
pub mod quad;
pub mod rvcalc;
pub mod sim;
pub mod textfmt;

pub use num_complex::Complex64;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("{what} = {value} is outside the admissible domain")]
    Domain { what: &'static str, value: f64 },
    #[error("negative intensity a_{index} = {value:e} after truncation")]
    NegativeCoefficient { index: usize, value: f64 },
    #[error("law failed validation: {0}")]
    Validation(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("no convergence: {0}")]
    NoConvergence(String),
    #[error("coefficient inversion: {0}")]
    Inversion(String),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Quadrature(#[from] quad::QuadError),
    #[error(transparent)]
    Ode(#[from] ode::OdeError),
}

impl Error {
    /// Errors a caller can fix by changing the model or task parameters,
    /// as opposed to numerical failures.
    pub fn is_precondition(&self) -> bool {
        matches!(
            self,
            Error::Precondition(_)
                | Error::Domain { .. }
                | Error::InvalidParameter(_)
                | Error::NegativeCoefficient { .. }
                | Error::Validation(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
