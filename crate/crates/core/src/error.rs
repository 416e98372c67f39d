use std::fmt;

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("coupling g must be positive and finite, got {0}")]
    NonPositiveCoupling(f64),

    #[error("grid needs at least {min} panels, got {got}")]
    TooFewPanels { got: usize, min: usize },

    #[error("quadrature order must lie in {min}..={max}, got {got}")]
    InvalidOrder { got: usize, min: usize, max: usize },

    #[error("invalid grid configuration: {0}")]
    InvalidGrid(String),

    #[error("sampled function and solver use different grids")]
    GridMismatch,

    #[error("sampled values must be finite (first bad node {index})")]
    NonFiniteSample { index: usize },

    #[error("iteration diverged at step {step}: |energy| = {energy:e} exceeds guard {limit:e}")]
    Diverged {
        step: usize,
        energy: f64,
        limit: f64,
    },

    #[error("at least one iteration is required")]
    NoIterations,

    #[error("series needs {need} terms but only {have} are available")]
    InsufficientTerms { need: usize, have: usize },

    #[error("oracle configuration: {0}")]
    OracleConfig(String),

    #[error("f-iteration unstable at step {}: {}", .0.step, .0.kind)]
    Unstable(Instability),
}

/// Where and how the f-iteration broke down.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Instability {
    pub step: usize,
    pub kind: InstabilityKind,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InstabilityKind {
    /// `∫ φ² f_{n−1} ≤ 0`: the energy ratio is meaningless.
    NonPositiveNorm {
        denominator: f64,
    },
    /// `f_n` (hence ψ) changes sign.
    NegativeProfile {
        index: usize,
        x: f64,
        value: f64,
    },
    NonFinite {
        index: usize,
    },
    Diverged {
        energy: f64,
        limit: f64,
    },
}

impl fmt::Display for InstabilityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::NonPositiveNorm { denominator } => {
                write!(f, "weighted norm of f is {denominator:.5e}")
            }
            Self::NegativeProfile { index, x, value } => {
                write!(f, "f = {value:.5e} at node {index} (x = {x:.6})")
            }
            Self::NonFinite { index } => write!(f, "non-finite f at node {index}"),
            Self::Diverged { energy, limit } => {
                write!(f, "|energy| {energy:.5e} above {limit:.5e}")
            }
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
