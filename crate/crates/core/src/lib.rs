//! Ground state of the one-dimensional double well
//! `V(x) = ½ g² (x² − 1)²` by Green-function iteration.
//!
//! * [`model`]: trial functions and perturbation potentials.
//! * [`quad`]: composite Gauss–Legendre grid and log-stabilised sweeps.
//! * [`tau_iter`], [`f_iter`]: the two iteration schemes.
//! * [`asymptotic`]: exact 1/g series and its optimal truncation.
//! * [`oracle`]: finite-difference reference eigensolver.
//! * [`tables`]: the benchmark tables in double precision.
//!
//! Numerical code is generic over [`Real`]; the aliases below fix `f64`.

// `!(x > 0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotic;
pub mod error;
pub mod f_iter;
pub mod model;
pub mod oracle;
pub mod quad;
pub mod scalar;
pub mod tables;
pub mod tau_iter;

pub use asymptotic::{BetaPyramid, BetaRow, EpsilonSeries, PlateauCriterion, PlateauReport};
pub use error::{Error, Instability, InstabilityKind, Result};
pub use f_iter::{FRun, FState};
pub use model::{ConditionReport, ModelParams, State};
pub use oracle::{OracleConfig, Parity};
pub use quad::{Grid, GridOptions, SampledFunction, WeightedGrid};
pub use scalar::Real;
pub use tau_iter::{IterationTrace, Scheme, SolveOptions};

pub type Params = ModelParams<f64>;
pub type Grid64 = Grid<f64>;
pub type WeightedGrid64 = WeightedGrid<f64>;
pub type Sampled64 = SampledFunction<f64>;
pub type Trace64 = IterationTrace<f64>;
pub type FRun64 = FRun<f64>;
pub type Conditions64 = ConditionReport<f64>;
pub type Oracle64 = OracleConfig<f64>;
pub type Plateau64 = PlateauReport<f64>;
