//! Spectral simulator and verification lab for semilinear parabolic
//! equations with a discrete state-dependent delay.
//!
//! The state space is the truncated sine eigenbasis of the Dirichlet
//! Laplacian on (0, π), where the semigroup and fractional powers act
//! diagonally. On top of it sit:
//!
//! - [`history`]: C¹ history segments on [-h, 0] with Hermite dense output;
//! - [`delay`]: the threshold delay functional and its derivative;
//! - [`nonlinearity`]: the convolution right-hand side F(φ) = B(φ(-r(φ)))
//!   with its Fréchet derivative and Lipschitz-constant ledger;
//! - [`solver`]: windowed Picard iteration with contraction certificates,
//!   plus an independent method-of-steps oracle;
//! - [`manifold`]: the compatibility manifold φ̇(0) + Aφ(0) = F(φ) with
//!   chart-based projection;
//! - [`variational`]: the linearized flow and the finite-difference
//!   derivative check;
//! - [`config`] / [`experiment`] / [`presets`]: batch experiment front end;
//! - [`certify`]: the acceptance suite run by the `certify` preset.

// Validation uses `!(x > 0.0)` so NaN inputs fail closed; index loops over
// per-mode arrays mirror the coefficient arithmetic.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod certify;
pub mod config;
pub mod delay;
pub mod experiment;
pub mod history;
pub mod manifold;
pub mod model;
pub mod nonlinearity;
pub mod presets;
pub mod solver;
pub mod spectral;
pub mod variational;

pub use history::{HistorySegment, SegmentEval};
pub use model::ModelSpec;
pub use solver::{solve, SolveOptions, Trajectory};
pub use spectral::{SpectralField, SpectrumConfig};
