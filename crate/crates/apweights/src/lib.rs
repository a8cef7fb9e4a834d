//! Numerical laboratory for matrix Muckenhoupt weights.
//!
//! A matrix weight is an a.e. invertible, locally integrable function
//! `W : R^n -> M_m(C)` taking nonnegative definite Hermitian values. This
//! crate computes, entirely in finite precision and over finite families of
//! cubes, the quantities that organize the theory of such weights:
//!
//! * reducing operators `A_Q` of order `p` on a cube `Q`, with certified
//!   two-sided equivalence constants (`reducing`),
//! * the `A_p` and `A_{p,∞}` characteristics, scalar Fujii-Wilson constants,
//!   and the web of equivalent conditions relating them (`characteristics`),
//! * reverse Hölder exponents and factor-2 inequalities at the computed
//!   endpoint (`characteristics::reverse_holder_check`),
//! * weight dimensions (growth exponents of cube-pair quantities) together
//!   with sharpness experiments (`dimensions`).
//!
//! All suprema over cubes are maxima over an explicit probe family, so every
//! reported characteristic is a certified lower bound of the corresponding
//! supremum. Reports state this. Randomness (probe jitter, direction
//! sampling, trial functions) flows from a single seed through counter-mode
//! generators, so identical configurations produce identical reports.

// Guards of the form `!(x > 0.0)` are deliberate: they reject NaN along
// with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod characteristics;
pub mod cli;
pub mod config;
pub mod dimensions;
pub mod error;
pub mod geometry;
pub mod linalg;
pub mod quadrature;
pub mod reducing;
pub mod report;
pub mod rng;
pub mod weights;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
