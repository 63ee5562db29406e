//! Prony-type recovery of exponential sums `m_k = Σ α_j x_j^k` from noisy
//! moments, together with the tooling needed to study its accuracy on
//! clustered node configurations:
//!
//! * [`model`]: clustered signals, moments and bounded noise.
//! * [`linalg`]: small dense complex linear algebra (Hankel/Vandermonde,
//!   pivoted elimination, minimum-norm solves, Jacobi SVD, compound matrices
//!   and higher adjugates).
//! * [`rootfind`]: Aberth–Ehrlich roots of monic polynomials.
//! * [`recovery`]: classical and homogeneous Prony, amplitude solve,
//!   projection and node matching.
//! * [`decimation`] and [`pencil`]: decimated Prony and Matrix Pencil.
//! * [`backward`]: structured backward errors of the three Prony steps.
//! * [`theory`]: numerical verifiers for the ε-expansion of the homogeneous
//!   Prony polynomial, first-order node error constants and the cluster
//!   discrepancy.
//!
//! The crate is `no_std` and only needs `alloc`.
#![no_std]
#![warn(missing_debug_implementations, rust_2018_idioms)]
// `!(a > b)` is the NaN-rejecting form; index loops mirror the formulas.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod backward;
pub mod decimation;
mod error;
pub mod linalg;
pub mod model;
pub mod pencil;
pub mod recovery;
pub mod rootfind;
pub mod theory;

pub use error::{Error, Result};
pub use num_complex::Complex64;

/// Double-precision unit roundoff used by all thresholds in this crate.
pub const MACHINE_EPS: f64 = f64::EPSILON;
