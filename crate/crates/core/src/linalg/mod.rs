//! Small dense complex linear algebra.
//!
//! Everything here targets matrices of dimension at most a few hundred
//! (Matrix Pencil blocks) and usually below ten (Hankel systems, compounds),
//! so plain row-major storage and textbook algorithms are used throughout.

mod compound;
mod lstsq;
mod matrix;
mod solve;
mod structured;
mod svd;

pub use compound::{compound, higher_adjugate, index_sequences, IndexSequence};
pub use lstsq::min_norm_solution;
pub use matrix::{max_abs, norm2, ComplexMatrix};
pub use solve::{det, solve_square, Lu};
pub use structured::{
    derivative_vandermonde, hankel, hankel_from, vandermonde, vandermonde_factorization_check,
};
pub(crate) use structured::powers;
pub use svd::{singular_values, Svd};

use crate::MACHINE_EPS;

/// Relative pivot threshold: a pivot below `SINGULAR_FACTOR · ε_M · scale`
/// is treated as exactly zero.
pub const SINGULAR_FACTOR: f64 = 1e2;

pub(crate) fn singular_threshold(scale: f64) -> f64 {
    SINGULAR_FACTOR * MACHINE_EPS * scale
}
