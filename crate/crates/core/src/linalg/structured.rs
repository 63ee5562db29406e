use alloc::vec::Vec;

use num_complex::Complex64;
use num_traits::One;

use super::ComplexMatrix;
use crate::model::Signal;
use crate::{Error, Result};

/// `rows × cols` Hankel matrix with entry `(i, j) = values[offset + i + j]`.
pub fn hankel(values: &[Complex64], offset: usize, rows: usize, cols: usize) -> Result<ComplexMatrix> {
    if rows == 0 || cols == 0 {
        return Ok(ComplexMatrix::zeros(rows, cols));
    }
    if values.len() < offset + rows + cols - 1 {
        return Err(Error::invalid("not enough samples for the requested Hankel block"));
    }
    Ok(ComplexMatrix::from_fn(rows, cols, |i, j| values[offset + i + j]))
}

/// The square Hankel matrix `Hₙ = [m_{i+j}]`, `0 ≤ i, j < n`.
pub fn hankel_from(moments: impl AsRef<[Complex64]>, n: usize) -> Result<ComplexMatrix> {
    let m = moments.as_ref();
    if n == 0 {
        return Err(Error::invalid("Hankel order must be positive"));
    }
    if m.len() < 2 * n - 1 {
        return Err(Error::invalid("Hankel matrix of order n needs 2n-1 moments"));
    }
    hankel(m, 0, n, n)
}

/// `V = [x_j^k]` with `k = 0..rows` down the rows and one column per node.
pub fn vandermonde(nodes: &[Complex64], rows: usize) -> ComplexMatrix {
    let mut v = ComplexMatrix::zeros(rows, nodes.len());
    for (j, &x) in nodes.iter().enumerate() {
        let mut p = Complex64::one();
        for k in 0..rows {
            v[(k, j)] = p;
            p *= x;
        }
    }
    v
}

/// Derivative block of the confluent Vandermonde matrix, `[k·x_j^{k-1}]`.
pub fn derivative_vandermonde(nodes: &[Complex64], rows: usize) -> ComplexMatrix {
    let mut v = ComplexMatrix::zeros(rows, nodes.len());
    for (j, &x) in nodes.iter().enumerate() {
        let mut p = Complex64::one();
        for k in 1..rows {
            v[(k, j)] = p * k as f64;
            p *= x;
        }
    }
    v
}

/// `‖Hₙ − V·diag(α)·Vᵀ‖_max` for the signal's exact moments.
pub fn vandermonde_factorization_check(signal: &Signal) -> f64 {
    let n = signal.n();
    let moments = signal.moments(2 * n - 1);
    let h = hankel(moments.as_ref(), 0, n, n).expect("2n-1 moments are available");
    let v = vandermonde(&signal.nodes, n);
    let c = ComplexMatrix::from_diag(&signal.amplitudes);
    let vcvt = &(&v * &c) * &v.transpose();
    h.sub(&vcvt).max_abs()
}

/// `[1, z, …, z^{count−1}]`.
pub(crate) fn powers(z: Complex64, count: usize) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(count);
    let mut p = Complex64::one();
    for _ in 0..count {
        out.push(p);
        p *= z;
    }
    out
}
