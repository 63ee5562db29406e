use alloc::vec::Vec;

use num_complex::Complex64;
use num_traits::{One, Zero};

use super::{singular_threshold, ComplexMatrix};
use crate::{Error, Result};

/// LU factorization with partial (row) pivoting, `P·A = L·U`.
///
/// Factoring never fails; singularity is judged when solving, against
/// `1e2·ε_M·max|A_ij|`.
#[derive(Debug, Clone)]
pub struct Lu {
    lu: ComplexMatrix,
    perm: Vec<usize>,
    swaps: usize,
    scale: f64,
}

impl Lu {
    pub fn factor(a: &ComplexMatrix) -> Self {
        assert!(a.is_square(), "LU needs a square matrix");
        let n = a.rows();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut swaps = 0;
        for k in 0..n {
            let (p, _) = (k..n)
                .map(|i| (i, lu[(i, k)].norm()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if p != k {
                for j in 0..n {
                    let tmp = lu[(k, j)];
                    lu[(k, j)] = lu[(p, j)];
                    lu[(p, j)] = tmp;
                }
                perm.swap(k, p);
                swaps += 1;
            }
            let pivot = lu[(k, k)];
            if pivot.is_zero() {
                continue;
            }
            for i in k + 1..n {
                let factor = lu[(i, k)] / pivot;
                lu[(i, k)] = factor;
                if factor.is_zero() {
                    continue;
                }
                for j in k + 1..n {
                    let u = lu[(k, j)];
                    lu[(i, j)] -= factor * u;
                }
            }
        }
        Self {
            lu,
            perm,
            swaps,
            scale: a.max_abs(),
        }
    }

    pub fn dim(&self) -> usize {
        self.lu.rows()
    }

    pub fn det(&self) -> Complex64 {
        let n = self.dim();
        let prod = (0..n).fold(Complex64::one(), |acc, i| acc * self.lu[(i, i)]);
        if self.swaps % 2 == 1 {
            -prod
        } else {
            prod
        }
    }

    /// Index and modulus of the first pivot under the singularity threshold.
    pub fn first_small_pivot(&self) -> Option<(usize, f64)> {
        let tol = singular_threshold(self.scale);
        (0..self.dim())
            .map(|i| (i, self.lu[(i, i)].norm()))
            .find(|&(_, m)| m <= tol || !m.is_finite())
    }

    pub fn solve(&self, b: &[Complex64]) -> Result<Vec<Complex64>> {
        let n = self.dim();
        if b.len() != n {
            return Err(Error::invalid("right-hand side length does not match matrix"));
        }
        if let Some((pivot, magnitude)) = self.first_small_pivot() {
            return Err(Error::Singular { pivot, magnitude });
        }
        let mut x: Vec<Complex64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut acc = x[i];
            for j in 0..i {
                acc -= self.lu[(i, j)] * x[j];
            }
            x[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = x[i];
            for j in i + 1..n {
                acc -= self.lu[(i, j)] * x[j];
            }
            x[i] = acc / self.lu[(i, i)];
        }
        Ok(x)
    }
}

/// Solves `A x = b` by partially pivoted elimination.
pub fn solve_square(a: &ComplexMatrix, b: &[Complex64]) -> Result<Vec<Complex64>> {
    if !a.is_square() {
        return Err(Error::invalid("solve_square needs a square matrix"));
    }
    Lu::factor(a).solve(b)
}

/// Determinant by pivoted elimination; `det` of a 0×0 matrix is 1.
pub fn det(a: &ComplexMatrix) -> Complex64 {
    assert!(a.is_square(), "determinant needs a square matrix");
    match a.rows() {
        0 => Complex64::one(),
        1 => a[(0, 0)],
        2 => a[(0, 0)] * a[(1, 1)] - a[(0, 1)] * a[(1, 0)],
        _ => Lu::factor(a).det(),
    }
}
