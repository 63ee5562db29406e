use alloc::vec::Vec;

use num_complex::Complex64;
// Needed without std; std builds resolve these as inherent methods.
#[allow(unused_imports)]
use num_traits::Float;

use super::{singular_threshold, ComplexMatrix};
use crate::{Error, Result};

/// Minimum 2-norm solution of the underdetermined system `A δ = b`
/// (`A` of full row rank, `rows ≤ cols`), i.e. `δ = A†b`.
///
/// Uses the normal equations `A Aᴴ y = b`, `δ = Aᴴ y`, solved by a Hermitian
/// Cholesky factorization, followed by one step of refinement against the
/// residual `b − Aδ`.
pub fn min_norm_solution(a: &ComplexMatrix, b: &[Complex64]) -> Result<Vec<Complex64>> {
    if a.rows() > a.cols() {
        return Err(Error::invalid("min_norm_solution needs rows <= cols"));
    }
    if b.len() != a.rows() {
        return Err(Error::invalid("right-hand side length does not match rows"));
    }
    let ah = a.adjoint();
    let gram = a * &ah;
    let chol = Cholesky::factor(&gram)?;
    let mut delta = ah.mul_vec(&chol.solve(b));
    let ad = a.mul_vec(&delta);
    let resid: Vec<Complex64> = b.iter().zip(&ad).map(|(p, q)| p - q).collect();
    let correction = ah.mul_vec(&chol.solve(&resid));
    for (d, c) in delta.iter_mut().zip(correction) {
        *d += c;
    }
    Ok(delta)
}

/// `G = L Lᴴ` for Hermitian positive definite `G`.
struct Cholesky {
    l: ComplexMatrix,
}

impl Cholesky {
    fn factor(g: &ComplexMatrix) -> Result<Self> {
        let n = g.rows();
        let tol = singular_threshold(g.max_abs());
        let mut l = ComplexMatrix::zeros(n, n);
        for j in 0..n {
            let mut d = g[(j, j)].re;
            for k in 0..j {
                d -= l[(j, k)].norm_sqr();
            }
            if !(d > tol) {
                return Err(Error::Singular {
                    pivot: j,
                    magnitude: d.max(0.0).sqrt(),
                });
            }
            let djj = d.sqrt();
            l[(j, j)] = Complex64::new(djj, 0.0);
            for i in j + 1..n {
                let mut s = g[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)].conj();
                }
                l[(i, j)] = s / djj;
            }
        }
        Ok(Self { l })
    }

    fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        let n = self.l.rows();
        let mut y = b.to_vec();
        for i in 0..n {
            let mut acc = y[i];
            for k in 0..i {
                acc -= self.l[(i, k)] * y[k];
            }
            y[i] = acc / self.l[(i, i)];
        }
        for i in (0..n).rev() {
            let mut acc = y[i];
            for k in i + 1..n {
                acc -= self.l[(k, i)].conj() * y[k];
            }
            y[i] = acc / self.l[(i, i)];
        }
        y
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{norm2, solve_square};
    use num_traits::Zero;
    use alloc::vec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn zero_column_gets_zero_weight() {
        let a = ComplexMatrix::from_row_major(2, 3, vec![c(1.0), c(0.0), c(0.0), c(0.0), c(1.0), c(0.0)]);
        let x = min_norm_solution(&a, &[c(1.0), c(1.0)]).unwrap();
        assert!(norm2(&[x[0] - 1.0, x[1] - 1.0, x[2]]) < 1e-15);
    }

    #[test]
    fn symmetric_row() {
        let a = ComplexMatrix::from_row_major(1, 2, vec![c(1.0), c(1.0)]);
        let x = min_norm_solution(&a, &[c(2.0)]).unwrap();
        assert!((x[0] - 1.0).norm() < 1e-15 && (x[1] - 1.0).norm() < 1e-15);
    }

    #[test]
    fn rank_deficient_rows_rejected() {
        let a = ComplexMatrix::from_row_major(2, 3, vec![c(1.0), c(2.0), c(3.0), c(2.0), c(4.0), c(6.0)]);
        assert!(matches!(min_norm_solution(&a, &[c(1.0), c(2.0)]), Err(Error::Singular { .. })));
    }

    /// Null-space sweep: the minimum-norm solution must be orthogonal to every
    /// null vector and no shifted particular solution may be shorter.
    #[test]
    fn beats_every_shift_along_null_space() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let rand_c = |rng: &mut ChaCha8Rng| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        for _ in 0..10 {
            let a = ComplexMatrix::from_fn(3, 6, |_, _| rand_c(&mut rng));
            let b: Vec<_> = (0..3).map(|_| rand_c(&mut rng)).collect();
            let x = min_norm_solution(&a, &b).unwrap();
            let r: Vec<_> = a.mul_vec(&x).iter().zip(&b).map(|(p, q)| p - q).collect();
            assert!(norm2(&r) < 1e3 * crate::MACHINE_EPS * a.norm_fro() * norm2(&b));

            // particular solution supported on the first three columns
            let basis = a.select(&[0, 1, 2], &[0, 1, 2]);
            let mut xp = solve_square(&basis, &b).unwrap();
            xp.extend([Complex64::zero(); 3]);
            // null basis: e_k for the free coordinates, completed on the basic ones
            let mut null = Vec::new();
            for k in 3..6 {
                let rhs: Vec<_> = (0..3).map(|i| -a[(i, k)]).collect();
                let mut v = solve_square(&basis, &rhs).unwrap();
                v.extend((3..6).map(|j| if j == k { c(1.0) } else { c(0.0) }));
                null.push(v);
            }
            for v in &null {
                let dot: Complex64 = v.iter().zip(&x).map(|(p, q)| p.conj() * q).sum();
                assert!(dot.norm() < 1e-10 * norm2(v) * norm2(&x));
            }
            let best = norm2(&x);
            for _ in 0..200 {
                let t: Vec<_> = (0..3).map(|_| rand_c(&mut rng) * 2.0).collect();
                let cand: Vec<_> = (0..6)
                    .map(|i| xp[i] + (0..3).map(|k| null[k][i] * t[k]).sum::<Complex64>())
                    .collect();
                assert!(best <= norm2(&cand) * (1.0 + 1e-12));
            }
        }
    }
}
