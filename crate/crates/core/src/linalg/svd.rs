use alloc::vec::Vec;

use num_complex::Complex64;
// Needed without std; std builds resolve these as inherent methods.
#[allow(unused_imports)]
use num_traits::Float;
use num_traits::Zero;

use super::ComplexMatrix;
use crate::MACHINE_EPS;

const MAX_SWEEPS: usize = 80;

/// Thin singular value decomposition `A = U·diag(s)·Vᴴ`, singular values in
/// descending order.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: ComplexMatrix,
    pub s: Vec<f64>,
    pub v: ComplexMatrix,
}

impl Svd {
    /// One-sided (Hestenes) Jacobi SVD.
    pub fn compute(a: &ComplexMatrix) -> Self {
        if a.rows() < a.cols() {
            let t = Self::compute(&a.adjoint());
            return Self { u: t.v, s: t.s, v: t.u };
        }
        let (m, n) = (a.rows(), a.cols());
        // work column-major: cols[j] is column j of A·V
        let mut cols: Vec<Vec<Complex64>> = (0..n).map(|j| a.column(j)).collect();
        let mut vcols: Vec<Vec<Complex64>> = (0..n)
            .map(|j| {
                let mut e = alloc::vec![Complex64::zero(); n];
                e[j] = Complex64::new(1.0, 0.0);
                e
            })
            .collect();
        let tol = MACHINE_EPS * (m as f64);
        for _ in 0..MAX_SWEEPS {
            let mut rotated = false;
            for p in 0..n {
                for q in p + 1..n {
                    let alpha: f64 = cols[p].iter().map(|z| z.norm_sqr()).sum();
                    let beta: f64 = cols[q].iter().map(|z| z.norm_sqr()).sum();
                    let gamma: Complex64 = cols[p].iter().zip(&cols[q]).map(|(x, y)| x.conj() * y).sum();
                    let g = gamma.norm();
                    if g == 0.0 || g <= tol * (alpha * beta).sqrt() {
                        continue;
                    }
                    rotated = true;
                    let phase = gamma / g;
                    let zeta = (beta - alpha) / (2.0 * g);
                    let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = c * t;
                    rotate(&mut cols, p, q, phase, c, s);
                    rotate(&mut vcols, p, q, phase, c, s);
                }
            }
            if !rotated {
                break;
            }
        }
        let mut order: Vec<(usize, f64)> = cols
            .iter()
            .enumerate()
            .map(|(j, col)| (j, super::norm2(col)))
            .collect();
        order.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(core::cmp::Ordering::Equal).then(a.0.cmp(&b.0)));
        let mut u = ComplexMatrix::zeros(m, n);
        let mut v = ComplexMatrix::zeros(n, n);
        let mut s = Vec::with_capacity(n);
        for (k, &(j, sigma)) in order.iter().enumerate() {
            s.push(sigma);
            for i in 0..m {
                u[(i, k)] = if sigma > 0.0 { cols[j][i] / sigma } else { Complex64::zero() };
            }
            for i in 0..n {
                v[(i, k)] = vcols[j][i];
            }
        }
        Self { u, s, v }
    }

    /// `σ_max / σ_min`, infinite when the smallest singular value is zero.
    pub fn condition_number(&self) -> f64 {
        match (self.s.first(), self.s.last()) {
            (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
            (Some(_), Some(_)) => f64::INFINITY,
            _ => 1.0,
        }
    }

    /// `A⁺ b`, treating singular values below `rcond·σ_max` as zero.
    pub fn solve_least_squares(&self, b: &[Complex64], rcond: f64) -> Vec<Complex64> {
        let cutoff = rcond * self.s.first().copied().unwrap_or(0.0);
        let mut x = alloc::vec![Complex64::zero(); self.v.rows()];
        for (i, &si) in self.s.iter().enumerate() {
            if !(si > cutoff) || si == 0.0 {
                continue;
            }
            let coef: Complex64 = (0..self.u.rows()).map(|k| self.u[(k, i)].conj() * b[k]).sum::<Complex64>() / si;
            for (j, xj) in x.iter_mut().enumerate() {
                *xj += self.v[(j, i)] * coef;
            }
        }
        x
    }
}

fn rotate(cols: &mut [Vec<Complex64>], p: usize, q: usize, phase: Complex64, c: f64, s: f64) {
    let back = phase.conj();
    let (left, right) = cols.split_at_mut(q);
    let (cp, cq) = (&mut left[p], &mut right[0]);
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let yq = *y * back;
        let xp = *x;
        *x = xp * c - yq * s;
        *y = xp * s + yq * c;
    }
}

pub fn singular_values(a: &ComplexMatrix) -> Vec<f64> {
    Svd::compute(a).s
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn reconstruct(svd: &Svd) -> ComplexMatrix {
        let s: Vec<Complex64> = svd.s.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        &(&svd.u * &ComplexMatrix::from_diag(&s)) * &svd.v.adjoint()
    }

    #[test]
    fn reconstructs_tall_and_wide() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for &(m, n) in &[(6, 4), (4, 6), (5, 5), (1, 3)] {
            let a = ComplexMatrix::from_fn(m, n, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
            let svd = Svd::compute(&a);
            assert!(reconstruct(&svd).sub(&a).max_abs() < 1e-13);
            assert!(svd.s.windows(2).all(|w| w[0] >= w[1]));
            let utu = &svd.u.adjoint() * &svd.u;
            assert!(utu.sub(&ComplexMatrix::identity(svd.s.len())).max_abs() < 1e-13);
        }
    }

    #[test]
    fn diagonal_condition_number() {
        let a = ComplexMatrix::from_diag(&[Complex64::new(2.0, 0.0), Complex64::new(0.0, -0.5)]);
        let svd = Svd::compute(&a);
        assert_eq!(svd.s, [2.0, 0.5]);
        assert_eq!(svd.condition_number(), 4.0);
    }
}
