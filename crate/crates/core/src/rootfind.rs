//! Roots of monic complex polynomials (Aberth–Ehrlich) and the inverse
//! map from roots to coefficients.

use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::f64::consts::PI;

use num_complex::Complex64;
// Needed without std; std builds resolve these as inherent methods.
#[allow(unused_imports)]
use num_traits::Float;
use num_traits::{One, Zero};

use crate::{Error, Result};

/// Iteration cap for [`roots`].
pub const MAX_ITERATIONS: usize = 500;

const POLISH_STEPS: usize = 3;

/// `p(z) = zⁿ + c_{n-1} z^{n-1} + … + c_0`, stored as `c_0..c_{n-1}`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MonicPolynomial {
    pub coeffs: Vec<Complex64>,
}

impl MonicPolynomial {
    pub fn new(coeffs: Vec<Complex64>) -> Self {
        Self { coeffs }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len()
    }

    /// Normalizes `a_0 + a_1 z + … + a_n zⁿ` by its leading coefficient.
    pub fn from_general(ascending: &[Complex64]) -> Result<Self> {
        let (lead, rest) = ascending
            .split_last()
            .ok_or_else(|| Error::invalid("empty coefficient list"))?;
        if lead.is_zero() || !lead.norm().is_finite() {
            return Err(Error::Singular {
                pivot: rest.len(),
                magnitude: lead.norm(),
            });
        }
        Ok(Self::new(rest.iter().map(|c| c / lead).collect()))
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        eval(self, z)
    }

    /// `(p(z), p'(z))` by Horner.
    pub fn eval_with_derivative(&self, z: Complex64) -> (Complex64, Complex64) {
        let mut p = Complex64::one();
        let mut dp = Complex64::zero();
        for c in self.coeffs.iter().rev() {
            dp = dp * z + p;
            p = p * z + c;
        }
        (p, dp)
    }

    /// `Σ |c_k| |z|^k` including the leading 1; scale of the evaluation error.
    pub fn abs_eval(&self, r: f64) -> f64 {
        self.coeffs.iter().rev().fold(1.0, |acc, c| acc * r + c.norm())
    }

    pub fn max_coeff(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }
}

/// Horner evaluation.
pub fn eval(p: &MonicPolynomial, z: Complex64) -> Complex64 {
    p.coeffs.iter().rev().fold(Complex64::one(), |acc, c| acc * z + c)
}

fn lex(a: &Complex64, b: &Complex64) -> Ordering {
    a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im))
}

/// Sorts by `(re, im)`.
pub fn sort_lex(values: &mut [Complex64]) {
    values.sort_by(lex);
}

/// Monic polynomial `∏ (z − r_j)`; the roots are sorted first so the result
/// does not depend on their order.
pub fn coeffs_from_roots(roots: &[Complex64]) -> MonicPolynomial {
    let mut sorted = roots.to_vec();
    sort_lex(&mut sorted);
    // ascending coefficients including the leading one
    let mut c = vec![Complex64::one()];
    for r in &sorted {
        let mut next = vec![Complex64::zero(); c.len() + 1];
        for (k, ck) in c.iter().enumerate() {
            next[k + 1] += ck;
            next[k] -= ck * r;
        }
        c = next;
    }
    c.pop();
    MonicPolynomial::new(c)
}

/// All roots with multiplicity, sorted by `(re, im)`.
///
/// An iterate is accepted once `|p(z)|` is within a small multiple of the
/// Horner rounding bound or the Aberth correction stalls at the unit
/// roundoff of `z`.
pub fn roots(p: &MonicPolynomial) -> Result<Vec<Complex64>> {
    let n = p.degree();
    if n == 0 {
        return Err(Error::invalid("polynomial degree must be at least 1"));
    }
    if p.coeffs.iter().any(|c| !(c.re.is_finite() && c.im.is_finite())) {
        return Err(Error::invalid("non-finite polynomial coefficient"));
    }
    if n == 1 {
        return Ok(vec![-p.coeffs[0]]);
    }
    let eps = f64::EPSILON;
    let radius = 1.0 + p.max_coeff();
    let mut z: Vec<Complex64> = (0..n)
        .map(|k| Complex64::from_polar(radius, 2.0 * PI * k as f64 / n as f64 + 0.4))
        .collect();
    let mut done = vec![false; n];
    let mut residuals = vec![f64::INFINITY; n];

    for _ in 0..MAX_ITERATIONS {
        for k in 0..n {
            if done[k] {
                continue;
            }
            let (val, der) = p.eval_with_derivative(z[k]);
            let bound = 4.0 * n as f64 * eps * p.abs_eval(z[k].norm());
            residuals[k] = val.norm();
            if val.norm() <= bound {
                done[k] = true;
                continue;
            }
            let w = val / der;
            let s: Complex64 = (0..n)
                .filter(|&j| j != k)
                .map(|j| (z[k] - z[j]).inv())
                .sum();
            let step = w / (Complex64::one() - w * s);
            if !(step.re.is_finite() && step.im.is_finite()) {
                // derivative vanished or roots coincide: nudge off the spot
                let nudge = Complex64::new(eps.sqrt(), eps.sqrt()) * z[k].norm().max(1.0);
                z[k] += nudge;
                continue;
            }
            z[k] -= step;
            if step.norm() <= 1e2 * eps * z[k].norm().max(1.0) {
                residuals[k] = p.eval(z[k]).norm();
                done[k] = true;
            }
        }
        if done.iter().all(|&d| d) {
            for zk in z.iter_mut() {
                polish(p, zk);
            }
            sort_lex(&mut z);
            return Ok(z);
        }
    }
    for k in 0..n {
        residuals[k] = p.eval(z[k]).norm();
    }
    Err(Error::NoConvergence {
        iterations: MAX_ITERATIONS,
        best: z,
        residuals,
    })
}

/// Newton steps on the compensated residual, each kept only if it lowers
/// `|p|`. Roots frozen at the plain rounding level still carry a forward
/// error of roughly `eps·scale/|p′|`, which is large next to a close
/// neighbour; the doubled-precision residual removes it.
fn polish(p: &MonicPolynomial, z: &mut Complex64) {
    let mut val = eval_compensated(p, *z);
    for _ in 0..POLISH_STEPS {
        if val.is_zero() {
            return;
        }
        let (_, d) = p.eval_with_derivative(*z);
        let cand = *z - val / d;
        if !(cand.re.is_finite() && cand.im.is_finite()) {
            return;
        }
        let cv = eval_compensated(p, cand);
        if cv.norm() >= val.norm() {
            return;
        }
        *z = cand;
        val = cv;
    }
}

/// `p(z)` by Horner's rule carried in double-double arithmetic, rounded
/// once at the end.
pub fn eval_compensated(p: &MonicPolynomial, z: Complex64) -> Complex64 {
    let mut hi = Complex64::one();
    let mut lo = Complex64::zero();
    for c in p.coeffs.iter().rev() {
        // (hi + lo)·z with the error of hi·z captured exactly
        let (rr1, er1) = two_prod(hi.re, z.re);
        let (rr2, er2) = two_prod(hi.im, z.im);
        let (ri1, ei1) = two_prod(hi.re, z.im);
        let (ri2, ei2) = two_prod(hi.im, z.re);
        let (re, e_re) = two_sum(rr1, -rr2);
        let (im, e_im) = two_sum(ri1, ri2);
        let tail = lo * z;
        let mut lo_re = er1 - er2 + e_re + tail.re;
        let mut lo_im = ei1 + ei2 + e_im + tail.im;
        let (re, e1) = two_sum(re, c.re);
        let (im, e2) = two_sum(im, c.im);
        lo_re += e1;
        lo_im += e2;
        let (h_re, l_re) = two_sum(re, lo_re);
        let (h_im, l_im) = two_sum(im, lo_im);
        hi = Complex64::new(h_re, h_im);
        lo = Complex64::new(l_re, l_im);
    }
    hi + lo
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn split(a: f64) -> (f64, f64) {
    let t = 134_217_729.0 * a;
    let hi = t - (t - a);
    (hi, a - hi)
}

/// Dekker's exact product: `a·b = p + e`.
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    let (ah, al) = split(a);
    let (bh, bl) = split(b);
    (p, ((ah * bh - p) + ah * bl + al * bh) + al * bl)
}
