//! Structured backward errors of the three numerical steps of classical
//! Prony: the Hankel solve (`berr1`), root finding (`berr2`) and the
//! Vandermonde amplitude solve (`berr3`).
//!
//! `berr1` and `berr3` are reported as the ∞-norm of the minimum 2-norm
//! perturbation; the exact ∞-norm minimizer can only be smaller.

use alloc::format;
use alloc::vec::Vec;

use num_complex::Complex64;
use num_traits::{One, Zero};

use crate::linalg::{derivative_vandermonde, hankel, max_abs, min_norm_solution, vandermonde, ComplexMatrix, Svd};
use crate::model::MomentVector;
use crate::recovery::RecoveryResult;
use crate::rootfind::coeffs_from_roots;
use crate::{Error, Result, MACHINE_EPS};

/// Hankel-step backward error with its witness `m̂ = m̃ + δ`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Berr1 {
    pub value: f64,
    pub certificate: Vec<Complex64>,
    /// `‖H(m̂[0:2n−2]) q° + m̂[n:2n−1]‖∞`.
    pub certificate_residual: f64,
    /// Scale against which the certificate residual is judged.
    pub certificate_scale: f64,
    /// `‖Cₙ(q°)†‖₂`.
    pub cn_pinv_norm: f64,
}

/// Vandermonde-step backward error and its three components.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Berr3 {
    pub value: f64,
    pub delta1: Vec<Complex64>,
    pub delta2: Vec<Complex64>,
    pub delta2_prime: Vec<Complex64>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BackwardErrorReport {
    pub berr1: f64,
    pub berr1_certificate: Vec<Complex64>,
    pub berr1_certificate_residual: f64,
    pub berr1_certificate_scale: f64,
    pub cn_pinv_norm: f64,
    pub berr2: f64,
    pub berr3: f64,
    /// `[berr1, berr2, berr3] / machine epsilon`.
    pub machine_eps_ratio: [f64; 3],
}

impl BackwardErrorReport {
    /// True when all three errors are at most `factor · eps` and the
    /// certificate residual is at most `factor · eps · scale`.
    pub fn within(&self, factor: f64) -> bool {
        let bound = factor * MACHINE_EPS;
        self.berr1 <= bound
            && self.berr2 <= bound
            && self.berr3 <= bound
            && self.berr1_certificate_residual <= bound * self.berr1_certificate_scale
    }
}

/// The `n × 2n` banded matrix with rows `[0… q_0 … q_{n−1} 1 …0]`.
pub fn cn_matrix(q: &[Complex64]) -> ComplexMatrix {
    let n = q.len();
    ComplexMatrix::from_fn(n, 2 * n, |i, j| {
        if j < i || j > i + n {
            Complex64::zero()
        } else if j == i + n {
            Complex64::one()
        } else {
            q[j - i]
        }
    })
}

/// `m[n:2n−1] + H(m[0:2n−2])·q`.
pub fn hankel_residual(q: &[Complex64], m: &[Complex64]) -> Result<Vec<Complex64>> {
    let n = q.len();
    if m.len() < 2 * n {
        return Err(Error::invalid(format!("need {} moments, got {}", 2 * n, m.len())));
    }
    let h = hankel(m, 0, n, n)?;
    let hq = h.mul_vec(q);
    Ok(hq.iter().zip(&m[n..2 * n]).map(|(a, b)| a + b).collect())
}

/// Minimum-norm `δ` with `Cₙ(q°) δ = −r`, so that `m̂ = m̃ + δ` satisfies
/// the Hankel equation for `q°` exactly.
pub fn berr1(q: &[Complex64], m: &MomentVector) -> Result<Berr1> {
    let n = q.len();
    if n == 0 {
        return Err(Error::invalid("empty coefficient vector"));
    }
    let window = &m.values[..(2 * n).min(m.len())];
    let r = hankel_residual(q, window)?;
    let c = cn_matrix(q);
    let rhs: Vec<Complex64> = r.iter().map(|v| -v).collect();
    let delta = min_norm_solution(&c, &rhs).map_err(|e| Error::Estimator(format!("berr1: {e}")))?;
    let certificate: Vec<Complex64> = window.iter().zip(&delta).map(|(a, b)| a + b).collect();
    let certificate_residual = max_abs(&hankel_residual(q, &certificate)?);
    let q_l1: f64 = q.iter().map(|v| v.norm()).sum();
    let certificate_scale = max_abs(&certificate) * (1.0 + q_l1);
    let s = Svd::compute(&c).s;
    let cn_pinv_norm = 1.0 / s[n - 1];
    Ok(Berr1 {
        value: max_abs(&delta),
        certificate,
        certificate_residual,
        certificate_scale,
        cn_pinv_norm,
    })
}

/// `‖q° − coeffs_from_roots(roots°)‖∞`.
pub fn berr2(roots: &[Complex64], q: &[Complex64]) -> Result<f64> {
    if roots.len() != q.len() {
        return Err(Error::invalid("root count must equal polynomial degree"));
    }
    let qhat = coeffs_from_roots(roots);
    Ok(q.iter().zip(&qhat.coeffs).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max))
}

/// Linearized backward error of the square Vandermonde solve plus the
/// resulting actual right-hand-side perturbation.
pub fn berr3(alpha: &[Complex64], m_head: &[Complex64], nodes: &[Complex64]) -> Result<Berr3> {
    let n = nodes.len();
    if alpha.len() != n || m_head.len() < n || n == 0 {
        return Err(Error::invalid("berr3 needs n nodes, n amplitudes and n moments"));
    }
    let m_head = &m_head[..n];
    let v = vandermonde(nodes, n);
    let dv = derivative_vandermonde(nodes, n);
    let r: Vec<Complex64> = v.mul_vec(alpha).iter().zip(m_head).map(|(va, m)| m - va).collect();
    let u = ComplexMatrix::from_fn(n, 2 * n, |i, j| {
        if j < n {
            dv[(i, j)] * alpha[j]
        } else if j - n == i {
            -Complex64::one()
        } else {
            Complex64::zero()
        }
    });
    let sol = min_norm_solution(&u, &r).map_err(|e| Error::Estimator(format!("berr3: {e}")))?;
    let delta1 = sol[..n].to_vec();
    let delta2 = sol[n..].to_vec();
    let shifted: Vec<Complex64> = nodes.iter().zip(&delta1).map(|(x, d)| x + d).collect();
    let delta2_prime: Vec<Complex64> = vandermonde(&shifted, n)
        .mul_vec(alpha)
        .iter()
        .zip(m_head)
        .map(|(a, m)| a - m)
        .collect();
    let value = max_abs(&delta1).max(max_abs(&delta2)).max(max_abs(&delta2_prime));
    Ok(Berr3 {
        value,
        delta1,
        delta2,
        delta2_prime,
    })
}

/// All three backward errors of a classical Prony run on `m`.
pub fn backward_report(m: &MomentVector, result: &RecoveryResult) -> Result<BackwardErrorReport> {
    let n = result.nodes_used.len();
    if result.coefficients.len() != n {
        return Err(Error::Estimator("run carries no Prony coefficients".into()));
    }
    let b1 = berr1(&result.coefficients, m)?;
    let b2 = berr2(&result.nodes_raw, &result.coefficients)?;
    let b3 = berr3(&result.amplitudes, &m.values[..n], &result.nodes_used)?;
    Ok(BackwardErrorReport {
        berr1: b1.value,
        berr1_certificate: b1.certificate,
        berr1_certificate_residual: b1.certificate_residual,
        berr1_certificate_scale: b1.certificate_scale,
        cn_pinv_norm: b1.cn_pinv_norm,
        berr2: b2,
        berr3: b3.value,
        machine_eps_ratio: [b1.value / MACHINE_EPS, b2 / MACHINE_EPS, b3.value / MACHINE_EPS],
    })
}
