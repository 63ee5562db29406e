//! Matrix Pencil node estimation.
//!
//! With `K+1` samples and pencil parameter `L`, the shifted Hankel blocks
//! `H₀[i][j] = m_{i+j}` and `H₁[i][j] = m_{i+j+1}` are `L × (K−L+1)`.
//! Truncating `H₀ = UΣWᴴ` to rank `n` gives the `n × n` matrix
//! `Σₙ⁻¹ Uₙᴴ H₁ Wₙ`, whose eigenvalues are the node estimates. They are
//! computed as roots of its characteristic polynomial, obtained from a
//! Householder reduction to Hessenberg form.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
// Needed without std; std builds resolve these as inherent methods.
#[allow(unused_imports)]
use num_traits::Float;
use num_traits::{One, Zero};

use crate::linalg::{hankel, ComplexMatrix, Svd};
use crate::model::MomentVector;
use crate::recovery::{from_nodes, moment_residual, Method, RecoveryResult};
use crate::rootfind::{roots, MonicPolynomial};
use crate::{Error, Result, MACHINE_EPS};

/// Relative singular-value floor below which `H₀` counts as rank deficient.
pub const RANK_TOLERANCE: f64 = 1e3 * MACHINE_EPS;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum AmplitudeFit {
    /// Square Vandermonde solve on `m̃_0..m̃_{n-1}`.
    FirstMoments,
    /// Least squares over every sample.
    AllSamples,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PencilParams {
    pub l: usize,
    pub rank: usize,
    pub amplitudes: AmplitudeFit,
}

impl PencilParams {
    /// `L = ⌊K/2⌋` clamped to `[n, K−n+1]`, for `K+1` samples.
    pub fn default_for(samples: usize, n: usize) -> Result<Self> {
        let k = samples
            .checked_sub(1)
            .ok_or_else(|| Error::invalid("no samples"))?;
        if n == 0 || k + 1 < 2 * n {
            return Err(Error::invalid(format!("{samples} samples cannot support rank {n}")));
        }
        let l = (k / 2).clamp(n, k + 1 - n);
        Self::new(l, n, samples)
    }

    pub fn new(l: usize, n: usize, samples: usize) -> Result<Self> {
        let k = samples.saturating_sub(1);
        if n == 0 || l < n || l + n > k + 1 {
            return Err(Error::invalid(format!(
                "pencil parameter L = {l} must satisfy n <= L <= K-n+1 (n = {n}, K = {k})"
            )));
        }
        Ok(Self {
            l,
            rank: n,
            amplitudes: AmplitudeFit::FirstMoments,
        })
    }

    pub fn with_amplitudes(mut self, fit: AmplitudeFit) -> Self {
        self.amplitudes = fit;
        self
    }
}

/// Matrix Pencil recovery from all samples in `m`.
pub fn matrix_pencil(m: &MomentVector, n: usize, params: &PencilParams, project: bool) -> Result<RecoveryResult> {
    if params.rank != n {
        return Err(Error::invalid("pencil rank must equal n"));
    }
    let samples = m.len();
    PencilParams::new(params.l, n, samples)?;
    let l = params.l;
    let cols = samples - l;
    let h0 = hankel(&m.values, 0, l, cols)?;
    let h1 = hankel(&m.values, 1, l, cols)?;
    let svd = Svd::compute(&h0);
    let s1 = svd.s[0];
    let rank = svd.s.iter().filter(|&&s| s > RANK_TOLERANCE * s1).count();
    if !(s1 > 0.0) || rank < n {
        return Err(Error::RankDeficient { rank, required: n });
    }
    // Σₙ⁻¹ Uₙᴴ H₁ Wₙ
    let reduced = ComplexMatrix::from_fn(n, n, |i, j| {
        let mut acc = Complex64::zero();
        for r in 0..l {
            let ur = svd.u[(r, i)].conj();
            if ur.is_zero() {
                continue;
            }
            let mut row = Complex64::zero();
            for c in 0..cols {
                row += h1[(r, c)] * svd.v[(c, j)];
            }
            acc += ur * row;
        }
        acc / svd.s[i]
    });
    let charpoly = characteristic_polynomial(&reduced);
    let nodes_raw = roots(&charpoly)?;
    let mut result = from_nodes(m, n, nodes_raw, project, Method::Pencil)?;
    if params.amplitudes == AmplitudeFit::AllSamples {
        result.amplitudes = least_squares_amplitudes(&result.nodes_used, &m.values)?;
    }
    result.residual_moments = moment_residual(&result.nodes_used, &result.amplitudes, &m.values);
    result.coefficients = charpoly.coeffs;
    Ok(result)
}

/// Unitary similarity to upper Hessenberg form (Householder reflections).
pub fn hessenberg(a: &ComplexMatrix) -> ComplexMatrix {
    let n = a.rows();
    let mut h = a.clone();
    for k in 0..n.saturating_sub(2) {
        let x: Vec<Complex64> = (k + 1..n).map(|i| h[(i, k)]).collect();
        let xnorm = x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        if xnorm == 0.0 {
            continue;
        }
        let phase = if x[0].is_zero() { Complex64::one() } else { x[0] / x[0].norm() };
        let mut v = x.clone();
        v[0] += phase * xnorm;
        let vnorm = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if vnorm == 0.0 {
            continue;
        }
        for c in v.iter_mut() {
            *c /= vnorm;
        }
        // H ← (I − 2vvᴴ) H
        for j in 0..n {
            let dot: Complex64 = v.iter().enumerate().map(|(t, vt)| vt.conj() * h[(k + 1 + t, j)]).sum();
            for (t, vt) in v.iter().enumerate() {
                h[(k + 1 + t, j)] -= vt * dot * 2.0;
            }
        }
        // H ← H (I − 2vvᴴ)
        for i in 0..n {
            let dot: Complex64 = v.iter().enumerate().map(|(t, vt)| h[(i, k + 1 + t)] * vt).sum();
            for (t, vt) in v.iter().enumerate() {
                h[(i, k + 1 + t)] -= dot * vt.conj() * 2.0;
            }
        }
        for i in k + 2..n {
            h[(i, k)] = Complex64::zero();
        }
    }
    h
}

/// `det(zI − A)` via Hessenberg reduction and the leading-minor recurrence
/// `p_k = (z − h_kk) p_{k−1} − Σ_{i<k} h_ik (∏_{m=i+1}^{k} h_{m,m−1}) p_{i−1}`.
pub fn characteristic_polynomial(a: &ComplexMatrix) -> MonicPolynomial {
    let n = a.rows();
    let h = hessenberg(a);
    // ascending coefficient vectors, p[k] has degree k
    let mut p: Vec<Vec<Complex64>> = vec![vec![Complex64::one()]];
    for k in 0..n {
        let prev = &p[k];
        let mut next = vec![Complex64::zero(); k + 2];
        for (d, c) in prev.iter().enumerate() {
            next[d + 1] += c;
            next[d] -= c * h[(k, k)];
        }
        let mut sub = Complex64::one();
        for i in (0..k).rev() {
            sub *= h[(i + 1, i)];
            let w = h[(i, k)] * sub;
            for (d, c) in p[i].iter().enumerate() {
                next[d] -= w * c;
            }
        }
        p.push(next);
    }
    let mut full = p.pop().unwrap();
    full.pop();
    MonicPolynomial::new(full)
}

/// `argmin_α ‖V α − m‖₂` with `V[k][j] = x_j^k` over all samples, via SVD.
pub fn least_squares_amplitudes(nodes: &[Complex64], samples: &[Complex64]) -> Result<Vec<Complex64>> {
    let n = nodes.len();
    if samples.len() < n {
        return Err(Error::invalid("fewer samples than nodes"));
    }
    let v = crate::linalg::vandermonde(nodes, samples.len());
    let svd = Svd::compute(&v);
    if !(svd.s[n - 1] > RANK_TOLERANCE * svd.s[0]) {
        return Err(Error::RankDeficient {
            rank: svd.s.iter().filter(|&&s| s > RANK_TOLERANCE * svd.s[0]).count(),
            required: n,
        });
    }
    Ok(svd.solve_least_squares(samples, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::det;
    use crate::model::{ClusterRequest, Signal};
    use crate::recovery::prony_classical;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn default_l_is_clamped() {
        assert_eq!(PencilParams::default_for(11, 2).unwrap().l, 5);
        assert_eq!(PencilParams::default_for(4, 2).unwrap().l, 2);
        assert!(PencilParams::default_for(3, 2).is_err());
        assert!(PencilParams::new(1, 2, 10).is_err());
    }

    #[test]
    fn rank_one_pencil() {
        let x = Complex64::from_polar(1.0, 0.3);
        let s = Signal::from_parts(vec![x], vec![c(0.7, 0.2)]).unwrap();
        let m = s.moments(6);
        let r = matrix_pencil(&m, 1, &PencilParams::default_for(6, 1).unwrap(), false).unwrap();
        assert!((r.nodes_used[0] - x).norm() < 1e-12);
    }

    #[test]
    fn antipodal_pair() {
        let s = Signal::from_parts(vec![c(1.0, 0.0), c(-1.0, 0.0)], vec![c(1.0, 0.0); 2]).unwrap();
        let m = s.moments(8);
        let r = matrix_pencil(&m, 2, &PencilParams::default_for(8, 2).unwrap(), false)
            .unwrap()
            .with_truth(&s)
            .unwrap();
        assert!(r.max_node_error() < 1e-10);
    }

    #[test]
    fn characteristic_polynomial_matches_determinant() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for n in 1..=6 {
            let a = ComplexMatrix::from_fn(n, n, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
            let p = characteristic_polynomial(&a);
            for _ in 0..3 {
                let z = c(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
                let zi = ComplexMatrix::identity(n).scale(z).sub(&a);
                let d = det(&zi);
                assert!((p.eval(z) - d).norm() < 1e-11 * d.norm().max(1.0), "n = {n}");
            }
        }
    }

    #[test]
    fn hessenberg_is_similar() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = ComplexMatrix::from_fn(5, 5, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let h = hessenberg(&a);
        for i in 2..5 {
            for j in 0..i - 1 {
                assert_eq!(h[(i, j)], Complex64::zero());
            }
        }
        assert!((h.trace() - a.trace()).norm() < 1e-12);
        assert!((det(&h) - det(&a)).norm() < 1e-12);
    }

    #[test]
    fn agrees_with_prony_and_char_poly_vanishes() {
        for seed in 0..10 {
            let s = Signal::generate(&ClusterRequest::new(vec![2, 1], 3e-2, seed)).unwrap();
            let m = s.moments(12);
            let pen = matrix_pencil(&m, 3, &PencilParams::default_for(12, 3).unwrap(), false).unwrap();
            let pm = prony_classical(&m, 3, false).unwrap();
            for (a, b) in pen.nodes_used.iter().zip(&pm.nodes_used) {
                assert!((a - b).norm() < 1e-9, "seed {seed}");
            }
            let p = MonicPolynomial::new(pen.coefficients.clone());
            for x in &pen.nodes_raw {
                assert!(p.eval(*x).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn least_squares_amplitudes_noiseless() {
        let s = Signal::generate(&ClusterRequest::new(vec![2, 1], 3e-2, 1)).unwrap();
        let m = s.moments(12);
        let params = PencilParams::default_for(12, 3).unwrap().with_amplitudes(AmplitudeFit::AllSamples);
        let r = matrix_pencil(&m, 3, &params, false).unwrap().with_truth(&s).unwrap();
        assert!(r.max_amp_error() < 1e-8);
    }

    #[test]
    fn rank_deficiency_detected() {
        let m = MomentVector::new(vec![c(1.0, 0.0); 10]);
        assert!(matches!(
            matrix_pencil(&m, 2, &PencilParams::default_for(10, 2).unwrap(), false),
            Err(Error::RankDeficient { rank: 1, required: 2 })
        ));
    }
}
