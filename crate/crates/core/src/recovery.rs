//! Classical and homogeneous Prony recovery, amplitude solve, projection
//! onto the unit circle and matching against ground truth.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use num_complex::Complex64;
use num_traits::{One, Zero};

use crate::linalg::{hankel, singular_threshold, solve_square, ComplexMatrix, Lu};
use crate::model::{MomentVector, Signal};
use crate::rootfind::{roots, MonicPolynomial};
use crate::{Error, Result};

/// Largest `n` accepted by the exhaustive matcher.
pub const MAX_MATCH_SIZE: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Method {
    Classical,
    Homogeneous,
    Decimated,
    Pencil,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Classical, Method::Homogeneous, Method::Decimated, Method::Pencil];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Classical => "classical",
            Method::Homogeneous => "homogeneous",
            Method::Decimated => "decimated",
            Method::Pencil => "pencil",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "classical" | "prony" | "pm" => Ok(Method::Classical),
            "homogeneous" => Ok(Method::Homogeneous),
            "decimated" | "dpm" => Ok(Method::Decimated),
            "pencil" | "mp" => Ok(Method::Pencil),
            other => Err(Error::invalid(format!("unknown method '{other}'"))),
        }
    }
}

/// Output of one recovery run.
///
/// `matching[j]` is the true index of recovered node `j`; the error vectors
/// follow the recovered order. They stay empty until [`with_truth`] runs.
///
/// [`with_truth`]: RecoveryResult::with_truth
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RecoveryResult {
    pub nodes_raw: Vec<Complex64>,
    pub nodes_used: Vec<Complex64>,
    pub amplitudes: Vec<Complex64>,
    pub matching: Option<Vec<usize>>,
    pub node_errors: Vec<f64>,
    pub amp_errors: Vec<f64>,
    pub residual_moments: f64,
    pub method: Method,
    pub projected: bool,
    /// Decimation parameter of the winning subproblem.
    pub lambda: Option<u32>,
    /// Monic polynomial whose roots were taken (`c_0..c_{n-1}`).
    pub coefficients: Vec<Complex64>,
}

impl RecoveryResult {
    /// Matches against the true nodes and fills the error vectors.
    pub fn with_truth(mut self, truth: &Signal) -> Result<Self> {
        let sigma = match_nodes(&self.nodes_used, &truth.nodes)?;
        self.node_errors = sigma
            .iter()
            .enumerate()
            .map(|(j, &t)| (truth.nodes[t] - self.nodes_used[j]).norm())
            .collect();
        self.amp_errors = sigma
            .iter()
            .enumerate()
            .map(|(j, &t)| (truth.amplitudes[t] - self.amplitudes[j]).norm())
            .collect();
        self.matching = Some(sigma);
        Ok(self)
    }

    /// Node and amplitude errors indexed by the true node index.
    pub fn errors_by_truth(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        let sigma = self.matching.as_ref()?;
        let mut nx = vec![0.0; sigma.len()];
        let mut na = vec![0.0; sigma.len()];
        for (j, &t) in sigma.iter().enumerate() {
            nx[t] = self.node_errors[j];
            na[t] = self.amp_errors[j];
        }
        Some((nx, na))
    }

    /// Recovered nodes reordered so that entry `t` estimates true node `t`.
    pub fn nodes_by_truth(&self) -> Option<Vec<Complex64>> {
        let sigma = self.matching.as_ref()?;
        let mut out = vec![Complex64::zero(); sigma.len()];
        for (j, &t) in sigma.iter().enumerate() {
            out[t] = self.nodes_used[j];
        }
        Some(out)
    }

    pub fn max_node_error(&self) -> f64 {
        self.node_errors.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_amp_error(&self) -> f64 {
        self.amp_errors.iter().copied().fold(0.0, f64::max)
    }
}

fn check_moments(m: &MomentVector, n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::invalid("n must be at least 1"));
    }
    if m.len() < 2 * n {
        return Err(Error::invalid(format!("need {} moments, got {}", 2 * n, m.len())));
    }
    if m.values.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
        return Err(Error::invalid("non-finite moment"));
    }
    Ok(())
}

/// Prony polynomial coefficients from `H̃ₙ q = −(m̃_n..m̃_{2n-1})`.
pub fn classical_polynomial(m: &MomentVector, n: usize) -> Result<MonicPolynomial> {
    check_moments(m, n)?;
    let h = hankel(&m.values, 0, n, n)?;
    let rhs: Vec<Complex64> = m.values[n..2 * n].iter().map(|v| -v).collect();
    Ok(MonicPolynomial::new(solve_square(&h, &rhs)?))
}

/// Ascending coefficients of the bordered determinant `q̄(z)`; the
/// coefficient of `z^i` is the cofactor of the first-row entry `z^i`.
pub fn homogeneous_polynomial(m: &MomentVector, n: usize) -> Result<Vec<Complex64>> {
    check_moments(m, n)?;
    // Cofactors of the first row of the bordered matrix, all read off one
    // pivoted factorization of the Hankel block (Cramer's rule):
    // C_n = (-1)^n det H and C_i = -(-1)^n det H * y_i with H y = h.
    let h = hankel(&m.values, 0, n, n)?;
    let rhs: Vec<Complex64> = m.values[n..2 * n].to_vec();
    let lu = Lu::factor(&h);
    let sign = if n.is_multiple_of(2) { 1.0 } else { -1.0 };
    let lead = lu.det() * sign;
    let y = lu.solve(&rhs)?;
    let mut qbar: Vec<Complex64> = y.iter().map(|&yi| -lead * yi).collect();
    qbar.push(lead);
    Ok(qbar)
}

/// Classical Prony: Hankel solve, roots, amplitudes from the first `n`
/// moments. Only the first `2n` moments are used.
pub fn prony_classical(m: &MomentVector, n: usize, project: bool) -> Result<RecoveryResult> {
    let q = classical_polynomial(m, n)?;
    finish(m, n, q, project, Method::Classical)
}

/// Homogeneous Prony: roots of the bordered moment determinant.
pub fn prony_homogeneous(m: &MomentVector, n: usize, project: bool) -> Result<RecoveryResult> {
    let qbar = homogeneous_polynomial(m, n)?;
    let lead = qbar[n];
    let scale = qbar.iter().map(|c| c.norm()).fold(0.0, f64::max);
    if !(lead.norm() > singular_threshold(scale)) {
        return Err(Error::Singular {
            pivot: n,
            magnitude: lead.norm(),
        });
    }
    let q = MonicPolynomial::from_general(&qbar)?;
    finish(m, n, q, project, Method::Homogeneous)
}

pub(crate) fn finish(
    m: &MomentVector,
    n: usize,
    q: MonicPolynomial,
    project: bool,
    method: Method,
) -> Result<RecoveryResult> {
    let nodes_raw = roots(&q)?;
    let mut result = from_nodes(m, n, nodes_raw, project, method)?;
    result.coefficients = q.coeffs;
    Ok(result)
}

/// Amplitude solve and residual for already computed nodes.
pub(crate) fn from_nodes(
    m: &MomentVector,
    n: usize,
    nodes_raw: Vec<Complex64>,
    project: bool,
    method: Method,
) -> Result<RecoveryResult> {
    let nodes_used = if project {
        project_to_circle(&nodes_raw)?
    } else {
        nodes_raw.clone()
    };
    let amplitudes = solve_amplitudes(&nodes_used, &m.values[..n])?;
    let residual_moments = moment_residual(&nodes_used, &amplitudes, &m.values[..2 * n]);
    Ok(RecoveryResult {
        nodes_raw,
        nodes_used,
        amplitudes,
        matching: None,
        node_errors: Vec::new(),
        amp_errors: Vec::new(),
        residual_moments,
        method,
        projected: project,
        lambda: None,
        coefficients: Vec::new(),
    })
}

/// `max_k |Σ_j α_j x_j^k − m_k|` over the given window.
pub fn moment_residual(nodes: &[Complex64], amplitudes: &[Complex64], window: &[Complex64]) -> f64 {
    let mut recon = vec![Complex64::zero(); window.len()];
    for (x, a) in nodes.iter().zip(amplitudes) {
        let mut t = *a;
        for r in recon.iter_mut() {
            *r += t;
            t *= x;
        }
    }
    recon
        .iter()
        .zip(window)
        .map(|(r, w)| (r - w).norm())
        .fold(0.0, f64::max)
}

/// Rows of `Ṽ⁻¹`: row `j` holds the ascending coefficients of the Lagrange
/// basis polynomial `L_j(z) = ∏_{m≠j} (z − x_m)/(x_j − x_m)`.
pub fn lagrange_inverse(nodes: &[Complex64]) -> Result<ComplexMatrix> {
    let n = nodes.len();
    let mut inv = ComplexMatrix::zeros(n, n);
    for j in 0..n {
        let mut num = vec![Complex64::one()];
        let mut den = Complex64::one();
        for (mi, xm) in nodes.iter().enumerate() {
            if mi == j {
                continue;
            }
            let gap = nodes[j] - xm;
            if !(gap.norm() > singular_threshold(nodes[j].norm().max(1.0))) {
                return Err(Error::Singular {
                    pivot: j,
                    magnitude: gap.norm(),
                });
            }
            den *= gap;
            let mut next = vec![Complex64::zero(); num.len() + 1];
            for (k, c) in num.iter().enumerate() {
                next[k + 1] += c;
                next[k] -= c * xm;
            }
            num = next;
        }
        for (k, c) in num.iter().enumerate() {
            inv[(j, k)] = c / den;
        }
    }
    Ok(inv)
}

/// Solves `Ṽ α = m_head` with `Ṽ[k][j] = x_j^k`, followed by one step of
/// iterative refinement.
pub fn solve_amplitudes(nodes: &[Complex64], m_head: &[Complex64]) -> Result<Vec<Complex64>> {
    if nodes.len() != m_head.len() || nodes.is_empty() {
        return Err(Error::invalid("need one moment per node"));
    }
    let inv = lagrange_inverse(nodes)?;
    let mut alpha = inv.mul_vec(m_head);
    let r: Vec<Complex64> = {
        let mut recon = vec![Complex64::zero(); m_head.len()];
        for (x, a) in nodes.iter().zip(&alpha) {
            let mut t = *a;
            for v in recon.iter_mut() {
                *v += t;
                t *= x;
            }
        }
        m_head.iter().zip(&recon).map(|(m, v)| m - v).collect()
    };
    for (a, c) in alpha.iter_mut().zip(inv.mul_vec(&r)) {
        *a += c;
    }
    if alpha.iter().any(|a| !(a.re.is_finite() && a.im.is_finite())) {
        return Err(Error::Singular {
            pivot: 0,
            magnitude: f64::NAN,
        });
    }
    Ok(alpha)
}

/// `x ↦ x/|x|`.
pub fn project_to_circle(nodes: &[Complex64]) -> Result<Vec<Complex64>> {
    nodes
        .iter()
        .map(|x| {
            let r = x.norm();
            if r > 0.0 && r.is_finite() {
                Ok(x / r)
            } else {
                Err(Error::invalid(format!("cannot project node {x}")))
            }
        })
        .collect()
}

/// Permutation `σ` (recovered index → true index) minimizing the largest
/// distance, ties broken by the total distance. Exhaustive over `n!`.
pub fn match_nodes(recovered: &[Complex64], truth: &[Complex64]) -> Result<Vec<usize>> {
    let n = recovered.len();
    if truth.len() != n {
        return Err(Error::invalid(format!(
            "cannot match {n} recovered nodes against {} true nodes",
            truth.len()
        )));
    }
    if n > MAX_MATCH_SIZE {
        return Err(Error::invalid(format!("matching supports n <= {MAX_MATCH_SIZE}")));
    }
    let dist: Vec<Vec<f64>> = recovered
        .iter()
        .map(|r| truth.iter().map(|t| (r - t).norm()).collect())
        .collect();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = perm.clone();
    let mut best_key = (f64::INFINITY, f64::INFINITY);
    loop {
        let mut worst: f64 = 0.0;
        let mut total = 0.0;
        for (j, &t) in perm.iter().enumerate() {
            worst = worst.max(dist[j][t]);
            total += dist[j][t];
        }
        if worst < best_key.0 || (worst == best_key.0 && total < best_key.1) {
            best_key = (worst, total);
            best.copy_from_slice(&perm);
        }
        if !next_permutation(&mut perm) {
            break;
        }
    }
    Ok(best)
}

fn next_permutation(p: &mut [usize]) -> bool {
    let n = p.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

/// Human-readable summary used by error messages.
pub fn describe(result: &RecoveryResult) -> String {
    let mut s = result.method.to_string();
    if result.projected {
        s.push_str(" (projected)");
    }
    if let Some(l) = result.lambda {
        s.push_str(&format!(", lambda = {l}"));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ClusterRequest, Signal};
    use crate::rootfind::coeffs_from_roots;
    use crate::linalg::det;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn pair() -> (Signal, MomentVector) {
        let s = Signal::from_parts(vec![c(1.0, 0.0), c(-1.0, 0.0)], vec![c(1.0, 0.0); 2]).unwrap();
        let m = s.moments(4);
        (s, m)
    }

    #[test]
    fn classical_pair() {
        let (s, m) = pair();
        assert_eq!(m.values, vec![c(2.0, 0.0), c(0.0, 0.0), c(2.0, 0.0), c(0.0, 0.0)]);
        let r = prony_classical(&m, 2, false).unwrap().with_truth(&s).unwrap();
        assert!(r.max_node_error() <= 1e-12 && r.max_amp_error() <= 1e-12);
        assert_eq!(r.coefficients, vec![c(-1.0, 0.0), c(0.0, 0.0)]);
    }

    #[test]
    fn classical_single_node() {
        let s = Signal::from_parts(vec![c(0.0, 1.0)], vec![c(2.0, 0.0)]).unwrap();
        let r = prony_classical(&s.moments(2), 1, false).unwrap();
        assert!((r.nodes_used[0] - c(0.0, 1.0)).norm() <= 1e-14);
        assert!((r.amplitudes[0] - c(2.0, 0.0)).norm() <= 1e-14);
    }

    #[test]
    fn homogeneous_pair_polynomial() {
        let (s, m) = pair();
        let qbar = homogeneous_polynomial(&m, 2).unwrap();
        assert_eq!(qbar, vec![c(-4.0, 0.0), c(0.0, 0.0), c(4.0, 0.0)]);
        let r = prony_homogeneous(&m, 2, false).unwrap().with_truth(&s).unwrap();
        assert!(r.max_node_error() <= 1e-12);
    }

    #[test]
    fn homogeneous_is_scaled_prony_polynomial() {
        for seed in 0..10 {
            let s = Signal::generate(&ClusterRequest::new(vec![2, 1], 5e-2, seed)).unwrap();
            let m = s.moments(6);
            let qbar = homogeneous_polynomial(&m, 3).unwrap();
            let h = hankel(&m.values, 0, 3, 3).unwrap();
            let factor = -det(&h);
            let p = coeffs_from_roots(&s.nodes);
            for k in 0..3 {
                let expect = factor * p.coeffs[k];
                assert!((qbar[k] - expect).norm() <= 1e-12 * factor.norm(), "seed {seed}");
            }
            assert!((qbar[3] - factor).norm() <= 1e-12 * factor.norm());
        }
    }

    #[test]
    fn singular_hankel_rejected() {
        // two amplitudes cancel: rank-one data with n = 2
        let m = MomentVector::new(vec![c(1.0, 0.0); 4]);
        assert!(matches!(prony_classical(&m, 2, false), Err(Error::Singular { .. })));
        assert!(matches!(prony_homogeneous(&m, 2, false), Err(Error::Singular { .. })));
        assert!(prony_classical(&m, 3, false).is_err());
    }

    #[test]
    fn amplitude_examples() {
        let a = solve_amplitudes(&[c(1.0, 0.0), c(-1.0, 0.0)], &[c(2.0, 0.0), c(0.0, 0.0)]).unwrap();
        assert!((a[0] - 1.0).norm() < 1e-15 && (a[1] - 1.0).norm() < 1e-15);
        assert_eq!(solve_amplitudes(&[c(1.0, 0.0)], &[c(3.0, 0.0)]).unwrap(), vec![c(3.0, 0.0)]);
        let nodes = [c(0.3, 0.8), c(-0.9, 0.1), c(0.2, -0.7), c(1.1, 0.4)];
        let alpha = [c(1.0, 0.5), c(-0.3, 0.2), c(0.8, -1.1), c(0.4, 0.0)];
        let s = Signal {
            nodes: nodes.to_vec(),
            amplitudes: alpha.to_vec(),
            ..Signal::from_parts(vec![c(1.0, 0.0)], vec![c(1.0, 0.0)]).unwrap()
        };
        let m = s.moments(4);
        let got = solve_amplitudes(&nodes, &m.values).unwrap();
        for (g, a) in got.iter().zip(&alpha) {
            assert!((g - a).norm() < 1e-10);
        }
        assert!(matches!(
            solve_amplitudes(&[c(1.0, 0.0), c(1.0, 0.0)], &[c(1.0, 0.0); 2]),
            Err(Error::Singular { .. })
        ));
    }

    #[test]
    fn projection_examples() {
        assert_eq!(project_to_circle(&[c(2.0, 0.0)]).unwrap(), vec![c(1.0, 0.0)]);
        assert_eq!(project_to_circle(&[c(0.0, 0.5)]).unwrap(), vec![c(0.0, 1.0)]);
        let u = Complex64::from_polar(1.0, 0.7);
        assert!((project_to_circle(&[u]).unwrap()[0] - u).norm() < 1e-16);
        assert!(project_to_circle(&[c(0.0, 0.0)]).is_err());
    }

    #[test]
    fn matching_examples() {
        let t = [c(1.0, 0.0), c(0.0, 1.0), c(-1.0, 0.0)];
        assert_eq!(match_nodes(&t, &t).unwrap(), vec![0, 1, 2]);
        let swapped = [t[1], t[0], t[2]];
        assert_eq!(match_nodes(&swapped, &t).unwrap(), vec![1, 0, 2]);
        assert!(match_nodes(&t[..2], &t).is_err());
        let s = Signal::generate(&ClusterRequest::new(vec![2, 1], 1e-2, 4)).unwrap();
        let noisy: Vec<Complex64> = s.nodes.iter().map(|x| x + c(1e-6, -1e-6)).collect();
        assert_eq!(match_nodes(&noisy, &s.nodes).unwrap(), vec![0, 1, 2]);
    }

    #[test]
    fn projection_flag_normalizes() {
        let s = Signal::generate(&ClusterRequest::new(vec![2, 1], 1e-2, 9)).unwrap();
        let m = crate::model::perturb(&s.moments(6), &crate::model::NoiseSpec::seeded(1e-9, 1));
        let r = prony_classical(&m, 3, true).unwrap();
        assert!(r.projected);
        for x in &r.nodes_used {
            assert!((x.norm() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
        }
        assert!("esprit".parse::<Method>().is_err());
    }
}
