//! Numerical checks of the perturbation theory of the homogeneous Prony
//! polynomial `q̄(z) = det(G(z) + εD)`.
//!
//! * [`verify_expansion`] compares the compound/adjugate coefficients
//!   `θ_{n+1−κ}(z) = tr(adj_{n+1−κ}(D) · C_{n+1−κ}(G(z)))` with the
//!   ε-coefficients of `det(G(z) + εD)` recovered by interpolation.
//! * [`gamma_beta_gamma`] evaluates the bordered moment determinants that
//!   make up `θ_{n+1−κ}` from their explicit exponent pattern.
//! * [`first_order_constant`] extrapolates `lim (x_j − x̃_j)/ε`.
//! * [`cluster_discrepancy`] measures how much a cluster leaks into the
//!   amplitude estimate of a node outside it.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
// Needed without std; std builds resolve these as inherent methods.
#[allow(unused_imports)]
use num_traits::Float;
use num_traits::{One, Zero};

use crate::linalg::{compound, det, higher_adjugate, index_sequences, singular_threshold, ComplexMatrix, IndexSequence, Svd};
use crate::model::{MomentVector, Signal};
use crate::{Error, Result};

/// Largest acceptable condition number of the ε-interpolation system.
pub const MAX_INTERPOLATION_CONDITION: f64 = 1e10;

/// Base multipliers of the extrapolation sequence, scaled by `δ^{2ℓ*−1}`.
pub const FIRST_ORDER_STEPS: [f64; 3] = [1e-6, 5e-7, 2.5e-7];

/// Largest Richardson disagreement accepted by [`first_order_constant`].
pub const EXTRAPOLATION_TOLERANCE: f64 = 1e-3;

fn check_data(m: &[Complex64], d: &[Complex64], n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::invalid("n must be at least 1"));
    }
    if m.len() < 2 * n || d.len() < 2 * n {
        return Err(Error::invalid(format!("need {} moments and coefficients", 2 * n)));
    }
    Ok(())
}

/// `G(z)`: first row `[1, z, …, zⁿ]`, row `i ≥ 1` is `m_{i−1} … m_{i−1+n}`.
/// `D`: zero first row, row `i ≥ 1` is `d_{i−1} … d_{i−1+n}`.
pub fn build_g_and_d(m: &[Complex64], d: &[Complex64], z: Complex64, n: usize) -> Result<(ComplexMatrix, ComplexMatrix)> {
    check_data(m, d, n)?;
    Ok((g_matrix(m, z, n), d_matrix(d, n)))
}

fn g_matrix(m: &[Complex64], z: Complex64, n: usize) -> ComplexMatrix {
    let pw = crate::linalg::powers(z, n + 1);
    ComplexMatrix::from_fn(n + 1, n + 1, |i, j| if i == 0 { pw[j] } else { m[i - 1 + j] })
}

fn d_matrix(d: &[Complex64], n: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(n + 1, n + 1, |i, j| if i == 0 { Complex64::zero() } else { d[i - 1 + j] })
}

/// `tr(A·B)` without forming the product.
fn trace_product(a: &ComplexMatrix, b: &ComplexMatrix) -> Complex64 {
    let mut t = Complex64::zero();
    for i in 0..a.rows() {
        for k in 0..a.cols() {
            t += a[(i, k)] * b[(k, i)];
        }
    }
    t
}

/// Adjugates `adj_r(D)` for `r = 0..=N`, which do not depend on `z`.
fn adjugates(dm: &ComplexMatrix) -> Vec<ComplexMatrix> {
    (0..=dm.rows())
        .map(|r| higher_adjugate(dm, r).expect("order within range"))
        .collect()
}

/// `[θ_{n+1}, θ_n, …, θ_0]`: entry `κ` is the coefficient of `ε^κ`.
pub fn theta_coefficients(g: &ComplexMatrix, dm: &ComplexMatrix) -> Result<Vec<Complex64>> {
    if !g.is_square() || g.rows() != dm.rows() || g.cols() != dm.cols() {
        return Err(Error::invalid("G and D must be square of equal size"));
    }
    Ok(theta_with(&adjugates(dm), g))
}

fn theta_with(adj: &[ComplexMatrix], g: &ComplexMatrix) -> Vec<Complex64> {
    let size = g.rows();
    (0..=size)
        .map(|kappa| {
            let r = size - kappa;
            trace_product(&adj[r], &compound(g, r).expect("order within range"))
        })
        .collect()
}

/// Outcome of [`verify_expansion`].
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ExpansionReport {
    pub n: usize,
    pub z_samples: Vec<Complex64>,
    pub eps_samples: Vec<f64>,
    /// `theta[z][κ] = θ_{n+1−κ}(z)`.
    pub theta: Vec<Vec<Complex64>>,
    /// `direct[z][κ]`: interpolated coefficient of `ε^κ` in `det(G(z) + εD)`.
    pub direct: Vec<Vec<Complex64>>,
    /// Largest `|θ_κ − c_κ| s^κ / max_k |θ_k| s^k` with `s = max ε`.
    pub max_rel_err: f64,
    /// Largest `|c_{n+1} − det D| / |det D|` (zero when `det D = 0`).
    pub det_d_rel_err: f64,
    pub det_d: Complex64,
    pub interpolation_condition: f64,
}

/// Chebyshev points on `[1e-4, 1e-1]·scale` where `scale` makes the
/// `ε^{n+1}` term comparable to the others at the top of the range.
pub fn default_eps_samples(m: &[Complex64], d: &[Complex64], n: usize, z_samples: &[Complex64]) -> Result<Vec<f64>> {
    check_data(m, d, n)?;
    let dm = d_matrix(d, n);
    let adj = adjugates(&dm);
    let mut scale: f64 = 0.0;
    for &z in z_samples {
        let th = theta_with(&adj, &g_matrix(m, z, n));
        let top = th[n + 1].norm();
        if top == 0.0 {
            continue;
        }
        for (k, t) in th.iter().enumerate().take(n + 1) {
            if t.norm() > 0.0 {
                scale = scale.max((t.norm() / top).powf(1.0 / (n + 1 - k) as f64));
            }
        }
    }
    let scale = if scale > 0.0 && scale.is_finite() { 10.0 * scale } else { 1.0 };
    Ok(chebyshev_points(1e-4, 1e-1, n + 2 + 2).into_iter().map(|u| u * scale).collect())
}

/// `count` Chebyshev nodes of the first kind on `[lo, hi]`, ascending.
pub fn chebyshev_points(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|i| {
            let t = -(PI * (2 * i + 1) as f64 / (2 * count) as f64).cos();
            lo + (hi - lo) * (t + 1.0) / 2.0
        })
        .collect()
}

/// Checks `det(G(z) + εD) = Σ_κ ε^κ θ_{n+1−κ}(z)` at every `z` sample.
pub fn verify_expansion(
    m: &MomentVector,
    d: &[Complex64],
    n: usize,
    z_samples: &[Complex64],
    eps_samples: &[f64],
) -> Result<ExpansionReport> {
    check_data(&m.values, d, n)?;
    let deg = n + 1;
    if eps_samples.len() < deg + 1 {
        return Err(Error::invalid(format!("need at least {} epsilon samples", deg + 1)));
    }
    if eps_samples.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
        return Err(Error::invalid("epsilon samples must be positive"));
    }
    let s = eps_samples.iter().copied().fold(0.0, f64::max);
    let vand = ComplexMatrix::from_fn(eps_samples.len(), deg + 1, |i, k| {
        Complex64::new((eps_samples[i] / s).powi(k as i32), 0.0)
    });
    let svd = Svd::compute(&vand);
    let cond = svd.condition_number();
    if !(cond <= MAX_INTERPOLATION_CONDITION) {
        return Err(Error::invalid(format!(
            "epsilon samples too clustered: interpolation condition {cond:.2e}"
        )));
    }
    let dm = d_matrix(&d[..2 * n], n);
    let adj = adjugates(&dm);
    let det_d = adj[0][(0, 0)];

    let mut theta = Vec::with_capacity(z_samples.len());
    let mut direct = Vec::with_capacity(z_samples.len());
    let mut max_rel_err: f64 = 0.0;
    let mut det_d_rel_err: f64 = 0.0;
    for &z in z_samples {
        let g = g_matrix(&m.values, z, n);
        let th = theta_with(&adj, &g);
        let values: Vec<Complex64> = eps_samples
            .iter()
            .map(|&e| det(&g.add(&dm.scale(Complex64::new(e, 0.0)))))
            .collect();
        let scaled = svd.solve_least_squares(&values, 0.0);
        let coeffs: Vec<Complex64> = scaled
            .iter()
            .enumerate()
            .map(|(k, c)| c / s.powi(k as i32))
            .collect();
        let denom = th
            .iter()
            .enumerate()
            .map(|(k, t)| t.norm() * s.powi(k as i32))
            .fold(0.0, f64::max);
        if denom > 0.0 {
            for k in 0..=deg {
                let err = (th[k] - coeffs[k]).norm() * s.powi(k as i32) / denom;
                max_rel_err = max_rel_err.max(err);
            }
        } else {
            let err = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
            max_rel_err = max_rel_err.max(err);
        }
        if det_d.norm() > 0.0 {
            det_d_rel_err = det_d_rel_err.max((coeffs[deg] - det_d).norm() / det_d.norm());
        }
        theta.push(th);
        direct.push(coeffs);
    }
    Ok(ExpansionReport {
        n,
        z_samples: z_samples.to_vec(),
        eps_samples: eps_samples.to_vec(),
        theta,
        direct,
        max_rel_err,
        det_d_rel_err,
        det_d,
        interpolation_condition: cond,
    })
}

/// The `(n+1−κ)`-square determinant with first row `z^{a+k_t}` and rows
/// `m_{b+l_s+k_t}`, where for `γ = (i_1, …)` and `β = (1, j_1, …)`:
/// `a = i_1 − 1`, `b = (j_1 − 2) + (i_1 − 1)`, `k_t = i_{t+1} − i_1`,
/// `l_s = j_{s+1} − j_1`.
pub fn gamma_beta_gamma(
    m: &[Complex64],
    n: usize,
    kappa: usize,
    beta: &IndexSequence,
    gamma: &IndexSequence,
    z: Complex64,
) -> Result<Complex64> {
    if n < 2 || kappa < 1 || kappa > n - 1 {
        return Err(Error::invalid("kappa must lie in [1, n-1]"));
    }
    let size = n + 1 - kappa;
    if beta.len() != size || gamma.len() != size {
        return Err(Error::invalid(format!("index sequences must have length {size}")));
    }
    let (b_idx, g_idx) = (beta.as_slice(), gamma.as_slice());
    if b_idx[0] != 1 {
        return Err(Error::invalid("beta must start with 1"));
    }
    if b_idx.iter().chain(g_idx).any(|&i| i > n + 1) {
        return Err(Error::invalid("index exceeds n+1"));
    }
    if m.len() < 2 * n {
        return Err(Error::invalid(format!("need {} moments", 2 * n)));
    }
    let i1 = g_idx[0];
    let j1 = b_idx[1];
    let a = i1 - 1;
    let b = (j1 - 2) + (i1 - 1);
    let k: Vec<usize> = core::iter::once(0).chain(g_idx[1..].iter().map(|i| i - i1)).collect();
    let l: Vec<usize> = core::iter::once(0).chain(b_idx[2..].iter().map(|j| j - j1)).collect();
    let mat = ComplexMatrix::from_fn(size, size, |r, c| {
        if r == 0 {
            z.powu((a + k[c]) as u32)
        } else {
            m[b + l[r - 1] + k[c]]
        }
    });
    Ok(det(&mat))
}

/// `Σ_γ Σ_{β ∋ 1} adj_{n+1−κ}(D)[γ, β] · Γ_{β,γ}(z)` for `1 ≤ κ ≤ n−1`.
pub fn theta_via_gamma(m: &[Complex64], d: &[Complex64], n: usize, kappa: usize, z: Complex64) -> Result<Complex64> {
    check_data(m, d, n)?;
    if n < 2 || kappa < 1 || kappa > n - 1 {
        return Err(Error::invalid("kappa must lie in [1, n-1]"));
    }
    let r = n + 1 - kappa;
    let adj = higher_adjugate(&d_matrix(d, n), r)?;
    let seqs = index_sequences(n + 1, r);
    let mut total = Complex64::zero();
    for (bi, beta) in seqs.iter().enumerate() {
        if !beta.contains(1) {
            continue;
        }
        for (gi, gamma) in seqs.iter().enumerate() {
            let w = adj[(gi, bi)];
            if w.is_zero() {
                continue;
            }
            total += w * gamma_beta_gamma(m, n, kappa, beta, gamma, z)?;
        }
    }
    Ok(total)
}

/// `(−1)ⁿ ∏α_k ∏_{m<l} (x_l − x_m)² ∏_m (z − x_m)`.
pub fn pbar_product_form(signal: &Signal, z: Complex64) -> Complex64 {
    pbar_factor(signal) * signal.nodes.iter().map(|x| z - x).product::<Complex64>()
}

fn pbar_factor(signal: &Signal) -> Complex64 {
    let n = signal.n();
    let mut c: Complex64 = signal.amplitudes.iter().product();
    for l in 0..n {
        for m in 0..l {
            let diff = signal.nodes[l] - signal.nodes[m];
            c *= diff * diff;
        }
    }
    if n % 2 == 1 {
        -c
    } else {
        c
    }
}

/// First-order node error constant of node `j`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FirstOrderEntry {
    pub j: usize,
    /// Extrapolated `lim (x_j − x̃_j)/ε`.
    pub c: Complex64,
    /// `θ_n(x_j) / p̄′(x_j)`, the implicit-function value of the same limit.
    pub c_implicit: Complex64,
    /// Relative disagreement of the last two extrapolation levels.
    pub extrapolation_defect: f64,
    /// `|α_j|⁻¹ δ^{2−2ℓ_t}`.
    pub bound: f64,
    /// `|c| / bound`.
    pub constant: f64,
    pub eps: [f64; 3],
    /// `(x_j − x̃_j(ε))/ε` for each entry of `eps`.
    pub quotients: [Complex64; 3],
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FirstOrderReport {
    pub entries: Vec<FirstOrderEntry>,
    /// Largest relative failure of `c_j(D₁ + D₂) = c_j(D₁) + c_j(D₂)`.
    pub linearity_defect: f64,
}

/// Root branch `x̃_j(ε)` of `det(G + εD)` tracked from `x_j`.
///
/// `q̄` is evaluated through its ε-expansion with `p̄` in product form, so
/// the `O(ε)` shift is resolved to full relative precision; the unknown is
/// the offset `w = x_j − z`.
struct Branch<'a> {
    signal: &'a Signal,
    adj: Vec<ComplexMatrix>,
    moments: MomentVector,
    factor: Complex64,
    j: usize,
}

impl<'a> Branch<'a> {
    fn new(signal: &'a Signal, d: &[Complex64], j: usize) -> Result<Self> {
        let n = signal.n();
        if j >= n {
            return Err(Error::invalid(format!("node index {j} out of range")));
        }
        if d.len() < 2 * n {
            return Err(Error::invalid(format!("need {} tolerance coefficients", 2 * n)));
        }
        Ok(Self {
            signal,
            adj: adjugates(&d_matrix(d, n)),
            moments: signal.moments(2 * n),
            factor: pbar_factor(signal),
            j,
        })
    }

    /// `p̄(x_j − w)` and `d/dw p̄(x_j − w)`.
    fn pbar(&self, w: Complex64) -> (Complex64, Complex64) {
        let xj = self.signal.nodes[self.j];
        let z = xj - w;
        let mut rest = Complex64::one();
        let mut rest_der = Complex64::zero();
        for (m, x) in self.signal.nodes.iter().enumerate() {
            if m == self.j {
                continue;
            }
            let f = z - x;
            rest_der = rest_der * f + rest;
            rest *= f;
        }
        // p̄ = factor · (−w) · rest(z),  d/dw = −factor · (rest + (−w)·rest′)
        (self.factor * (-w) * rest, -self.factor * (rest - w * rest_der))
    }

    /// `θ_n, θ_{n−1}, …, θ_0` at `z` (coefficients of `ε^1..ε^{n+1}`).
    fn higher_terms(&self, z: Complex64) -> Vec<Complex64> {
        let n = self.signal.n();
        let g = g_matrix(&self.moments.values, z, n);
        (1..=n + 1)
            .map(|kappa| {
                let r = n + 1 - kappa;
                trace_product(&self.adj[r], &compound(&g, r).expect("order within range"))
            })
            .collect()
    }

    fn solve(&self, eps: f64) -> Result<Complex64> {
        let xj = self.signal.nodes[self.j];
        let mut w = Complex64::zero();
        for _ in 0..200 {
            let (p, dp) = self.pbar(w);
            let mut value = p;
            let mut e = eps;
            for t in self.higher_terms(xj - w) {
                value += t * e;
                e *= eps;
            }
            if value.is_zero() {
                return Ok(w);
            }
            let step = value / dp;
            if !(step.re.is_finite() && step.im.is_finite()) {
                break;
            }
            w -= step;
            if step.norm() <= 1e-15 * w.norm() {
                return Ok(w);
            }
        }
        Err(Error::Estimator(format!(
            "root tracking for node {} did not converge at eps = {eps:.3e}",
            self.j
        )))
    }
}

/// Richardson-extrapolated `lim_{ε→0⁺} (x_j − x̃_j(ε))/ε` over the step
/// sequence `FIRST_ORDER_STEPS · δ^{2ℓ*−1}`.
pub fn first_order_constant(signal: &Signal, d: &[Complex64], j: usize) -> Result<FirstOrderEntry> {
    let branch = Branch::new(signal, d, j)?;
    let cfg = &signal.config;
    let base = cfg.delta.powi(2 * cfg.ell_star as i32 - 1);
    let eps = FIRST_ORDER_STEPS.map(|s| s * base);
    let mut quotients = [Complex64::zero(); 3];
    for (q, &e) in quotients.iter_mut().zip(&eps) {
        *q = branch.solve(e)? / e;
    }
    // steps halve, so each level removes one power of ε
    let r1a = quotients[1] * 2.0 - quotients[0];
    let r1b = quotients[2] * 2.0 - quotients[1];
    let c = (r1b * 4.0 - r1a) / 3.0;
    let scale = c.norm().max(quotients.iter().map(|q| q.norm()).fold(0.0, f64::max));
    let extrapolation_defect = if scale > 0.0 { (c - r1b).norm() / scale } else { 0.0 };
    if !(extrapolation_defect <= EXTRAPOLATION_TOLERANCE) {
        return Err(Error::Estimator(format!(
            "extrapolation for node {j} did not settle: defect {extrapolation_defect:.2e}, quotients {quotients:?}"
        )));
    }
    let xj = signal.nodes[j];
    let (_, dp) = branch.pbar(Complex64::zero());
    let theta_n = branch.higher_terms(xj)[0];
    // dp is d/dw at w = 0, i.e. −p̄′(x_j)
    let c_implicit = theta_n / (-dp);
    let ell_t = cfg.cluster_size_of(j) as i32;
    let bound = cfg.delta.powi(2 - 2 * ell_t) / signal.amplitudes[j].norm();
    Ok(FirstOrderEntry {
        j,
        c,
        c_implicit,
        extrapolation_defect,
        bound,
        constant: c.norm() / bound,
        eps,
        quotients,
    })
}

/// Constants for every node under `d1`, plus the additivity check with `d2`.
pub fn first_order_report(signal: &Signal, d1: &[Complex64], d2: &[Complex64]) -> Result<FirstOrderReport> {
    let n = signal.n();
    if d2.len() < 2 * n || d1.len() < 2 * n {
        return Err(Error::invalid(format!("need {} tolerance coefficients", 2 * n)));
    }
    let sum: Vec<Complex64> = d1.iter().zip(d2).map(|(a, b)| a + b).collect();
    let mut entries = Vec::with_capacity(n);
    let mut linearity_defect: f64 = 0.0;
    for j in 0..n {
        let e1 = first_order_constant(signal, d1, j)?;
        let c2 = first_order_constant(signal, d2, j)?.c;
        let c12 = first_order_constant(signal, &sum, j)?.c;
        let denom = c12.norm().max(e1.c.norm() + c2.norm());
        if denom > 0.0 {
            linearity_defect = linearity_defect.max((c12 - e1.c - c2).norm() / denom);
        }
        entries.push(e1);
    }
    Ok(FirstOrderReport {
        entries,
        linearity_defect,
    })
}

/// `Σ_{ν ∈ C_b} α_ν ∏_{m≠j} (x_ν − x̃_m)/(x̃_j − x̃_m)` for a node `j`
/// outside cluster `b`; `recovered[t]` must estimate true node `t`.
pub fn cluster_discrepancy(signal: &Signal, recovered: &[Complex64], j: usize, b: usize) -> Result<Complex64> {
    let n = signal.n();
    if recovered.len() != n || j >= n {
        return Err(Error::invalid("recovered nodes must be matched to the truth"));
    }
    let block = signal
        .config
        .partition
        .get(b)
        .ok_or_else(|| Error::invalid(format!("cluster index {b} out of range")))?;
    if block.contains(&j) {
        return Err(Error::invalid(format!("node {j} belongs to cluster {b}")));
    }
    let mut den = Complex64::one();
    for (m, xm) in recovered.iter().enumerate() {
        if m == j {
            continue;
        }
        let gap = recovered[j] - xm;
        if !(gap.norm() > singular_threshold(1.0)) {
            return Err(Error::Singular {
                pivot: m,
                magnitude: gap.norm(),
            });
        }
        den *= gap;
    }
    let mut total = Complex64::zero();
    for &nu in block {
        let num: Complex64 = recovered
            .iter()
            .enumerate()
            .filter(|&(m, _)| m != j)
            .map(|(_, xm)| signal.nodes[nu] - xm)
            .product();
        total += signal.amplitudes[nu] * num;
    }
    Ok(total / den)
}

/// Sample points `count` equispaced on the circle of radius `radius`.
pub fn circle_samples(count: usize, radius: f64, phase: f64) -> Vec<Complex64> {
    (0..count)
        .map(|k| Complex64::from_polar(radius, phase + 2.0 * PI * k as f64 / count as f64))
        .collect()
}

/// Helper for tests and reports: every `(β, γ)` pair entering `θ_{n+1−κ}`.
pub fn gamma_index_pairs(n: usize, kappa: usize) -> Vec<(IndexSequence, IndexSequence)> {
    let seqs = index_sequences(n + 1, n + 1 - kappa);
    let mut out = vec![];
    for beta in seqs.iter().filter(|b| b.contains(1)) {
        for gamma in &seqs {
            out.push((beta.clone(), gamma.clone()));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ClusterRequest, NoiseSpec};
    use crate::recovery::homogeneous_polynomial;
    use crate::rootfind::MonicPolynomial;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn instance(sizes: Vec<usize>, delta: f64, seed: u64) -> (Signal, Vec<Complex64>) {
        let s = Signal::generate(&ClusterRequest::new(sizes, delta, seed)).unwrap();
        let d = NoiseSpec::seeded(1.0, seed + 100).coefficients(2 * s.n());
        (s, d)
    }

    #[test]
    fn smallest_g_and_d() {
        let m = [c(2.0, 0.0), c(3.0, 0.0)];
        let d = [c(0.5, 0.0), c(0.25, 0.0)];
        let z = c(0.0, 1.0);
        let (g, dm) = build_g_and_d(&m, &d, z, 1).unwrap();
        assert_eq!(g.row(0), &[c(1.0, 0.0), z]);
        assert_eq!(g.row(1), &m);
        assert_eq!(dm.row(0), &[c(0.0, 0.0); 2]);
        assert_eq!(dm.row(1), &d);
    }

    #[test]
    fn det_g_is_homogeneous_polynomial() {
        let (s, d) = instance(vec![2, 1], 0.1, 1);
        let m = s.moments(6);
        let qbar = homogeneous_polynomial(&m, 3).unwrap();
        for z in circle_samples(5, 0.9, 0.3) {
            let (g, _) = build_g_and_d(&m.values, &d, z, 3).unwrap();
            let direct = det(&g);
            let poly: Complex64 = qbar.iter().rev().fold(Complex64::zero(), |acc, q| acc * z + q);
            assert!((direct - poly).norm() <= 1e-12 * poly.norm().max(1e-3));
        }
    }

    #[test]
    fn zero_perturbation_expansion() {
        let (s, _) = instance(vec![1, 1, 1], 0.1, 2);
        let m = s.moments(6);
        let d = vec![Complex64::zero(); 6];
        let z = circle_samples(4, 1.1, 0.2);
        let eps = chebyshev_points(1e-4, 1e-1, 6);
        let rep = verify_expansion(&m, &d, 3, &z, &eps).unwrap();
        for th in &rep.theta {
            assert!(th[1..].iter().all(|t| t.is_zero()));
        }
        assert!(rep.max_rel_err <= 1e-12, "{:e}", rep.max_rel_err);
    }

    #[test]
    fn random_expansion_matches() {
        for n in 2..=4 {
            let (s, d) = instance(vec![1; n], 0.1, n as u64);
            let m = s.moments(2 * n);
            let z = circle_samples(5, 1.0, 0.1);
            let eps = default_eps_samples(&m.values, &d, n, &z).unwrap();
            let rep = verify_expansion(&m, &d, n, &z, &eps).unwrap();
            assert!(rep.max_rel_err <= 1e-8, "n = {n}: {:e}", rep.max_rel_err);
            assert!(rep.det_d_rel_err <= 1e-10, "n = {n}: {:e}", rep.det_d_rel_err);
            for (th, zv) in rep.theta.iter().zip(&z) {
                let p = pbar_product_form(&s, *zv);
                assert!((th[0] - p).norm() <= 1e-10 * p.norm());
                assert_eq!(th[n + 1], rep.det_d);
            }
        }
    }

    #[test]
    fn clustered_eps_samples_rejected() {
        let (s, d) = instance(vec![1, 1], 0.1, 3);
        let m = s.moments(4);
        let eps = [1e-3, 1e-3 * (1.0 + 1e-9), 1e-3 * (1.0 + 2e-9), 1e-3 * (1.0 + 3e-9)];
        assert!(matches!(
            verify_expansion(&m, &d, 2, &[c(1.0, 0.0)], &eps),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn gamma_equals_compound_entry() {
        let (s, _) = instance(vec![2, 1, 1], 0.05, 4);
        let n = 4;
        let m = s.moments(2 * n);
        let z = c(0.3, -0.8);
        let g = g_matrix(&m.values, z, n);
        for kappa in 1..n {
            let r = n + 1 - kappa;
            let comp = compound(&g, r).unwrap();
            let seqs = index_sequences(n + 1, r);
            for (beta, gamma) in gamma_index_pairs(n, kappa) {
                let bi = seqs.iter().position(|x| *x == beta).unwrap();
                let gi = seqs.iter().position(|x| *x == gamma).unwrap();
                let v = gamma_beta_gamma(&m.values, n, kappa, &beta, &gamma, z).unwrap();
                assert!((v - comp[(bi, gi)]).norm() <= 1e-12 * comp[(bi, gi)].norm().max(1.0));
            }
        }
    }

    #[test]
    fn gamma_reassembles_theta() {
        let (s, d) = instance(vec![1, 1, 1], 0.1, 5);
        let n = 3;
        let m = s.moments(6);
        let z = c(-0.4, 0.7);
        let (g, dm) = build_g_and_d(&m.values, &d, z, n).unwrap();
        let th = theta_coefficients(&g, &dm).unwrap();
        for kappa in 1..n {
            let v = theta_via_gamma(&m.values, &d, n, kappa, z).unwrap();
            assert!((v - th[kappa]).norm() <= 1e-9 * th[kappa].norm().max(1e-12));
        }
        // κ = n: first column of the classical adjugate of D
        let adj = higher_adjugate(&dm, 1).unwrap();
        let expect: Complex64 = (0..=n).map(|i| adj[(i, 0)] * z.powu(i as u32)).sum();
        assert!((th[n] - expect).norm() <= 1e-12 * expect.norm().max(1.0));
    }

    #[test]
    fn gamma_argument_checks() {
        let m = vec![c(1.0, 0.0); 6];
        let b = IndexSequence::new(vec![2, 3], 4).unwrap();
        let g = IndexSequence::new(vec![1, 2], 4).unwrap();
        assert!(gamma_beta_gamma(&m, 3, 2, &b, &g, c(1.0, 0.0)).is_err());
        assert!(gamma_beta_gamma(&m, 3, 3, &g, &g, c(1.0, 0.0)).is_err());
        assert!(gamma_beta_gamma(&m, 3, 1, &g, &g, c(1.0, 0.0)).is_err());
    }

    #[test]
    fn first_order_single_node_closed_form() {
        let x = Complex64::from_polar(1.0, 0.9);
        let alpha = c(0.8, -0.3);
        let s = Signal::from_parts(vec![x], vec![alpha]).unwrap();
        let d = [c(0.3, 0.4), c(-0.5, 0.2)];
        let e = first_order_constant(&s, &d, 0).unwrap();
        let exact = (x * d[0] - d[1]) / alpha;
        assert!((e.c - exact).norm() <= 1e-6 * exact.norm(), "{} vs {}", e.c, exact);
        assert!((e.c_implicit - exact).norm() <= 1e-12 * exact.norm());
    }

    #[test]
    fn first_order_zero_perturbation() {
        let (s, _) = instance(vec![2, 1], 1e-2, 6);
        let e = first_order_constant(&s, &[Complex64::zero(); 6], 0).unwrap();
        assert_eq!(e.c, Complex64::zero());
    }

    #[test]
    fn first_order_matches_implicit_and_is_linear() {
        let (s, d1) = instance(vec![2, 1], 1e-2, 7);
        let d2 = NoiseSpec::seeded(1.0, 77).coefficients(6);
        let rep = first_order_report(&s, &d1, &d2).unwrap();
        assert!(rep.linearity_defect <= 1e-4, "{:e}", rep.linearity_defect);
        for e in &rep.entries {
            assert!((e.c - e.c_implicit).norm() <= 1e-6 * e.c.norm(), "{e:?}");
        }
    }

    #[test]
    fn first_order_matches_actual_root_shift() {
        let (s, d) = instance(vec![2, 1], 5e-2, 8);
        let e = first_order_constant(&s, &d, 0).unwrap();
        // moderate ε where direct root finding is accurate enough
        let eps = 1e-9;
        let m = s.moments(6);
        let noisy = MomentVector::new(m.values.iter().zip(&d).map(|(a, b)| a + b * eps).collect());
        let q = MonicPolynomial::from_general(&homogeneous_polynomial(&noisy, 3).unwrap()).unwrap();
        let mut z = s.nodes[0];
        for _ in 0..20 {
            let (p, dp) = q.eval_with_derivative(z);
            z -= p / dp;
        }
        let measured = (s.nodes[0] - z) / eps;
        assert!((measured - e.c).norm() <= 1e-2 * e.c.norm());
    }

    #[test]
    fn discrepancy_vanishes_on_exact_recovery() {
        let (s, _) = instance(vec![2, 1], 1e-2, 9);
        let v = cluster_discrepancy(&s, &s.nodes, 2, 0).unwrap();
        assert_eq!(v, Complex64::zero());
        assert!(cluster_discrepancy(&s, &s.nodes, 0, 0).is_err());
        let mut coincident = s.nodes.clone();
        coincident[1] = coincident[2];
        assert!(matches!(cluster_discrepancy(&s, &coincident, 2, 0), Err(Error::Singular { .. })));
    }
}
