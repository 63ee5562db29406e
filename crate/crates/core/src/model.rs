//! Signals, clustered node configurations, moments and bounded noise.
//!
//! Nodes live on the unit circle. A clustered configuration partitions the
//! nodes into blocks whose members are between `δ` and `τδ` apart, while
//! nodes of different blocks are between `T` and `ηT` apart.
//!
//! Random instances place the cluster centers equispaced on the circle
//! (with a random global rotation) and lay the members of each cluster along
//! the circle with consecutive chord lengths `δ·(1 + u)`, `u` uniform in
//! `[0, max_jitter]`. All randomness flows from one explicit seed.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
// Needed without std; std builds resolve these as inherent methods.
#[allow(unused_imports)]
use num_traits::Float;
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

/// Default lower bound on `|α_j|`.
pub const DEFAULT_AMP_LO: f64 = 0.5;
/// Default upper bound on `|α_j|`.
pub const DEFAULT_AMP_HI: f64 = 1.5;
/// Default maximal relative jitter of intra-cluster spacings.
pub const DEFAULT_MAX_JITTER: f64 = 0.5;

const UNIT_TOL: f64 = 1e-12;

/// Partition of the node indices into clusters plus the geometry constants
/// certifying the clustered configuration.
///
/// `partition` holds 0-based node indices.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ClusterConfig {
    pub n: usize,
    pub partition: Vec<Vec<usize>>,
    pub delta: f64,
    pub tau: f64,
    #[cfg_attr(feature = "serde", serde(rename = "bigT"))]
    pub big_t: f64,
    pub eta: f64,
    pub ell_star: usize,
}

impl ClusterConfig {
    /// Checks the structural invariants (partition, parameter ranges).
    pub fn validate(&self) -> Result<()> {
        let mut seen = vec![false; self.n];
        for block in &self.partition {
            if block.is_empty() {
                return Err(Error::invalid("empty cluster"));
            }
            for &j in block {
                if j >= self.n || seen[j] {
                    return Err(Error::invalid("partition is not a disjoint cover of the nodes"));
                }
                seen[j] = true;
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::invalid("partition does not cover every node"));
        }
        let ell = self.partition.iter().map(Vec::len).max().unwrap_or(0);
        if ell != self.ell_star {
            return Err(Error::invalid("ell_star must equal the largest cluster size"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::invalid("delta must lie in (0, 1)"));
        }
        if !(self.tau > 1.0 && self.eta > 1.0) {
            return Err(Error::invalid("tau and eta must exceed 1"));
        }
        if !(self.big_t > self.tau * self.delta) {
            return Err(Error::invalid("T must exceed tau * delta"));
        }
        Ok(())
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        self.partition.iter().map(Vec::len).collect()
    }

    /// Index of the block containing node `j`.
    pub fn cluster_of(&self, j: usize) -> usize {
        self.partition
            .iter()
            .position(|b| b.contains(&j))
            .expect("node index is covered by the partition")
    }

    /// Cardinality `ℓ_t` of the block containing node `j`.
    pub fn cluster_size_of(&self, j: usize) -> usize {
        self.partition[self.cluster_of(j)].len()
    }
}

/// Exponential sum `m_k = Σ α_j x_j^k` with nodes on the unit circle.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Signal {
    pub nodes: Vec<Complex64>,
    pub amplitudes: Vec<Complex64>,
    pub config: ClusterConfig,
    pub amp_lo: f64,
    pub amp_hi: f64,
}

/// Parameters for [`Signal::generate`].
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterRequest {
    pub n: usize,
    pub cluster_sizes: Vec<usize>,
    pub delta: f64,
    pub seed: u64,
    pub amp_lo: f64,
    pub amp_hi: f64,
    pub max_jitter: f64,
}

impl ClusterRequest {
    pub fn new(cluster_sizes: Vec<usize>, delta: f64, seed: u64) -> Self {
        Self {
            n: cluster_sizes.iter().sum(),
            cluster_sizes,
            delta,
            seed,
            amp_lo: DEFAULT_AMP_LO,
            amp_hi: DEFAULT_AMP_HI,
            max_jitter: DEFAULT_MAX_JITTER,
        }
    }
}

impl Signal {
    /// Random clustered signal; see the module docs for the placement rule.
    pub fn generate(req: &ClusterRequest) -> Result<Self> {
        if req.n < 1 {
            return Err(Error::invalid("n must be at least 1"));
        }
        if req.cluster_sizes.is_empty() || req.cluster_sizes.contains(&0) {
            return Err(Error::invalid("cluster_sizes must be non-empty and positive"));
        }
        let total: usize = req.cluster_sizes.iter().sum();
        if total != req.n {
            return Err(Error::invalid(format!(
                "cluster sizes sum to {total} but n = {}",
                req.n
            )));
        }
        if !(req.delta > 0.0 && req.delta < 1.0) {
            return Err(Error::invalid("delta must lie in (0, 1)"));
        }
        if !(req.amp_lo > 0.0 && req.amp_lo <= req.amp_hi) {
            return Err(Error::invalid("amplitude bounds must satisfy 0 < lo <= hi"));
        }
        if !(0.0..=1.0).contains(&req.max_jitter) {
            return Err(Error::invalid("max_jitter must lie in [0, 1]"));
        }

        let zeta = req.cluster_sizes.len();
        let ell_star = *req.cluster_sizes.iter().max().unwrap();
        let tau = ((ell_star.max(2) - 1) as f64 * (1.0 + req.max_jitter)).max(1.0 + 2.0 * req.max_jitter);
        let tau = if tau > 1.0 { tau } else { 1.5 };
        let center_arc = 2.0 * PI / zeta as f64;
        if zeta > 1 && req.delta * tau * ell_star as f64 >= center_arc {
            return Err(Error::Geometry(format!(
                "delta*tau*ell_star = {:.3e} exceeds the inter-center arc {:.3e}",
                req.delta * tau * ell_star as f64,
                center_arc
            )));
        }
        if req.delta * tau >= 1.0 {
            return Err(Error::Geometry(format!("cluster spread tau*delta = {:.3e} is not small", req.delta * tau)));
        }

        let mut rng = ChaCha8Rng::seed_from_u64(req.seed);
        let rotation = rng.gen_range(0.0..2.0 * PI);
        let mut angles = Vec::with_capacity(req.n);
        let mut partition = Vec::with_capacity(zeta);
        for (s, &size) in req.cluster_sizes.iter().enumerate() {
            let center = rotation + center_arc * s as f64;
            let mut offsets = vec![0.0];
            for _ in 1..size {
                let chord = req.delta * (1.0 + rng.gen_range(0.0..=req.max_jitter));
                let step = 2.0 * (chord / 2.0).asin();
                offsets.push(offsets.last().unwrap() + step);
            }
            let mid = offsets.last().unwrap() / 2.0;
            let start = angles.len();
            angles.extend(offsets.iter().map(|o| center + o - mid));
            partition.push((start..start + size).collect::<Vec<_>>());
        }
        let nodes: Vec<Complex64> = angles.iter().map(|&a| Complex64::from_polar(1.0, a)).collect();
        let amplitudes: Vec<Complex64> = (0..req.n)
            .map(|_| {
                let modulus = rng.gen_range(req.amp_lo..=req.amp_hi);
                let phase = rng.gen_range(0.0..2.0 * PI);
                Complex64::from_polar(modulus, phase)
            })
            .collect();

        let (big_t, eta) = inter_cluster_constants(&nodes, &partition);
        if !(big_t > tau * req.delta) {
            return Err(Error::Geometry(format!(
                "inter-cluster distance {big_t:.3e} does not exceed tau*delta = {:.3e}",
                tau * req.delta
            )));
        }
        let signal = Self {
            nodes,
            amplitudes,
            config: ClusterConfig {
                n: req.n,
                partition,
                delta: req.delta,
                tau,
                big_t,
                eta,
                ell_star,
            },
            amp_lo: req.amp_lo,
            amp_hi: req.amp_hi,
        };
        signal.validate()?;
        Ok(signal)
    }

    /// Signal with every node in its own cluster; geometry constants are
    /// derived from the pairwise distances.
    pub fn from_parts(nodes: Vec<Complex64>, amplitudes: Vec<Complex64>) -> Result<Self> {
        let n = nodes.len();
        if n == 0 || amplitudes.len() != n {
            return Err(Error::invalid("need equally many (at least one) nodes and amplitudes"));
        }
        let partition: Vec<Vec<usize>> = (0..n).map(|j| vec![j]).collect();
        let (big_t, eta) = inter_cluster_constants(&nodes, &partition);
        let min_sep = if n > 1 { big_t } else { 2.0 };
        let tau = 2.0;
        let delta = (min_sep / 4.0).min(0.5);
        let amp_lo = amplitudes.iter().map(|a| a.norm()).fold(f64::INFINITY, f64::min);
        let amp_hi = amplitudes.iter().map(|a| a.norm()).fold(0.0, f64::max);
        let signal = Self {
            nodes,
            amplitudes,
            config: ClusterConfig {
                n,
                partition,
                delta,
                tau,
                big_t,
                eta,
                ell_star: 1,
            },
            amp_lo,
            amp_hi,
        };
        signal.validate()?;
        Ok(signal)
    }

    pub fn n(&self) -> usize {
        self.nodes.len()
    }

    /// Checks every Signal invariant by exhaustive pair enumeration.
    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if self.amplitudes.len() != n || self.config.n != n {
            return Err(Error::invalid("node, amplitude and config sizes disagree"));
        }
        self.config.validate()?;
        if let Some(x) = self.nodes.iter().find(|x| (x.norm() - 1.0).abs() > UNIT_TOL) {
            return Err(Error::invalid(format!("node {x} is not on the unit circle")));
        }
        let slack = 1.0 + 1e-12;
        for (j, a) in self.amplitudes.iter().enumerate() {
            let m = a.norm();
            if m * slack < self.amp_lo || m > self.amp_hi * slack {
                return Err(Error::invalid(format!("amplitude {j} violates the bounds")));
            }
        }
        let c = &self.config;
        for i in 0..n {
            for j in i + 1..n {
                let d = (self.nodes[i] - self.nodes[j]).norm();
                let ok = if c.cluster_of(i) == c.cluster_of(j) {
                    d * slack >= c.delta && d <= c.tau * c.delta * slack
                } else {
                    d * slack >= c.big_t && d <= c.eta * c.big_t * slack
                };
                if !ok {
                    return Err(Error::Geometry(format!("pair ({i}, {j}) at distance {d:.3e} violates the cluster bounds")));
                }
            }
        }
        Ok(())
    }

    /// Exact moments `m_0..m_{count-1}`.
    pub fn moments(&self, count: usize) -> MomentVector {
        let mut values = vec![Complex64::zero(); count];
        for (x, a) in self.nodes.iter().zip(&self.amplitudes) {
            let mut term = *a;
            for v in values.iter_mut() {
                *v += term;
                term *= x;
            }
        }
        MomentVector { values }
    }
}

fn inter_cluster_constants(nodes: &[Complex64], partition: &[Vec<usize>]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for (s, a) in partition.iter().enumerate() {
        for b in &partition[s + 1..] {
            for &i in a {
                for &j in b {
                    let d = (nodes[i] - nodes[j]).norm();
                    lo = lo.min(d);
                    hi = hi.max(d);
                }
            }
        }
    }
    if !lo.is_finite() {
        // single cluster: the inter-cluster conditions are vacuous
        return (2.0, 1.0f64.next_up());
    }
    (lo, (hi / lo).max(1.0).next_up())
}

/// Moments of `signal`: `values[k] = Σ_j α_j x_j^k`, `k < count`.
pub fn moments_of(signal: &Signal, count: usize) -> Result<MomentVector> {
    if count == 0 {
        return Err(Error::invalid("moment count must be positive"));
    }
    Ok(signal.moments(count))
}

/// Sequence of (possibly perturbed) moments `m_0..m_K`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct MomentVector {
    pub values: Vec<Complex64>,
}

impl MomentVector {
    pub fn new(values: Vec<Complex64>) -> Self {
        Self { values }
    }

    /// Highest moment index `K`.
    pub fn highest_index(&self) -> Option<usize> {
        self.values.len().checked_sub(1)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `m_0, m_λ, m_{2λ}, …` (`count` entries).
    pub fn decimated(&self, lambda: usize, count: usize) -> Option<MomentVector> {
        let last = lambda.checked_mul(count.checked_sub(1)?)?;
        if last >= self.values.len() {
            return None;
        }
        Some(MomentVector {
            values: (0..count).map(|k| self.values[k * lambda]).collect(),
        })
    }
}

impl AsRef<[Complex64]> for MomentVector {
    fn as_ref(&self) -> &[Complex64] {
        &self.values
    }
}

/// Bounded moment perturbation `m̃_i = m_i + ε d_i`, `|d_i| ≤ 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpec {
    pub epsilon: f64,
    pub tolerance_coeffs: Vec<Complex64>,
    pub seed: u64,
}

impl NoiseSpec {
    /// Coefficients drawn uniformly from the closed unit disk on demand.
    pub fn seeded(epsilon: f64, seed: u64) -> Self {
        Self {
            epsilon,
            tolerance_coeffs: Vec::new(),
            seed,
        }
    }

    pub fn explicit(epsilon: f64, coeffs: Vec<Complex64>) -> Result<Self> {
        if !(epsilon >= 0.0) {
            return Err(Error::invalid("epsilon must be non-negative"));
        }
        if coeffs.iter().any(|d| !(d.norm() <= 1.0 + 1e-15)) {
            return Err(Error::invalid("tolerance coefficients must satisfy |d_i| <= 1"));
        }
        Ok(Self {
            epsilon,
            tolerance_coeffs: coeffs,
            seed: 0,
        })
    }

    /// The first `len` coefficients: explicit ones when enough were given,
    /// otherwise `len` fresh draws from the seed.
    pub fn coefficients(&self, len: usize) -> Vec<Complex64> {
        if self.tolerance_coeffs.len() >= len {
            return self.tolerance_coeffs[..len].to_vec();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        (0..len).map(|_| unit_disk_sample(&mut rng)).collect()
    }
}

/// `output[i] = m_i + ε·d_i`; with `ε = 0` the input is returned unchanged.
pub fn perturb(moments: &MomentVector, noise: &NoiseSpec) -> MomentVector {
    if noise.epsilon == 0.0 {
        return moments.clone();
    }
    let d = noise.coefficients(moments.len());
    MomentVector {
        values: moments.values.iter().zip(&d).map(|(m, d)| m + d * noise.epsilon).collect(),
    }
}

/// Uniform sample from the closed complex unit disk.
pub fn unit_disk_sample<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let r = rng.gen::<f64>().sqrt();
    Complex64::from_polar(r, rng.gen_range(0.0..2.0 * PI))
}

/// Mixes a base seed with two stream indices (SplitMix64 finalizer).
pub fn derive_seed(base: u64, a: u64, b: u64) -> u64 {
    let mut z = base
        ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ b.wrapping_mul(0xC2B2_AE3D_27D4_EB4F).rotate_left(31);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn single_node_signal() {
        let s = Signal::generate(&ClusterRequest::new(vec![1], 0.1, 7)).unwrap();
        assert_eq!(s.n(), 1);
        assert!((s.nodes[0].norm() - 1.0).abs() < 1e-15);
        assert_eq!(s.config.ell_star, 1);
    }

    #[test]
    fn pair_plus_isolated_geometry() {
        let s = Signal::generate(&ClusterRequest::new(vec![2, 1], 1e-2, 1)).unwrap();
        let d01 = (s.nodes[0] - s.nodes[1]).norm();
        assert!(d01 >= 1e-2 * (1.0 - 1e-12) && d01 <= s.config.tau * 1e-2);
        for i in 0..2 {
            assert!((s.nodes[i] - s.nodes[2]).norm() >= s.config.big_t * (1.0 - 1e-12));
        }
        assert!(s.config.big_t > s.config.tau * s.config.delta);
    }

    #[test]
    fn ell_star_recorded() {
        let s = Signal::generate(&ClusterRequest::new(vec![3, 1], 1e-3, 2)).unwrap();
        assert_eq!(s.config.ell_star, 3);
        assert_eq!(s.config.cluster_size_of(3), 1);
        assert_eq!(s.config.cluster_size_of(0), 3);
    }

    #[test]
    fn generation_errors() {
        let mut req = ClusterRequest::new(vec![2, 1], 1e-2, 0);
        req.n = 4;
        assert!(matches!(Signal::generate(&req), Err(Error::InvalidArgument(_))));
        let req = ClusterRequest::new(vec![40, 40], 0.05, 0);
        assert!(matches!(Signal::generate(&req), Err(Error::Geometry(_))));
        let req = ClusterRequest::new(vec![], 0.05, 0);
        assert!(Signal::generate(&req).is_err());
        let req = ClusterRequest::new(vec![2], 1.5, 0);
        assert!(Signal::generate(&req).is_err());
    }

    #[test]
    fn same_seed_same_signal() {
        let req = ClusterRequest::new(vec![2, 2, 1], 3e-3, 99);
        assert_eq!(Signal::generate(&req).unwrap(), Signal::generate(&req).unwrap());
    }

    #[test]
    fn moments_small_cases() {
        let one = Signal::from_parts(vec![c(1.0, 0.0)], vec![c(1.0, 0.0)]).unwrap();
        assert_eq!(moments_of(&one, 4).unwrap().values, vec![c(1.0, 0.0); 4]);
        let pair = Signal::from_parts(vec![c(1.0, 0.0), c(-1.0, 0.0)], vec![c(1.0, 0.0), c(1.0, 0.0)]).unwrap();
        assert_eq!(
            moments_of(&pair, 4).unwrap().values,
            vec![c(2.0, 0.0), c(0.0, 0.0), c(2.0, 0.0), c(0.0, 0.0)]
        );
        assert!(moments_of(&pair, 0).is_err());
    }

    #[test]
    fn perturbation_formula() {
        let m = MomentVector::new(vec![c(1.0, 0.0), c(1.0, 0.0)]);
        let noise = NoiseSpec::explicit(0.1, vec![c(1.0, 0.0), c(-1.0, 0.0)]).unwrap();
        let out = perturb(&m, &noise);
        assert!((out.values[0] - 1.1).norm() < 1e-15 && (out.values[1] - 0.9).norm() < 1e-15);
        let zero = NoiseSpec::explicit(0.0, vec![c(1.0, 0.0), c(1.0, 0.0)]).unwrap();
        assert_eq!(perturb(&m, &zero), m);
        assert!(NoiseSpec::explicit(0.1, vec![c(2.0, 0.0)]).is_err());
    }

    #[test]
    fn seeded_noise_is_bounded() {
        let s = Signal::generate(&ClusterRequest::new(vec![2, 1], 1e-2, 3)).unwrap();
        let m = s.moments(6);
        let out = perturb(&m, &NoiseSpec::seeded(1e-8, 17));
        for (a, b) in out.values.iter().zip(&m.values) {
            assert!((a - b).norm() <= 1e-8 * (1.0 + 1e-12));
        }
        assert_eq!(out, perturb(&m, &NoiseSpec::seeded(1e-8, 17)));
    }

    #[test]
    fn decimated_view() {
        let m = MomentVector::new((0..10).map(|k| c(k as f64, 0.0)).collect());
        let d = m.decimated(3, 4).unwrap();
        assert_eq!(d.values, vec![c(0.0, 0.0), c(3.0, 0.0), c(6.0, 0.0), c(9.0, 0.0)]);
        assert!(m.decimated(3, 5).is_none());
    }
}
