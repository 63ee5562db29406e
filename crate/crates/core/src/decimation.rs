//! Decimated Prony: classical Prony on the subsampled moments
//! `m̃_0, m̃_λ, …, m̃_{(2n-1)λ}`, followed by undoing the `x ↦ x^λ` aliasing.
//!
//! The decimated problem returns `y_j ≈ x_j^λ` and the amplitudes directly
//! (they are unchanged by decimation). Each `y_j` has `λ` candidate λ-th
//! roots. A candidate is first chosen greedily as the one closest to the
//! undecimated (`λ = 1`) solution, then one coordinate pass over the nodes
//! re-picks each candidate to minimize the full-window residual
//! `Σ_k |Σ_j α_j x_j^k − m̃_k|²`. Among all `λ` the smallest full residual
//! wins.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
// Needed without std; std builds resolve these as inherent methods.
#[allow(unused_imports)]
use num_traits::Float;
use num_traits::Zero;

use crate::model::MomentVector;
use crate::recovery::{prony_classical, Method, RecoveryResult};
use crate::{Error, Result};

/// Bandwidth and decimation parameters to try.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DecimationPlan {
    pub omega: f64,
    pub lambdas: Vec<u32>,
}

impl DecimationPlan {
    /// Validates `λ ≥ 1` and `λ(2n−1) ≤ Ω` for every entry.
    pub fn new(omega: f64, lambdas: Vec<u32>, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("n must be at least 1"));
        }
        if !(omega >= (2 * n - 1) as f64) {
            return Err(Error::invalid(format!("omega = {omega} is below 2n-1 = {}", 2 * n - 1)));
        }
        if lambdas.is_empty() {
            return Err(Error::invalid("decimation plan needs at least one lambda"));
        }
        for &l in &lambdas {
            if l == 0 || (l as f64) * ((2 * n - 1) as f64) > omega {
                return Err(Error::invalid(format!(
                    "lambda = {l} is not admissible for omega = {omega}, n = {n}"
                )));
            }
        }
        Ok(Self { omega, lambdas })
    }

    /// Every integer `λ` in `[1, ⌊Ω/(2n−1)⌋]`.
    pub fn full(omega: f64, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("n must be at least 1"));
        }
        let max = (omega / (2 * n - 1) as f64).floor();
        if !(max >= 1.0) {
            return Err(Error::invalid(format!("omega = {omega} admits no lambda for n = {n}")));
        }
        Self::new(omega, (1..=max as u32).collect(), n)
    }

    /// Number of moments `⌊Ω⌋ + 1` in the full window.
    pub fn window(&self) -> usize {
        self.omega.floor() as usize + 1
    }

    /// Candidate λ-th roots considered per decimated root.
    pub fn candidates_per_root(lambda: u32) -> usize {
        lambda as usize
    }
}

/// Runs the plan and returns the best lifted solution; `lambda` records the
/// winner and `residual_moments` is measured on the winner's decimated
/// samples.
pub fn decimated_prony(m_full: &MomentVector, n: usize, plan: &DecimationPlan, project: bool) -> Result<RecoveryResult> {
    let window = plan.window().min(m_full.len());
    for &l in &plan.lambdas {
        let need = l as usize * (2 * n - 1) + 1;
        if m_full.len() < need {
            return Err(Error::invalid(format!(
                "lambda = {l} needs {need} moments, got {}",
                m_full.len()
            )));
        }
    }
    let full = &m_full.values[..window.max(2 * n)];
    let anchor = prony_classical(m_full, n, false).ok().map(|r| r.nodes_raw);

    let mut failures = Vec::new();
    let mut best: Option<(f64, RecoveryResult)> = None;
    for &l in &plan.lambdas {
        match solve_one(m_full, full, n, l, project, anchor.as_deref()) {
            Ok((score, result)) => {
                if best.as_ref().is_none_or(|(s, _)| score < *s) {
                    best = Some((score, result));
                }
            }
            Err(e) => failures.push((l, e)),
        }
    }
    best.map(|(_, r)| r).ok_or(Error::AllLambdasFailed(failures))
}

fn solve_one(
    m_full: &MomentVector,
    full: &[Complex64],
    n: usize,
    lambda: u32,
    project: bool,
    anchor: Option<&[Complex64]>,
) -> Result<(f64, RecoveryResult)> {
    let sub = m_full
        .decimated(lambda as usize, 2 * n)
        .ok_or_else(|| Error::invalid("not enough moments for decimation"))?;
    let mut result = prony_classical(&sub, n, project)?;
    result.method = Method::Decimated;
    result.lambda = Some(lambda);
    if lambda == 1 {
        let score = window_residual(&result.nodes_used, &result.amplitudes, full);
        return Ok((score, result));
    }

    let cands: Vec<Vec<Complex64>> = result.nodes_used.iter().map(|y| lambda_roots(*y, lambda)).collect();
    let mut pick: Vec<usize> = cands
        .iter()
        .map(|cs| match anchor {
            Some(a) => argmin(cs.iter().map(|c| a.iter().map(|x| (c - x).norm()).fold(f64::INFINITY, f64::min))),
            None => 0,
        })
        .collect();
    let mut nodes: Vec<Complex64> = pick.iter().zip(&cands).map(|(&s, cs)| cs[s]).collect();
    let mut score = window_residual(&nodes, &result.amplitudes, full);
    for j in 0..n {
        for s in 0..cands[j].len() {
            if s == pick[j] {
                continue;
            }
            let keep = nodes[j];
            nodes[j] = cands[j][s];
            let trial = window_residual(&nodes, &result.amplitudes, full);
            if trial < score {
                score = trial;
                pick[j] = s;
            } else {
                nodes[j] = keep;
            }
        }
    }
    // raw nodes follow the same branch choice as the used ones
    result.nodes_raw = result
        .nodes_raw
        .iter()
        .zip(&pick)
        .map(|(y, &s)| lambda_roots(*y, lambda)[s])
        .collect();
    result.nodes_used = nodes;
    Ok((score, result))
}

/// The `λ` complex λ-th roots of `y`, principal branch first.
pub fn lambda_roots(y: Complex64, lambda: u32) -> Vec<Complex64> {
    let l = lambda as f64;
    let r = y.norm().powf(1.0 / l);
    let theta = y.arg();
    (0..lambda)
        .map(|s| Complex64::from_polar(r, (theta + 2.0 * PI * s as f64) / l))
        .collect()
}

/// `Σ_k |Σ_j α_j x_j^k − m_k|²` over the given window.
pub fn window_residual(nodes: &[Complex64], amplitudes: &[Complex64], window: &[Complex64]) -> f64 {
    let mut terms: Vec<Complex64> = amplitudes.to_vec();
    let mut total = 0.0;
    for m in window {
        let mut acc = Complex64::zero();
        for (t, x) in terms.iter_mut().zip(nodes) {
            acc += *t;
            *t *= x;
        }
        total += (acc - m).norm_sqr();
    }
    total
}

fn argmin(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::INFINITY);
    for (i, v) in values.enumerate() {
        if v < best.1 {
            best = (i, v);
        }
    }
    best.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{perturb, ClusterRequest, NoiseSpec, Signal};
    use alloc::vec;

    #[test]
    fn plan_validation() {
        assert!(DecimationPlan::new(10.0, vec![3], 2).is_ok());
        assert!(DecimationPlan::new(10.0, vec![4], 2).is_err());
        assert!(DecimationPlan::new(10.0, vec![0], 1).is_err());
        assert_eq!(DecimationPlan::full(20.0, 2).unwrap().lambdas, vec![1, 2, 3, 4, 5, 6]);
    }

    #[test]
    fn lambda_one_matches_classical() {
        let s = Signal::generate(&ClusterRequest::new(vec![2, 1], 1e-2, 3)).unwrap();
        let m = perturb(&s.moments(21), &NoiseSpec::seeded(1e-10, 4));
        let plan = DecimationPlan::new(20.0, vec![1], 3).unwrap();
        let d = decimated_prony(&m, 3, &plan, false).unwrap();
        let c = prony_classical(&m, 3, false).unwrap();
        assert_eq!(d.nodes_used, c.nodes_used);
        assert_eq!(d.amplitudes, c.amplitudes);
        assert_eq!(d.lambda, Some(1));
    }

    #[test]
    fn single_node_lifting() {
        let x = Complex64::from_polar(1.0, 2.0 * PI * 0.1);
        let s = Signal::from_parts(vec![x], vec![Complex64::new(1.0, 0.0)]).unwrap();
        let m = s.moments(11);
        let plan = DecimationPlan::new(10.0, vec![3], 1).unwrap();
        let r = decimated_prony(&m, 1, &plan, false).unwrap();
        assert!((r.nodes_used[0] - x).norm() < 1e-12);
        assert!((r.coefficients[0] + x.powu(3)).norm() < 1e-12);
    }

    #[test]
    fn noiseless_lift_contains_truth() {
        // λ values for which the equispaced cluster centers stay distinct
        let cases: [(&[usize], &[u32]); 2] = [(&[2, 1], &[3, 5]), (&[2, 1, 1], &[2, 4, 5])];
        for (sizes, lambdas) in cases {
            let n: usize = sizes.iter().sum();
            for seed in 0..5 {
                let s = Signal::generate(&ClusterRequest::new(sizes.to_vec(), 2e-2, seed)).unwrap();
                let m = s.moments(41);
                for &l in lambdas {
                    let plan = DecimationPlan::new(40.0, vec![l], n).unwrap();
                    let r = decimated_prony(&m, n, &plan, false).unwrap().with_truth(&s).unwrap();
                    assert!(r.max_node_error() < 1e-9, "seed {seed} lambda {l}: {:e}", r.max_node_error());
                }
            }
        }
    }

    #[test]
    fn all_failures_are_reported() {
        let m = MomentVector::new(vec![Complex64::new(1.0, 0.0); 11]);
        let plan = DecimationPlan::new(10.0, vec![1, 2, 3], 2).unwrap();
        match decimated_prony(&m, 2, &plan, false) {
            Err(Error::AllLambdasFailed(causes)) => assert_eq!(causes.len(), 3),
            other => panic!("unexpected {other:?}"),
        }
    }
}
