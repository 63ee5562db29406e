//! Hankel conditioning and the contrast between structured Prony errors and
//! unstructured coefficient perturbations on a single cluster.

use num_complex::Complex64;
use prony_core::linalg::{hankel_from, Svd};
use prony_core::model::{derive_seed, perturb, ClusterRequest, NoiseSpec, Signal};
use prony_core::recovery::{classical_polynomial, match_nodes};
use prony_core::rootfind::{coeffs_from_roots, roots, MonicPolynomial};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::fit::{fit_pairs, SlopeFit};
use crate::sweep::with_pool;

/// `κ₂(Hₙ) = σ₁/σₙ` of the exact Hankel matrix; infinite when singular.
pub fn condition_number_hankel(signal: &Signal) -> f64 {
    let n = signal.n();
    match hankel_from(signal.moments(2 * n - 1), n) {
        Ok(h) => Svd::compute(&h).condition_number(),
        Err(_) => f64::INFINITY,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionRecord {
    pub delta: f64,
    pub trial: usize,
    pub seed: u64,
    pub kappa: f64,
}

/// `κ(Hₙ)` of single-cluster signals `ℓ = n` across `delta_grid`.
pub fn hankel_condition_sweep(ell: usize, delta_grid: &[f64], trials: usize, seed: u64) -> Vec<ConditionRecord> {
    let mut out = Vec::new();
    for (g, &delta) in delta_grid.iter().enumerate() {
        for t in 0..trials {
            let s = derive_seed(seed, g as u64, t as u64);
            let kappa = Signal::generate(&ClusterRequest::new(vec![ell], delta, s))
                .map(|sig| condition_number_hankel(&sig))
                .unwrap_or(f64::NAN);
            out.push(ConditionRecord {
                delta,
                trial: t,
                seed: s,
                kappa,
            });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaiveSpec {
    /// Cluster size; the signal is a single cluster with `n = ℓ`.
    pub ell: usize,
    pub delta_grid: Vec<f64>,
    pub epsilon: f64,
    pub trials_per_point: usize,
    pub seed: u64,
}

/// One trial: Prony coefficient and root errors, and root errors after
/// replacing `Δq` by a random vector with the same entrywise moduli.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaiveRecord {
    pub delta: f64,
    pub trial: usize,
    pub seed: u64,
    pub success: bool,
    pub coeff_error: f64,
    pub prony_root_error: f64,
    pub random_root_error: f64,
    pub cause: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaiveOutcome {
    pub records: Vec<NaiveRecord>,
    pub coeff_fit: Option<SlopeFit>,
    pub prony_fit: Option<SlopeFit>,
    pub random_fit: Option<SlopeFit>,
}

pub fn naive_comparison(spec: &NaiveSpec) -> anyhow::Result<NaiveOutcome> {
    if spec.ell < 1 || spec.trials_per_point < 1 || spec.delta_grid.is_empty() {
        anyhow::bail!("naive comparison needs ell >= 1, trials >= 1 and a non-empty grid");
    }
    let tasks: Vec<(usize, usize)> = (0..spec.delta_grid.len())
        .flat_map(|g| (0..spec.trials_per_point).map(move |t| (g, t)))
        .collect();
    let records: Vec<NaiveRecord> = with_pool(|| tasks.par_iter().map(|&(g, t)| naive_trial(spec, g, t)).collect())?;
    let fit = |f: fn(&NaiveRecord) -> f64| {
        fit_pairs(records.iter().filter(|r| r.success).map(|r| (r.delta, f(r)))).ok()
    };
    Ok(NaiveOutcome {
        coeff_fit: fit(|r| r.coeff_error),
        prony_fit: fit(|r| r.prony_root_error),
        random_fit: fit(|r| r.random_root_error),
        records,
    })
}

fn naive_trial(spec: &NaiveSpec, g: usize, t: usize) -> NaiveRecord {
    let delta = spec.delta_grid[g];
    let seed = derive_seed(spec.seed, g as u64, t as u64);
    let mut rec = NaiveRecord {
        delta,
        trial: t,
        seed,
        success: false,
        coeff_error: f64::NAN,
        prony_root_error: f64::NAN,
        random_root_error: f64::NAN,
        cause: None,
    };
    match naive_errors(spec, delta, seed) {
        Ok((c, p, r)) => {
            rec.success = true;
            rec.coeff_error = c;
            rec.prony_root_error = p;
            rec.random_root_error = r;
        }
        Err(e) => rec.cause = Some(e.to_string()),
    }
    rec
}

fn naive_errors(spec: &NaiveSpec, delta: f64, seed: u64) -> prony_core::Result<(f64, f64, f64)> {
    let n = spec.ell;
    let signal = Signal::generate(&ClusterRequest::new(vec![n], delta, derive_seed(seed, 1, 0)))?;
    let m = perturb(
        &signal.moments(2 * n),
        &NoiseSpec::seeded(spec.epsilon, derive_seed(seed, 2, 0)),
    );
    let p = coeffs_from_roots(&signal.nodes);
    let q = classical_polynomial(&m, n)?;
    let dq: Vec<Complex64> = q.coeffs.iter().zip(&p.coeffs).map(|(a, b)| a - b).collect();
    let coeff_error = dq.iter().map(|c| c.norm()).fold(0.0, f64::max);

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 3, 0));
    let perturbed: Vec<Complex64> = p
        .coeffs
        .iter()
        .zip(&dq)
        .map(|(c, d)| c + Complex64::from_polar(d.norm(), rng.gen_range(0.0..std::f64::consts::TAU)))
        .collect();

    let prony = max_root_error(&q, &signal.nodes)?;
    let random = max_root_error(&MonicPolynomial::new(perturbed), &signal.nodes)?;
    Ok((coeff_error, prony, random))
}

fn max_root_error(p: &MonicPolynomial, truth: &[Complex64]) -> prony_core::Result<f64> {
    let r = roots(p)?;
    let sigma = match_nodes(&r, truth)?;
    Ok(sigma
        .iter()
        .enumerate()
        .map(|(j, &t)| (r[j] - truth[t]).norm())
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_node_condition_is_one() {
        let s = Signal::generate(&ClusterRequest::new(vec![1], 0.1, 7)).unwrap();
        assert!((condition_number_hankel(&s) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn antipodal_pair_is_perfectly_conditioned() {
        let s = Signal::from_parts(
            vec![Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)],
            vec![Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0)],
        )
        .unwrap();
        assert!((condition_number_hankel(&s) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn noiseless_errors_sit_at_the_floor() {
        let spec = NaiveSpec {
            ell: 2,
            delta_grid: vec![0.05, 0.1],
            epsilon: 0.0,
            trials_per_point: 2,
            seed: 1,
        };
        let out = naive_comparison(&spec).unwrap();
        for r in &out.records {
            assert!(r.success);
            assert!(r.coeff_error < 1e-12 && r.prony_root_error < 1e-9 && r.random_root_error < 1e-9, "{r:?}");
        }
    }
}
