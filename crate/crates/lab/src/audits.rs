//! Randomized audits of the backward errors, the ε-expansion identity and
//! the first-order node constants, each reduced to pass/fail checks.

use num_complex::Complex64;
use prony_core::backward::backward_report;
use prony_core::model::{derive_seed, perturb, ClusterRequest, NoiseSpec, Signal};
use prony_core::recovery::prony_classical;
use prony_core::theory::{circle_samples, default_eps_samples, first_order_constant, first_order_report, verify_expansion};
use prony_core::MACHINE_EPS;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::checks::{all_pass, Check, Criterion};
use crate::fit::{fit_pairs, SlopeFit};
use crate::sweep::{format_sizes, log_grid, with_pool};

/// Backward errors must stay below this multiple of machine epsilon.
pub const BERR_FACTOR: f64 = 1e3;

/// Geometries cycled through by the backward audit.
pub const BACKWARD_GEOMETRIES: [&[usize]; 5] = [&[2, 1], &[3, 1], &[2, 2], &[1, 1, 1], &[2, 1, 1]];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackwardRow {
    pub trial: usize,
    pub seed: u64,
    pub cluster_sizes: String,
    pub delta: f64,
    pub epsilon: f64,
    pub success: bool,
    pub berr1: Option<f64>,
    pub berr2: Option<f64>,
    pub berr3: Option<f64>,
    /// Certificate residual divided by its scale.
    pub certificate_ratio: Option<f64>,
    pub cause: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackwardAudit {
    pub trials: usize,
    pub seed: u64,
    pub rows: Vec<BackwardRow>,
    pub checks: Vec<Check>,
    pub pass: bool,
}

/// Classical Prony on `trials` random clustered signals with `δ` and `ε`
/// drawn log-uniformly from `[1e-3, 1e-1]` and `[1e-15, 1e-10]`.
pub fn backward_audit(trials: usize, seed: u64) -> anyhow::Result<BackwardAudit> {
    let rows: Vec<BackwardRow> = with_pool(|| (0..trials).into_par_iter().map(|t| backward_row(t, seed)).collect())?;
    let max_of = |f: fn(&BackwardRow) -> Option<f64>| {
        let v: Vec<f64> = rows.iter().filter_map(f).collect();
        (v.len() == rows.len() && !v.is_empty()).then(|| v.into_iter().fold(0.0, f64::max))
    };
    let bound = BERR_FACTOR * MACHINE_EPS;
    let checks = vec![
        Check::new("berr1_max", max_of(|r| r.berr1), Criterion::AtMost { bound }),
        Check::new("berr2_max", max_of(|r| r.berr2), Criterion::AtMost { bound }),
        Check::new("berr3_max", max_of(|r| r.berr3), Criterion::AtMost { bound }),
        Check::new(
            "berr1_certificate_residual_over_scale_max",
            max_of(|r| r.certificate_ratio),
            Criterion::AtMost { bound },
        ),
    ];
    Ok(BackwardAudit {
        trials,
        seed,
        pass: all_pass(&checks),
        rows,
        checks,
    })
}

fn backward_row(t: usize, seed: u64) -> BackwardRow {
    let s = derive_seed(seed, 0, t as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(s);
    let sizes = BACKWARD_GEOMETRIES[t % BACKWARD_GEOMETRIES.len()].to_vec();
    let delta = 10f64.powf(rng.gen_range(-3.0..-1.0));
    let epsilon = 10f64.powf(rng.gen_range(-15.0..-10.0));
    let mut row = BackwardRow {
        trial: t,
        seed: s,
        cluster_sizes: format_sizes(&sizes),
        delta,
        epsilon,
        success: false,
        berr1: None,
        berr2: None,
        berr3: None,
        certificate_ratio: None,
        cause: None,
    };
    let run = || -> prony_core::Result<_> {
        let signal = Signal::generate(&ClusterRequest::new(sizes.clone(), delta, derive_seed(s, 1, 0)))?;
        let n = signal.n();
        let m = perturb(&signal.moments(2 * n), &NoiseSpec::seeded(epsilon, derive_seed(s, 2, 0)));
        let res = prony_classical(&m, n, false)?;
        backward_report(&m, &res)
    };
    match run() {
        Ok(r) => {
            row.success = true;
            row.berr1 = Some(r.berr1);
            row.berr2 = Some(r.berr2);
            row.berr3 = Some(r.berr3);
            row.certificate_ratio = Some(if r.berr1_certificate_scale > 0.0 {
                r.berr1_certificate_residual / r.berr1_certificate_scale
            } else {
                r.berr1_certificate_residual
            });
        }
        Err(e) => row.cause = Some(e.to_string()),
    }
    row
}

/// Relative tolerance on the θ-coefficients.
pub const EXPANSION_TOL: f64 = 1e-8;
/// Relative tolerance on the leading coefficient `det D`.
pub const DET_D_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionAudit {
    pub n: usize,
    pub seed: u64,
    pub cluster_sizes: String,
    pub delta: f64,
    pub max_rel_err: f64,
    pub det_d_rel_err: f64,
    pub interpolation_condition: f64,
    pub checks: Vec<Check>,
    pub pass: bool,
}

/// Checks the ε-expansion of `det(G(z) + εD)` for one random signal and
/// one random `D`, at five points of the unit circle.
pub fn expansion_audit(cluster_sizes: &[usize], delta: f64, seed: u64) -> anyhow::Result<ExpansionAudit> {
    let signal = Signal::generate(&ClusterRequest::new(cluster_sizes.to_vec(), delta, seed))?;
    let n = signal.n();
    let m = signal.moments(2 * n);
    let d = NoiseSpec::seeded(1.0, derive_seed(seed, 2, 0)).coefficients(2 * n);
    let z = circle_samples(5, 1.0, 0.1);
    let eps = default_eps_samples(&m.values, &d, n, &z)?;
    let rep = verify_expansion(&m, &d, n, &z, &eps)?;
    let checks = vec![
        Check::new(
            "theta_max_rel_err",
            Some(rep.max_rel_err),
            Criterion::AtMost { bound: EXPANSION_TOL },
        ),
        Check::new(
            "det_d_rel_err",
            Some(rep.det_d_rel_err),
            Criterion::AtMost { bound: DET_D_TOL },
        ),
    ];
    Ok(ExpansionAudit {
        n,
        seed,
        cluster_sizes: format_sizes(cluster_sizes),
        delta,
        max_rel_err: rep.max_rel_err,
        det_d_rel_err: rep.det_d_rel_err,
        interpolation_condition: rep.interpolation_condition,
        pass: all_pass(&checks),
        checks,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirstOrderAudit {
    pub seed: u64,
    /// `|c − c_exact| / |c_exact|` for a single node.
    pub single_node_rel_err: f64,
    /// Slope of `|c_j|` against δ on the 2+1 geometry, per node.
    pub slopes: Vec<Option<SlopeFit>>,
    pub linearity_defect: f64,
    pub checks: Vec<Check>,
    pub pass: bool,
}

/// First-order constants: closed form for `n = 1`, δ-scaling of `|c_j|` on
/// the 2+1 geometry, and additivity in the perturbation direction.
pub fn first_order_audit(seed: u64, trials: usize) -> anyhow::Result<FirstOrderAudit> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut unit = || Complex64::from_polar(rng.gen_range(0.5..1.5), rng.gen_range(0.0..std::f64::consts::TAU));

    let x = unit();
    let x = x / x.norm();
    let alpha = unit();
    let d = [unit(), unit()];
    let single = Signal::from_parts(vec![x], vec![alpha])?;
    let c = first_order_constant(&single, &d, 0)?.c;
    let exact = (x * d[0] - d[1]) / alpha;
    let single_node_rel_err = (c - exact).norm() / exact.norm();

    let sizes = [2usize, 1];
    let grid = log_grid(1e-3, 1e-1, 8);
    let mut samples: Vec<Vec<(f64, f64)>> = vec![Vec::new(); 3];
    let mut linearity_defect: f64 = 0.0;
    for (g, &delta) in grid.iter().enumerate() {
        for t in 0..trials {
            let s = derive_seed(seed, g as u64, t as u64);
            let signal = Signal::generate(&ClusterRequest::new(sizes.to_vec(), delta, s))?;
            let d1 = NoiseSpec::seeded(1.0, derive_seed(s, 2, 0)).coefficients(6);
            let d2 = NoiseSpec::seeded(1.0, derive_seed(s, 3, 0)).coefficients(6);
            let rep = first_order_report(&signal, &d1, &d2)?;
            linearity_defect = linearity_defect.max(rep.linearity_defect);
            for e in &rep.entries {
                samples[e.j].push((delta, e.c.norm()));
            }
        }
    }
    let slopes: Vec<Option<SlopeFit>> = samples.into_iter().map(|p| fit_pairs(p).ok()).collect();
    let mut checks = vec![Check::new(
        "single_node_closed_form_rel_err",
        Some(single_node_rel_err),
        Criterion::AtMost { bound: 1e-6 },
    )];
    for (j, f) in slopes.iter().enumerate() {
        let ell_t = if j < 2 { 2.0 } else { 1.0 };
        checks.push(Check::within(
            format!("c{j}_slope"),
            f.map(|f| f.slope),
            2.0 - 2.0 * ell_t,
            0.3,
        ));
    }
    checks.push(Check::new(
        "linearity_defect",
        Some(linearity_defect),
        Criterion::AtMost { bound: 1e-4 },
    ));
    Ok(FirstOrderAudit {
        seed,
        single_node_rel_err,
        slopes,
        linearity_defect,
        pass: all_pass(&checks),
        checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_backward_audit_passes() {
        let a = backward_audit(10, 3).unwrap();
        assert!(a.pass, "{:?}", a.checks);
        assert_eq!(a, backward_audit(10, 3).unwrap());
    }

    #[test]
    fn expansion_audit_n3() {
        let a = expansion_audit(&[1, 1, 1], 0.1, 5).unwrap();
        assert!(a.pass, "{:?}", a.checks);
    }
}
