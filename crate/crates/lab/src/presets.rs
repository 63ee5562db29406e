//! Desk-scale reproductions of the five reference figures, each with its
//! target exponents turned into pass/fail checks.
//!
//! | preset | content |
//! |--------|---------|
//! | `fig1` | `κ(Hₙ)` vs δ for a triple cluster; Prony vs random-coefficient root errors for ℓ = 2, 3 |
//! | `fig2` | classical Prony, 2+1 geometry, δ sweep, node/amplitude factors and backward errors |
//! | `fig3` | the same sweep with and without projecting nodes before the amplitude solve |
//! | `fig4` | decimated Prony, SRF sweep with Ω drawn per trial |
//! | `fig5` | Matrix Pencil, SRF sweep at fixed Ω with least-squares amplitudes |

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use prony_core::pencil::AmplitudeFit;
use prony_core::recovery::Method;
use prony_core::MACHINE_EPS;
use serde::{Deserialize, Serialize};

use crate::checks::{Check, Criterion};
use crate::fit::{fit_pairs, fit_slope, Field, SlopeFit};
use crate::naive::{hankel_condition_sweep, naive_comparison, NaiveOutcome, NaiveSpec};
use crate::sweep::{csv_bytes, log_grid, run_sweep, EpsilonPolicy, Grid, OmegaPolicy, SweepOutcome, SweepSpec, TrialRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Fig1,
    Fig2,
    Fig3,
    Fig4,
    Fig5,
}

impl Preset {
    pub const ALL: [Preset; 5] = [Preset::Fig1, Preset::Fig2, Preset::Fig3, Preset::Fig4, Preset::Fig5];

    pub fn as_str(self) -> &'static str {
        match self {
            Preset::Fig1 => "fig1",
            Preset::Fig2 => "fig2",
            Preset::Fig3 => "fig3",
            Preset::Fig4 => "fig4",
            Preset::Fig5 => "fig5",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Preset {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Preset::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| format!("unknown preset {s:?} (expected fig1..fig5)"))
    }
}

/// Knobs shared by all presets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PresetConfig {
    pub seed: u64,
    pub trials_per_point: usize,
    /// Grid points of δ sweeps (fig1 condition numbers, fig2, fig3).
    pub delta_points: usize,
    /// Grid points of SRF sweeps and of the naive comparison.
    pub srf_points: usize,
    /// Constant `c` of the regime condition.
    pub regime_c: f64,
}

impl Default for PresetConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            trials_per_point: 10,
            delta_points: 20,
            srf_points: 12,
            regime_c: crate::sweep::DEFAULT_REGIME_C,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PresetSummary {
    pub preset: Preset,
    pub config: PresetConfig,
    pub files: Vec<String>,
    pub fits: BTreeMap<String, SlopeFit>,
    pub checks: Vec<Check>,
    pub failed_trials: usize,
    pub warnings: Vec<String>,
    pub pass: bool,
}

/// Everything a preset produces; `files` are `(name, bytes)` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct PresetRun {
    pub summary: PresetSummary,
    pub files: Vec<(String, Vec<u8>)>,
}

struct Builder {
    fits: BTreeMap<String, SlopeFit>,
    checks: Vec<Check>,
    files: Vec<(String, Vec<u8>)>,
    failed: usize,
    warnings: Vec<String>,
}

impl Builder {
    fn new() -> Self {
        Self {
            fits: BTreeMap::new(),
            checks: Vec::new(),
            files: Vec::new(),
            failed: 0,
            warnings: Vec::new(),
        }
    }

    /// Records `fit` under `name` and checks its slope.
    fn slope(&mut self, name: &str, fit: Option<SlopeFit>, target: f64, tol: f64) -> Option<f64> {
        if let Some(f) = fit {
            self.fits.insert(name.to_string(), f);
        }
        let v = fit.map(|f| f.slope);
        self.checks.push(Check::within(name, v, target, tol));
        v
    }

    fn sweep(&mut self, file: &str, out: &SweepOutcome) {
        self.files.push((file.to_string(), csv_bytes(&out.records)));
        self.failed += out.failures.len();
        self.warnings.extend(out.warnings.iter().map(|w| format!("{file}: {w}")));
    }

    fn finish(self, preset: Preset, config: &PresetConfig) -> PresetRun {
        let mut names: Vec<String> = self.files.iter().map(|(n, _)| n.clone()).collect();
        names.push(summary_name(preset));
        let pass = self.checks.iter().all(|c| c.pass);
        PresetRun {
            summary: PresetSummary {
                preset,
                config: config.clone(),
                files: names,
                fits: self.fits,
                checks: self.checks,
                failed_trials: self.failed,
                warnings: self.warnings,
                pass,
            },
            files: self.files,
        }
    }
}

pub fn summary_name(p: Preset) -> String {
    format!("{p}_summary.json")
}

/// Node-class filter for fits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeClass {
    Cluster,
    Isolated,
}

/// Slope of `y` against `x` over in-regime rows of one node class.
pub fn class_fit(records: &[TrialRecord], x: Field, y: Field, class: NodeClass, c: f64) -> Option<SlopeFit> {
    fit_slope(records, x, y, |r| {
        r.in_regime(c)
            && match class {
                NodeClass::Cluster => r.in_cluster(),
                NodeClass::Isolated => r.isolated(),
            }
    })
    .ok()
}

pub fn run_preset(preset: Preset, config: &PresetConfig) -> anyhow::Result<PresetRun> {
    match preset {
        Preset::Fig1 => fig1(config),
        Preset::Fig2 => fig2(config),
        Preset::Fig3 => fig3(config),
        Preset::Fig4 => srf_figure(Preset::Fig4, config),
        Preset::Fig5 => srf_figure(Preset::Fig5, config),
    }
}

/// Separation grid of the Prony sweeps.
pub fn prony_delta_grid(points: usize) -> Vec<f64> {
    log_grid(1e-3, 1e-1, points)
}

/// Separation grid of the naive comparison for cluster size `ell`: wide
/// enough that the unstructured root error `δ^{3−3ℓ}ε` stays below `δ`.
pub fn naive_delta_grid(ell: usize, points: usize) -> Vec<f64> {
    if ell <= 2 {
        log_grid(3e-3, 1e-1, points)
    } else {
        log_grid(2e-2, 2e-1, points)
    }
}

fn fig1(cfg: &PresetConfig) -> anyhow::Result<PresetRun> {
    let mut b = Builder::new();
    let cond = hankel_condition_sweep(3, &prony_delta_grid(cfg.delta_points), cfg.trials_per_point, cfg.seed);
    b.files.push(("fig1_condition.csv".into(), csv_of(&cond)?));
    let fit = fit_pairs(cond.iter().map(|r| (r.delta, r.kappa))).ok();
    b.slope("kappa_hankel_l3", fit, -4.0, 0.4);

    for ell in [2usize, 3] {
        let spec = NaiveSpec {
            ell,
            delta_grid: naive_delta_grid(ell, cfg.srf_points.max(5)),
            epsilon: 1e-15,
            trials_per_point: cfg.trials_per_point,
            seed: cfg.seed.wrapping_add(ell as u64),
        };
        let out: NaiveOutcome = naive_comparison(&spec)?;
        b.files.push((format!("fig1_naive_l{ell}.csv"), csv_of(&out.records)?));
        b.failed += out.records.iter().filter(|r| !r.success).count();
        let (fits, checks) = naive_checks(ell, &out, &format!("naive_l{ell}_"));
        b.fits.extend(fits);
        b.checks.extend(checks);
    }
    Ok(b.finish(Preset::Fig1, cfg))
}

/// Slope fits and checks of a naive comparison: Prony roots at `2−2ℓ`,
/// randomly perturbed coefficients at `3−3ℓ`, separated by at least 0.5.
pub fn naive_checks(ell: usize, out: &NaiveOutcome, prefix: &str) -> (BTreeMap<String, SlopeFit>, Vec<Check>) {
    let e = ell as f64;
    let mut fits = BTreeMap::new();
    for (name, f) in [("coeff", out.coeff_fit), ("prony_roots", out.prony_fit), ("random_roots", out.random_fit)] {
        if let Some(f) = f {
            fits.insert(format!("{prefix}{name}"), f);
        }
    }
    let p = out.prony_fit.map(|f| f.slope);
    let r = out.random_fit.map(|f| f.slope);
    let checks = vec![
        Check::within(format!("{prefix}prony_roots"), p, 2.0 - 2.0 * e, 0.35),
        Check::within(format!("{prefix}random_roots"), r, 3.0 - 3.0 * e, 0.5),
        Check::new(
            format!("{prefix}slope_gap"),
            p.zip(r).map(|(p, r)| p - r),
            Criterion::AtLeast { bound: 0.5 },
        ),
    ];
    (fits, checks)
}

/// Classical Prony on the 2+1 geometry at `ε = 1e-15`.
pub fn prony_sweep_spec(cfg: &PresetConfig, project: bool) -> SweepSpec {
    let mut s = SweepSpec::new(Method::Classical, vec![2, 1], Grid::Delta(prony_delta_grid(cfg.delta_points)));
    s.epsilon = EpsilonPolicy::Fixed { value: 1e-15 };
    s.trials_per_point = cfg.trials_per_point;
    s.seed = cfg.seed;
    s.project = project;
    s.regime_c = cfg.regime_c;
    s
}

fn fig2(cfg: &PresetConfig) -> anyhow::Result<PresetRun> {
    let mut b = Builder::new();
    let mut spec = prony_sweep_spec(cfg, false);
    spec.backward = true;
    let out = run_sweep(&spec)?;
    b.sweep("fig2.csv", &out);
    let (x, c) = (Field::Delta, cfg.regime_c);
    let r = &out.records;
    b.slope("kx_cluster", class_fit(r, x, Field::Kx, NodeClass::Cluster, c), -2.0, 0.35);
    b.slope("ka_cluster", class_fit(r, x, Field::Ka, NodeClass::Cluster, c), -3.0, 0.35);
    b.slope("kx_noncluster", class_fit(r, x, Field::Kx, NodeClass::Isolated, c), 0.0, 0.3);
    b.slope("ka_noncluster", class_fit(r, x, Field::Ka, NodeClass::Isolated, c), 0.0, 0.3);
    for (name, f) in [("berr1", Field::Berr1), ("berr2", Field::Berr2), ("berr3", Field::Berr3)] {
        let vals: Vec<f64> = r.iter().filter(|r| r.success).filter_map(|r| f.get(r)).collect();
        let max = (!vals.is_empty()).then(|| vals.iter().copied().fold(0.0, f64::max));
        b.checks.push(Check::new(
            format!("{name}_max"),
            max,
            Criterion::AtMost {
                bound: 1e3 * MACHINE_EPS,
            },
        ));
    }
    Ok(b.finish(Preset::Fig2, cfg))
}

fn fig3(cfg: &PresetConfig) -> anyhow::Result<PresetRun> {
    let mut b = Builder::new();
    let raw = run_sweep(&prony_sweep_spec(cfg, false))?;
    let proj = run_sweep(&prony_sweep_spec(cfg, true))?;
    b.sweep("fig3_raw.csv", &raw);
    b.sweep("fig3_projected.csv", &proj);
    let (x, c) = (Field::Delta, cfg.regime_c);
    // 2+1 geometry: ℓ* = 2 and the isolated node has ℓ_t = 1
    let ka_raw = b.slope(
        "ka_noncluster_raw",
        class_fit(&raw.records, x, Field::Ka, NodeClass::Isolated, c),
        0.0,
        0.3,
    );
    let ka_proj = b.slope(
        "ka_noncluster_projected",
        class_fit(&proj.records, x, Field::Ka, NodeClass::Isolated, c),
        -1.0,
        0.4,
    );
    b.checks.push(Check::new(
        "ka_noncluster_projection_gap",
        ka_raw.zip(ka_proj).map(|(a, p)| a - p),
        Criterion::AtLeast { bound: 0.5 },
    ));
    b.slope(
        "discrepancy_raw",
        class_fit(&raw.records, x, Field::Discrepancy, NodeClass::Isolated, c),
        0.0,
        0.4,
    );
    b.slope(
        "discrepancy_projected",
        class_fit(&proj.records, x, Field::Discrepancy, NodeClass::Isolated, c),
        -1.0,
        0.4,
    );
    Ok(b.finish(Preset::Fig3, cfg))
}

/// SRF sweep for decimated Prony (fig4) or Matrix Pencil (fig5).
pub fn srf_sweep_spec(preset: Preset, cfg: &PresetConfig, project: bool) -> SweepSpec {
    let method = if preset == Preset::Fig5 {
        Method::Pencil
    } else {
        Method::Decimated
    };
    let mut s = SweepSpec::new(method, vec![2, 1], Grid::Srf(log_grid(10.0, 1e3, cfg.srf_points)));
    s.epsilon = EpsilonPolicy::Fixed { value: 1e-11 };
    s.omega = if method == Method::Pencil {
        OmegaPolicy::Fixed { value: 100.0 }
    } else {
        OmegaPolicy::LogUniform { lo: 50.0, hi: 200.0 }
    };
    s.options.pencil_amplitudes = AmplitudeFit::AllSamples;
    s.trials_per_point = cfg.trials_per_point;
    s.seed = cfg.seed;
    s.project = project;
    s.regime_c = cfg.regime_c;
    s
}

fn srf_figure(preset: Preset, cfg: &PresetConfig) -> anyhow::Result<PresetRun> {
    let mut b = Builder::new();
    let raw = run_sweep(&srf_sweep_spec(preset, cfg, false))?;
    let proj = run_sweep(&srf_sweep_spec(preset, cfg, true))?;
    b.sweep(&format!("{preset}_raw.csv"), &raw);
    b.sweep(&format!("{preset}_projected.csv"), &proj);
    let (x, c) = (Field::Srf, cfg.regime_c);
    let ell = 2.0;
    let r = &raw.records;
    b.slope("kx_cluster", class_fit(r, x, Field::Kx, NodeClass::Cluster, c), 2.0 * ell - 2.0, 0.4);
    b.slope("ka_cluster", class_fit(r, x, Field::Ka, NodeClass::Cluster, c), 2.0 * ell - 1.0, 0.4);
    b.slope("kx_noncluster", class_fit(r, x, Field::Kx, NodeClass::Isolated, c), 0.0, 0.3);
    b.slope("ka_noncluster", class_fit(r, x, Field::Ka, NodeClass::Isolated, c), 0.0, 0.3);
    b.slope(
        "ka_noncluster_projected",
        class_fit(&proj.records, x, Field::Ka, NodeClass::Isolated, c),
        ell - 1.0,
        0.5,
    );
    Ok(b.finish(preset, cfg))
}

pub fn csv_of<T: Serialize>(rows: &[T]) -> anyhow::Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    Ok(w.into_inner()?)
}
