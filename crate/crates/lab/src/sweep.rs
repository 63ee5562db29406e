//! Randomized amplification-factor sweeps over a separation or SRF grid.
//!
//! Each `(grid point, trial)` pair is an independent task with its own seed
//! derived from the sweep seed, so results do not depend on scheduling.
//! Output rows are one per recovered node and are ordered by
//! `(grid index, trial index, node index)`.

use std::io::{Read, Write};

use anyhow::{bail, Context};
use num_complex::Complex64;
use prony_core::backward::backward_report;
use prony_core::model::{derive_seed, perturb, ClusterRequest, NoiseSpec, Signal};
use prony_core::recovery::{Method, RecoveryResult};
use prony_core::theory::cluster_discrepancy;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::methods::{moments_needed, recover, MethodOptions};

/// Default constant `c` in the regime condition `ε ≤ c·s^{2ℓ*−1}`.
pub const DEFAULT_REGIME_C: f64 = 0.1;

/// Environment variable holding the worker-thread count.
pub const THREADS_ENV: &str = "PRONY_THREADS";

/// Fixed CSV column order.
pub const CSV_COLUMNS: [&str; 16] = [
    "method",
    "n",
    "cluster_sizes",
    "delta",
    "srf",
    "epsilon",
    "omega",
    "node_idx",
    "kx",
    "ka",
    "discrepancy",
    "berr1",
    "berr2",
    "berr3",
    "success",
    "seed",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EpsilonPolicy {
    Fixed { value: f64 },
    LogUniform { lo: f64, hi: f64 },
}

/// `Fixed` is the constant-bandwidth regime; `LogUniform` draws `Ω` per
/// trial and rounds it to an integer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OmegaPolicy {
    Fixed { value: f64 },
    LogUniform { lo: f64, hi: f64 },
}

/// Swept variable. With an SRF grid the separation is `δ = 1/(Ω·SRF)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Grid {
    Delta(Vec<f64>),
    Srf(Vec<f64>),
}

impl Grid {
    pub fn values(&self) -> &[f64] {
        match self {
            Grid::Delta(v) | Grid::Srf(v) => v,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub method: Method,
    pub cluster_sizes: Vec<usize>,
    pub grid: Grid,
    pub epsilon: EpsilonPolicy,
    pub omega: OmegaPolicy,
    pub trials_per_point: usize,
    #[serde(default)]
    pub project: bool,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_regime_c")]
    pub regime_c: f64,
    /// Also compute the three backward errors (classical only).
    #[serde(default)]
    pub backward: bool,
    #[serde(default)]
    pub options: MethodOptions,
}

fn default_regime_c() -> f64 {
    DEFAULT_REGIME_C
}

/// `count` log-spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.log10(), hi.log10());
    (0..count)
        .map(|i| 10f64.powf(a + (b - a) * i as f64 / (count - 1) as f64))
        .collect()
}

impl SweepSpec {
    /// Constant-bandwidth sweep with `Ω = 2n−1`, `ε = 1e-15`, 10 trials.
    pub fn new(method: Method, cluster_sizes: Vec<usize>, grid: Grid) -> Self {
        let n: usize = cluster_sizes.iter().sum();
        Self {
            method,
            cluster_sizes,
            grid,
            epsilon: EpsilonPolicy::Fixed { value: 1e-15 },
            omega: OmegaPolicy::Fixed {
                value: (2 * n.max(1) - 1) as f64,
            },
            trials_per_point: 10,
            project: false,
            seed: 0,
            regime_c: DEFAULT_REGIME_C,
            backward: false,
            options: MethodOptions::default(),
        }
    }

    pub fn n(&self) -> usize {
        self.cluster_sizes.iter().sum()
    }

    pub fn ell_star(&self) -> usize {
        self.cluster_sizes.iter().copied().max().unwrap_or(0)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.cluster_sizes.is_empty() || self.cluster_sizes.contains(&0) {
            bail!("cluster_sizes must be non-empty and positive");
        }
        let g = self.grid.values();
        if g.is_empty() {
            bail!("grid is empty");
        }
        if g.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            bail!("grid values must be positive and finite");
        }
        if g.windows(2).any(|w| w[0].partial_cmp(&w[1]) != Some(std::cmp::Ordering::Less)) {
            bail!("grid must be strictly increasing");
        }
        if self.trials_per_point < 1 {
            bail!("trials_per_point must be at least 1");
        }
        match self.epsilon {
            EpsilonPolicy::Fixed { value } if !(value >= 0.0 && value.is_finite()) => {
                bail!("epsilon must be non-negative")
            }
            EpsilonPolicy::LogUniform { lo, hi } if !(lo > 0.0 && lo <= hi && hi.is_finite()) => {
                bail!("epsilon range must satisfy 0 < lo <= hi")
            }
            _ => {}
        }
        let min_omega = (2 * self.n() - 1) as f64;
        let (lo, hi) = match self.omega {
            OmegaPolicy::Fixed { value } => (value, value),
            OmegaPolicy::LogUniform { lo, hi } => (lo, hi),
        };
        if !(lo >= min_omega && lo <= hi && hi.is_finite()) {
            bail!("omega must satisfy 2n-1 = {min_omega} <= lo <= hi");
        }
        if self.regime_c.is_nan() || self.regime_c <= 0.0 {
            bail!("regime_c must be positive");
        }
        Ok(())
    }
}

/// One row of the sweep table: a single node of a single trial, or a
/// failed trial (`success = false`, no node data).
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub method: Method,
    pub n: usize,
    pub cluster_sizes: Vec<usize>,
    pub delta: f64,
    pub srf: f64,
    pub epsilon: f64,
    pub omega: f64,
    pub node_idx: Option<usize>,
    pub kx: Option<f64>,
    pub ka: Option<f64>,
    pub discrepancy: Option<f64>,
    pub berr1: Option<f64>,
    pub berr2: Option<f64>,
    pub berr3: Option<f64>,
    pub success: bool,
    pub seed: u64,
}

impl TrialRecord {
    pub fn ell_star(&self) -> usize {
        self.cluster_sizes.iter().copied().max().unwrap_or(0)
    }

    /// Size of the cluster holding this row's node.
    pub fn cluster_size(&self) -> Option<usize> {
        self.node_idx.map(|j| cluster_size_of(&self.cluster_sizes, j))
    }

    /// Node belongs to a cluster with at least two members.
    pub fn in_cluster(&self) -> bool {
        self.cluster_size().is_some_and(|s| s >= 2)
    }

    /// Node is isolated.
    pub fn isolated(&self) -> bool {
        self.cluster_size() == Some(1)
    }

    /// `ε ≤ c·s^{2ℓ*−1}` with `s = δ` at constant bandwidth and `s = Ωδ`
    /// for the bandwidth-aware methods.
    pub fn in_regime(&self, c: f64) -> bool {
        if self.epsilon == 0.0 {
            return true;
        }
        let s = match self.method {
            Method::Classical | Method::Homogeneous => self.delta,
            Method::Decimated | Method::Pencil => self.omega * self.delta,
        };
        self.epsilon <= c * s.powi(2 * self.ell_star() as i32 - 1)
    }
}

/// Block sizes are laid out contiguously: nodes `0..ℓ_1` form block 0, etc.
pub fn cluster_of(sizes: &[usize], j: usize) -> Option<usize> {
    let mut start = 0;
    for (b, &s) in sizes.iter().enumerate() {
        if j < start + s {
            return Some(b);
        }
        start += s;
    }
    None
}

pub fn cluster_size_of(sizes: &[usize], j: usize) -> usize {
    cluster_of(sizes, j).map_or(0, |b| sizes[b])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialFailure {
    pub grid_index: usize,
    pub trial: usize,
    pub seed: u64,
    pub cause: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    pub records: Vec<TrialRecord>,
    pub failures: Vec<TrialFailure>,
    /// Failed fraction of trials at each grid point.
    pub failure_rates: Vec<f64>,
    /// Grid points where more than half of the trials failed.
    pub warnings: Vec<String>,
}

struct TrialOutput {
    rows: Vec<TrialRecord>,
    failure: Option<TrialFailure>,
}

/// Runs every trial of `spec` (in parallel when possible) and merges the
/// results in grid/trial order.
pub fn run_sweep(spec: &SweepSpec) -> anyhow::Result<SweepOutcome> {
    spec.validate()?;
    let points = spec.grid.values().len();
    let tasks: Vec<(usize, usize)> = (0..points)
        .flat_map(|g| (0..spec.trials_per_point).map(move |t| (g, t)))
        .collect();
    let outputs: Vec<TrialOutput> = with_pool(|| tasks.par_iter().map(|&(g, t)| run_trial(spec, g, t)).collect())?;

    let mut records = Vec::new();
    let mut failures = Vec::new();
    let mut failed = vec![0usize; points];
    for out in outputs {
        records.extend(out.rows);
        if let Some(f) = out.failure {
            failed[f.grid_index] += 1;
            failures.push(f);
        }
    }
    let failure_rates: Vec<f64> = failed
        .iter()
        .map(|&f| f as f64 / spec.trials_per_point as f64)
        .collect();
    let warnings = failure_rates
        .iter()
        .enumerate()
        .filter(|(_, &r)| r > 0.5)
        .map(|(g, r)| {
            format!(
                "grid point {g} ({} = {:e}): {:.0}% of trials failed",
                grid_name(&spec.grid),
                spec.grid.values()[g],
                100.0 * r
            )
        })
        .collect();
    Ok(SweepOutcome {
        records,
        failures,
        failure_rates,
        warnings,
    })
}

fn grid_name(grid: &Grid) -> &'static str {
    match grid {
        Grid::Delta(_) => "delta",
        Grid::Srf(_) => "srf",
    }
}

/// Runs `f` on a pool sized by [`THREADS_ENV`] when set, else on the
/// global pool.
pub fn with_pool<T: Send>(f: impl FnOnce() -> T + Send) -> anyhow::Result<T> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => {
            let threads: usize = v
                .trim()
                .parse()
                .with_context(|| format!("{THREADS_ENV} must be a positive integer, got {v:?}"))?;
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads.max(1))
                .build()
                .context("building thread pool")?;
            Ok(pool.install(f))
        }
        Err(_) => Ok(f()),
    }
}

fn log_uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    if lo == hi {
        return lo;
    }
    10f64.powf(rng.gen_range(lo.log10()..=hi.log10()))
}

fn run_trial(spec: &SweepSpec, g: usize, t: usize) -> TrialOutput {
    let n = spec.n();
    let seed = derive_seed(spec.seed, g as u64, t as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let epsilon = match spec.epsilon {
        EpsilonPolicy::Fixed { value } => value,
        EpsilonPolicy::LogUniform { lo, hi } => log_uniform(&mut rng, lo, hi),
    };
    let omega = match spec.omega {
        OmegaPolicy::Fixed { value } => value,
        OmegaPolicy::LogUniform { lo, hi } => log_uniform(&mut rng, lo, hi).round().clamp(lo.ceil(), hi.floor()),
    };
    let x = spec.grid.values()[g];
    let (delta, srf) = match spec.grid {
        Grid::Delta(_) => (x, 1.0 / (omega * x)),
        Grid::Srf(_) => (1.0 / (omega * x), x),
    };
    let base = TrialRecord {
        method: spec.method,
        n,
        cluster_sizes: spec.cluster_sizes.clone(),
        delta,
        srf,
        epsilon,
        omega,
        node_idx: None,
        kx: None,
        ka: None,
        discrepancy: None,
        berr1: None,
        berr2: None,
        berr3: None,
        success: false,
        seed,
    };
    let fail = |cause: String| TrialOutput {
        rows: vec![base.clone()],
        failure: Some(TrialFailure {
            grid_index: g,
            trial: t,
            seed,
            cause,
        }),
    };

    let req = ClusterRequest::new(spec.cluster_sizes.clone(), delta, derive_seed(seed, 1, 0));
    let signal = match Signal::generate(&req) {
        Ok(s) => s,
        Err(e) => return fail(e.to_string()),
    };
    let m = perturb(
        &signal.moments(moments_needed(spec.method, n, omega)),
        &NoiseSpec::seeded(epsilon, derive_seed(seed, 2, 0)),
    );
    let result = match recover(spec.method, &m, n, omega, &spec.options, spec.project).and_then(|r| r.with_truth(&signal)) {
        Ok(r) => r,
        Err(e) => return fail(e.to_string()),
    };
    let backward = if spec.backward && spec.method == Method::Classical {
        match backward_report(&m, &result) {
            Ok(b) => Some(b),
            Err(e) => return fail(e.to_string()),
        }
    } else {
        None
    };
    let scale = if epsilon > 0.0 { epsilon } else { 1.0 };
    let (ex, ea) = result.errors_by_truth().expect("matched above");
    let discrepancies = match discrepancy_by_node(&signal, &result) {
        Ok(d) => d,
        Err(e) => return fail(e.to_string()),
    };
    let rows = (0..n)
        .map(|j| TrialRecord {
            node_idx: Some(j),
            kx: Some(omega * ex[j] / scale),
            ka: Some(ea[j] / scale),
            discrepancy: discrepancies[j].map(|v| v / scale),
            berr1: backward.as_ref().map(|b| b.berr1),
            berr2: backward.as_ref().map(|b| b.berr2),
            berr3: backward.as_ref().map(|b| b.berr3),
            success: true,
            ..base.clone()
        })
        .collect();
    TrialOutput { rows, failure: None }
}

/// `|𝒱_b|` for every node outside the largest cluster `b`, computed on the
/// nodes actually used for the amplitude solve.
fn discrepancy_by_node(signal: &Signal, result: &RecoveryResult) -> prony_core::Result<Vec<Option<f64>>> {
    let sizes = signal.config.cluster_sizes();
    let n = signal.n();
    if sizes.len() < 2 {
        return Ok(vec![None; n]);
    }
    let b = (0..sizes.len()).max_by_key(|&i| (sizes[i], std::cmp::Reverse(i))).unwrap_or(0);
    let used: Vec<Complex64> = result.nodes_by_truth().unwrap_or_default();
    (0..n)
        .map(|j| {
            if signal.config.cluster_of(j) == b {
                Ok(None)
            } else {
                cluster_discrepancy(signal, &used, j, b).map(|v| Some(v.norm()))
            }
        })
        .collect()
}

fn fmt_f64(x: f64) -> String {
    format!("{x:e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

pub fn format_sizes(sizes: &[usize]) -> String {
    sizes.iter().map(|s| s.to_string()).collect::<Vec<_>>().join("+")
}

pub fn parse_sizes(s: &str) -> anyhow::Result<Vec<usize>> {
    s.split(['+', ','])
        .map(|p| p.trim().parse::<usize>().with_context(|| format!("bad cluster size {p:?}")))
        .collect()
}

/// Writes the fixed-schema CSV.
pub fn write_csv<W: Write>(records: &[TrialRecord], w: W) -> anyhow::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(CSV_COLUMNS)?;
    for r in records {
        out.write_record([
            r.method.as_str().to_string(),
            r.n.to_string(),
            format_sizes(&r.cluster_sizes),
            fmt_f64(r.delta),
            fmt_f64(r.srf),
            fmt_f64(r.epsilon),
            fmt_f64(r.omega),
            r.node_idx.map(|j| j.to_string()).unwrap_or_default(),
            fmt_opt(r.kx),
            fmt_opt(r.ka),
            fmt_opt(r.discrepancy),
            fmt_opt(r.berr1),
            fmt_opt(r.berr2),
            fmt_opt(r.berr3),
            r.success.to_string(),
            r.seed.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn csv_bytes(records: &[TrialRecord]) -> Vec<u8> {
    let mut buf = Vec::new();
    write_csv(records, &mut buf).expect("writing to memory");
    buf
}

/// Reads a CSV written by [`write_csv`]; every column must be present.
pub fn read_csv<R: Read>(r: R) -> anyhow::Result<Vec<TrialRecord>> {
    let mut rdr = csv::Reader::from_reader(r);
    let headers = rdr.headers()?.clone();
    let mut idx = [0usize; 16];
    for (k, name) in CSV_COLUMNS.iter().enumerate() {
        idx[k] = headers
            .iter()
            .position(|h| h == *name)
            .with_context(|| format!("missing column {name:?}"))?;
    }
    let mut out = Vec::new();
    for (line, row) in rdr.records().enumerate() {
        let row = row?;
        let get = |k: usize| row.get(idx[k]).unwrap_or("");
        let num = |k: usize| -> anyhow::Result<f64> {
            get(k)
                .parse::<f64>()
                .with_context(|| format!("row {}: bad {} value {:?}", line + 1, CSV_COLUMNS[k], get(k)))
        };
        let opt = |k: usize| -> anyhow::Result<Option<f64>> {
            if get(k).is_empty() {
                Ok(None)
            } else {
                num(k).map(Some)
            }
        };
        out.push(TrialRecord {
            method: get(0)
                .parse()
                .map_err(|e| anyhow::anyhow!("row {}: {e}", line + 1))?,
            n: get(1).parse().with_context(|| format!("row {}: bad n", line + 1))?,
            cluster_sizes: parse_sizes(get(2))?,
            delta: num(3)?,
            srf: num(4)?,
            epsilon: num(5)?,
            omega: num(6)?,
            node_idx: if get(7).is_empty() {
                None
            } else {
                Some(get(7).parse().with_context(|| format!("row {}: bad node_idx", line + 1))?)
            },
            kx: opt(8)?,
            ka: opt(9)?,
            discrepancy: opt(10)?,
            berr1: opt(11)?,
            berr2: opt(12)?,
            berr3: opt(13)?,
            success: get(14).parse().with_context(|| format!("row {}: bad success", line + 1))?,
            seed: get(15).parse().with_context(|| format!("row {}: bad seed", line + 1))?,
        });
    }
    Ok(out)
}
