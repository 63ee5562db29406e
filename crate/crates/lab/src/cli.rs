//! The `prony` command line.
//!
//! Exit codes: 0 success, 2 argument or geometry error, 3 numerical
//! failure, 4 a pass/fail check failed.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use prony_core::backward::backward_report;
use prony_core::model::{derive_seed, perturb, ClusterRequest, NoiseSpec, Signal};
use prony_core::pencil::AmplitudeFit;
use prony_core::recovery::Method;
use prony_core::theory::first_order_report;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::audits::{backward_audit, expansion_audit, first_order_audit};
use crate::checks::{all_pass, Check};
use crate::fit::{Field, SlopeFit};
use crate::io::{read_json, read_signal, to_json_bytes, write_bytes, RecoveryReport};
use crate::methods::{moments_needed, recover, MethodOptions};
use crate::naive::{naive_comparison, NaiveSpec};
use crate::plot::{render, PlotSpec};
use crate::presets::{class_fit, csv_of, naive_checks, run_preset, summary_name, NodeClass, Preset, PresetConfig};
use crate::sweep::{csv_bytes, log_grid, parse_sizes, read_csv, run_sweep, Grid, SweepSpec};

pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;
pub const EXIT_CHECK_FAILED: u8 = 4;

#[derive(Debug, Parser)]
#[command(name = "prony", version, about = "Prony-type recovery of exponential sums and its error analysis")]
pub struct Cli {
    /// Print the machine-readable summary as JSON on stdout.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a random clustered signal.
    Gen(GenArgs),
    /// Recover nodes and amplitudes from the moments of a signal.
    Recover(RecoverArgs),
    /// Run a preset or a sweep spec, writing CSV tables and a summary.
    Sweep(SweepArgs),
    /// Audit the backward errors of classical Prony on random inputs.
    Backward(BackwardArgs),
    /// Check the ε-expansion of the homogeneous Prony polynomial.
    VerifyExpansion(ExpansionArgs),
    /// First-order node error constants.
    FirstOrder(FirstOrderArgs),
    /// Prony root errors against randomly perturbed coefficients.
    Naive(NaiveArgs),
    /// Render a sweep CSV as an SVG with a plot-data CSV.
    Plot(PlotArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Total number of nodes; must equal the sum of the cluster sizes.
    #[arg(long)]
    pub n: Option<usize>,
    /// Cluster sizes, e.g. `2,1` or `2+1` (defaults to `n` singletons).
    #[arg(long)]
    pub clusters: Option<String>,
    #[arg(long, default_value_t = 0.1)]
    pub delta: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub amp_lo: Option<f64>,
    #[arg(long)]
    pub amp_hi: Option<f64>,
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Classical,
    Homogeneous,
    Decimated,
    Pencil,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Classical => Method::Classical,
            MethodArg::Homogeneous => Method::Homogeneous,
            MethodArg::Decimated => Method::Decimated,
            MethodArg::Pencil => Method::Pencil,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AmplitudeArg {
    FirstMoments,
    AllSamples,
}

#[derive(Debug, Args)]
pub struct RecoverArgs {
    /// Signal JSON file.
    #[arg(long)]
    pub signal: PathBuf,
    #[arg(long, value_enum, default_value_t = MethodArg::Classical)]
    pub method: MethodArg,
    /// Noise level of the perturbed moments.
    #[arg(long, default_value_t = 0.0)]
    pub epsilon: f64,
    /// Noise seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Bandwidth (defaults to `2n − 1`).
    #[arg(long)]
    pub omega: Option<f64>,
    /// Normalize recovered nodes to the unit circle before the amplitude solve.
    #[arg(long)]
    pub project: bool,
    /// Decimation parameters, e.g. `1,2,4`.
    #[arg(long, value_delimiter = ',')]
    pub lambdas: Option<Vec<u32>>,
    /// Matrix Pencil window length.
    #[arg(long)]
    pub pencil_l: Option<usize>,
    #[arg(long, value_enum, default_value_t = AmplitudeArg::FirstMoments)]
    pub pencil_amplitudes: AmplitudeArg,
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// One of fig1..fig5.
    #[arg(long, conflicts_with = "spec", required_unless_present = "spec")]
    pub preset: Option<String>,
    /// Sweep spec JSON file.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set trials_per_point=5`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct BackwardArgs {
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Also write the per-run table as CSV.
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExpansionArgs {
    #[arg(long, default_value_t = 3)]
    pub n: usize,
    /// Cluster sizes (defaults to `n` singletons).
    #[arg(long)]
    pub clusters: Option<String>,
    #[arg(long, default_value_t = 0.1)]
    pub delta: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct FirstOrderArgs {
    /// Signal JSON file; otherwise one is generated from the flags below.
    #[arg(long)]
    pub signal: Option<PathBuf>,
    #[arg(long, default_value = "2,1")]
    pub clusters: String,
    #[arg(long, default_value_t = 1e-2)]
    pub delta: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Run the full audit (closed form, δ scaling, additivity) instead.
    #[arg(long)]
    pub audit: bool,
    /// Signals per δ value in the audit.
    #[arg(long, default_value_t = 5)]
    pub trials: usize,
}

#[derive(Debug, Args)]
pub struct NaiveArgs {
    #[arg(long, default_value_t = 2)]
    pub ell: usize,
    #[arg(long)]
    pub delta_lo: Option<f64>,
    #[arg(long)]
    pub delta_hi: Option<f64>,
    #[arg(long, default_value_t = 12)]
    pub points: usize,
    #[arg(long, default_value_t = 1e-15)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 10)]
    pub trials: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// Sweep CSV file.
    #[arg(long)]
    pub csv: PathBuf,
    /// Abscissa column.
    #[arg(long, default_value = "delta")]
    pub x: String,
    /// Ordinate columns, one panel each.
    #[arg(long, value_delimiter = ',', default_value = "kx,ka,discrepancy")]
    pub panels: Vec<String>,
    /// Keep only these node indices.
    #[arg(long, value_delimiter = ',')]
    pub nodes: Option<Vec<usize>>,
    /// Keep only in-regime rows for this constant `c`.
    #[arg(long)]
    pub regime_c: Option<f64>,
    #[arg(long, default_value = "")]
    pub title: String,
    /// Output SVG; the plot data goes to `<stem>_data.csv` next to it.
    #[arg(short, long)]
    pub out: PathBuf,
}

/// Parses arguments and runs; the return value is the process exit code.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { EXIT_OK });
        }
    };
    match run(&cli) {
        Ok(true) => ExitCode::from(EXIT_OK),
        Ok(false) => ExitCode::from(EXIT_CHECK_FAILED),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

/// 3 when a numerical failure of the core library is in the chain, else 2.
pub fn exit_code_for(e: &anyhow::Error) -> u8 {
    let numerical = e
        .chain()
        .filter_map(|c| c.downcast_ref::<prony_core::Error>())
        .any(|c| c.is_numerical());
    if numerical {
        EXIT_NUMERICAL
    } else {
        EXIT_USAGE
    }
}

/// Runs one command; `Ok(false)` means a pass/fail check failed.
pub fn run(cli: &Cli) -> anyhow::Result<bool> {
    let out = Output { json: cli.json };
    match &cli.command {
        Command::Gen(a) => cmd_gen(a, &out),
        Command::Recover(a) => cmd_recover(a, &out),
        Command::Sweep(a) => cmd_sweep(a, &out),
        Command::Backward(a) => cmd_backward(a, &out),
        Command::VerifyExpansion(a) => cmd_verify(a, &out),
        Command::FirstOrder(a) => cmd_first_order(a, &out),
        Command::Naive(a) => cmd_naive(a, &out),
        Command::Plot(a) => cmd_plot(a, &out),
    }
}

struct Output {
    json: bool,
}

impl Output {
    /// JSON on stdout in `--json` mode, otherwise the given text lines.
    fn emit<T: Serialize>(&self, value: &T, lines: impl FnOnce() -> Vec<String>) {
        let mut stdout = std::io::stdout().lock();
        if self.json {
            let _ = stdout.write_all(&to_json_bytes(value));
        } else {
            for l in lines() {
                let _ = writeln!(stdout, "{l}");
            }
        }
    }
}

fn check_lines(checks: &[Check]) -> Vec<String> {
    checks.iter().map(Check::line).collect()
}

fn sizes_or_singletons(clusters: Option<&str>, n: Option<usize>) -> anyhow::Result<Vec<usize>> {
    let sizes = match (clusters, n) {
        (Some(c), _) => parse_sizes(c)?,
        (None, Some(n)) => vec![1; n],
        (None, None) => bail!("give --n or --clusters"),
    };
    if let Some(n) = n {
        let total: usize = sizes.iter().sum();
        if total != n {
            bail!("cluster sizes must sum to n: {} sums to {total}, n = {n}", sizes.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(","));
        }
    }
    Ok(sizes)
}

fn cmd_gen(a: &GenArgs, out: &Output) -> anyhow::Result<bool> {
    let sizes = sizes_or_singletons(a.clusters.as_deref(), a.n)?;
    let mut req = ClusterRequest::new(sizes, a.delta, a.seed);
    if let Some(lo) = a.amp_lo {
        req.amp_lo = lo;
    }
    if let Some(hi) = a.amp_hi {
        req.amp_hi = hi;
    }
    let signal = Signal::generate(&req)?;
    if let Some(path) = &a.out {
        write_bytes(path, &to_json_bytes(&signal))?;
    }
    let c = &signal.config;
    out.emit(&signal, || {
        vec![
            format!("n = {}, partition = {:?}, ell_star = {}", c.n, c.partition, c.ell_star),
            format!("delta = {:e}, tau = {:.4}, T = {:.4}, eta = {:.4}", c.delta, c.tau, c.big_t, c.eta),
        ]
    });
    Ok(true)
}

fn cmd_recover(a: &RecoverArgs, out: &Output) -> anyhow::Result<bool> {
    let signal = read_signal(&a.signal)?;
    let n = signal.n();
    let method: Method = a.method.into();
    let omega = a.omega.unwrap_or((2 * n - 1) as f64);
    if !(a.epsilon >= 0.0 && a.epsilon.is_finite()) {
        bail!("epsilon must be a non-negative number");
    }
    let count = moments_needed(method, n, omega);
    let m = perturb(&signal.moments(count), &NoiseSpec::seeded(a.epsilon, a.seed));
    let opts = MethodOptions {
        lambdas: a.lambdas.clone(),
        pencil_l: a.pencil_l,
        pencil_amplitudes: match a.pencil_amplitudes {
            AmplitudeArg::FirstMoments => AmplitudeFit::FirstMoments,
            AmplitudeArg::AllSamples => AmplitudeFit::AllSamples,
        },
    };
    let result = recover(method, &m, n, omega, &opts, a.project)?.with_truth(&signal)?;
    let backward = match method {
        Method::Classical => Some(backward_report(&m, &result)?),
        _ => None,
    };
    let report = RecoveryReport {
        method,
        epsilon: a.epsilon,
        seed: a.seed,
        omega,
        result,
        backward,
    };
    if let Some(path) = &a.out {
        write_bytes(path, &to_json_bytes(&report))?;
    }
    out.emit(&report, || {
        let r = &report.result;
        let mut lines = vec![format!("method = {method:?}, projected = {}", r.projected)];
        for j in 0..n {
            lines.push(format!(
                "node {j}: |dx| = {:.3e}, |da| = {:.3e}",
                r.node_errors.get(j).copied().unwrap_or(f64::NAN),
                r.amp_errors.get(j).copied().unwrap_or(f64::NAN)
            ));
        }
        if let Some(b) = &report.backward {
            lines.push(format!(
                "berr / eps = [{:.2}, {:.2}, {:.2}]",
                b.machine_eps_ratio[0], b.machine_eps_ratio[1], b.machine_eps_ratio[2]
            ));
        }
        lines
    });
    Ok(true)
}

/// Applies `key=value` overrides to any serializable config. Keys may be
/// dotted paths into nested objects; unknown keys are rejected. Values are
/// parsed as JSON, falling back to a plain string.
pub fn apply_overrides<T: Serialize + DeserializeOwned>(value: &T, overrides: &[String]) -> anyhow::Result<T> {
    let mut tree = serde_json::to_value(value)?;
    for o in overrides {
        let (key, raw) = o.split_once('=').ok_or_else(|| anyhow!("override {o:?} is not KEY=VALUE"))?;
        let parsed: serde_json::Value =
            serde_json::from_str(raw).unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
        let mut node = &mut tree;
        for part in key.split('.') {
            node = node
                .as_object_mut()
                .and_then(|obj| obj.get_mut(part))
                .ok_or_else(|| anyhow!("unknown configuration key {key:?}"))?;
        }
        *node = parsed;
    }
    serde_json::from_value(tree).context("invalid override value")
}

/// Summary of a sweep run from a spec file.
#[derive(Debug, Serialize)]
pub struct SpecSweepSummary {
    pub spec: SweepSpec,
    pub files: Vec<String>,
    pub fits: BTreeMap<String, SlopeFit>,
    pub failed_trials: usize,
    pub failure_rates: Vec<f64>,
    pub warnings: Vec<String>,
}

fn cmd_sweep(a: &SweepArgs, out: &Output) -> anyhow::Result<bool> {
    if let Some(name) = &a.preset {
        let preset: Preset = name.parse().map_err(|e: String| anyhow!(e))?;
        let cfg = apply_overrides(&PresetConfig::default(), &a.overrides)?;
        let run = run_preset(preset, &cfg)?;
        for (file, bytes) in &run.files {
            write_bytes(&a.out_dir.join(file), bytes)?;
        }
        write_bytes(&a.out_dir.join(summary_name(preset)), &to_json_bytes(&run.summary))?;
        out.emit(&run.summary, || {
            let mut l = check_lines(&run.summary.checks);
            l.extend(run.summary.warnings.iter().map(|w| format!("warning: {w}")));
            l
        });
        return Ok(run.summary.pass);
    }
    let path = a.spec.as_ref().ok_or_else(|| anyhow!("give --preset or --spec"))?;
    let spec: SweepSpec = read_json(path)?;
    let spec = apply_overrides(&spec, &a.overrides)?;
    let outcome = run_sweep(&spec)?;
    let x = match spec.grid {
        Grid::Delta(_) => Field::Delta,
        Grid::Srf(_) => Field::Srf,
    };
    let mut fits = BTreeMap::new();
    for (class, cname) in [(NodeClass::Cluster, "cluster"), (NodeClass::Isolated, "noncluster")] {
        for y in [Field::Kx, Field::Ka, Field::Discrepancy] {
            if let Some(f) = class_fit(&outcome.records, x, y, class, spec.regime_c) {
                fits.insert(format!("{y}_{cname}"), f);
            }
        }
    }
    write_bytes(&a.out_dir.join("sweep.csv"), &csv_bytes(&outcome.records))?;
    let summary = SpecSweepSummary {
        spec,
        files: vec!["sweep.csv".into(), "sweep_summary.json".into()],
        fits,
        failed_trials: outcome.failures.len(),
        failure_rates: outcome.failure_rates.clone(),
        warnings: outcome.warnings.clone(),
    };
    write_bytes(&a.out_dir.join("sweep_summary.json"), &to_json_bytes(&summary))?;
    out.emit(&summary, || {
        let mut l: Vec<String> = summary
            .fits
            .iter()
            .map(|(k, f)| format!("{k}: slope {:.3} [{:.3}, {:.3}]", f.slope, f.ci[0], f.ci[1]))
            .collect();
        l.extend(summary.warnings.iter().map(|w| format!("warning: {w}")));
        l
    });
    Ok(true)
}

fn cmd_backward(a: &BackwardArgs, out: &Output) -> anyhow::Result<bool> {
    if a.trials == 0 {
        bail!("trials must be at least 1");
    }
    let audit = backward_audit(a.trials, a.seed)?;
    if let Some(path) = &a.out {
        write_bytes(path, &csv_of(&audit.rows)?)?;
    }
    out.emit(&audit, || check_lines(&audit.checks));
    Ok(audit.pass)
}

fn cmd_verify(a: &ExpansionArgs, out: &Output) -> anyhow::Result<bool> {
    let sizes = sizes_or_singletons(a.clusters.as_deref(), Some(a.n))?;
    let audit = expansion_audit(&sizes, a.delta, a.seed)?;
    out.emit(&audit, || check_lines(&audit.checks));
    Ok(audit.pass)
}

fn cmd_first_order(a: &FirstOrderArgs, out: &Output) -> anyhow::Result<bool> {
    if a.audit {
        let audit = first_order_audit(a.seed, a.trials)?;
        out.emit(&audit, || check_lines(&audit.checks));
        return Ok(audit.pass);
    }
    let signal = match &a.signal {
        Some(p) => read_signal(p)?,
        None => Signal::generate(&ClusterRequest::new(parse_sizes(&a.clusters)?, a.delta, a.seed))?,
    };
    let n2 = 2 * signal.n();
    let d1 = NoiseSpec::seeded(1.0, derive_seed(a.seed, 2, 0)).coefficients(n2);
    let d2 = NoiseSpec::seeded(1.0, derive_seed(a.seed, 3, 0)).coefficients(n2);
    let report = first_order_report(&signal, &d1, &d2)?;
    out.emit(&report, || {
        let mut l: Vec<String> = report
            .entries
            .iter()
            .map(|e| format!("node {}: |c| = {:.4e}, |c| / bound = {:.4e}", e.j, e.c.norm(), e.constant))
            .collect();
        l.push(format!("linearity defect = {:.2e}", report.linearity_defect));
        l
    });
    Ok(true)
}

/// Summary of `prony naive`.
#[derive(Debug, Serialize)]
pub struct NaiveSummary {
    pub spec: NaiveSpec,
    pub fits: BTreeMap<String, SlopeFit>,
    pub checks: Vec<Check>,
    pub failed_trials: usize,
    pub pass: bool,
}

fn cmd_naive(a: &NaiveArgs, out: &Output) -> anyhow::Result<bool> {
    let default = crate::presets::naive_delta_grid(a.ell, 2);
    let lo = a.delta_lo.unwrap_or(default[0]);
    let hi = a.delta_hi.unwrap_or(default[1]);
    if !(lo > 0.0 && hi > lo) || a.points < 2 {
        bail!("need 0 < delta-lo < delta-hi and at least 2 points");
    }
    let spec = NaiveSpec {
        ell: a.ell,
        delta_grid: log_grid(lo, hi, a.points),
        epsilon: a.epsilon,
        trials_per_point: a.trials,
        seed: a.seed,
    };
    let outcome = naive_comparison(&spec)?;
    let (fits, checks) = naive_checks(a.ell, &outcome, "");
    write_bytes(&a.out_dir.join(format!("naive_l{}.csv", a.ell)), &csv_of(&outcome.records)?)?;
    let summary = NaiveSummary {
        spec,
        fits,
        failed_trials: outcome.records.iter().filter(|r| !r.success).count(),
        pass: all_pass(&checks),
        checks,
    };
    write_bytes(&a.out_dir.join(format!("naive_l{}_summary.json", a.ell)), &to_json_bytes(&summary))?;
    out.emit(&summary, || check_lines(&summary.checks));
    Ok(summary.pass)
}

/// `<stem>_data.csv` next to the SVG.
pub fn plot_data_path(svg: &Path) -> PathBuf {
    let stem = svg.file_stem().and_then(|s| s.to_str()).unwrap_or("plot");
    svg.with_file_name(format!("{stem}_data.csv"))
}

#[derive(Debug, Serialize)]
struct PlotSummary {
    svg: PathBuf,
    data: PathBuf,
    fits: Vec<PlotFit>,
}

#[derive(Debug, Serialize)]
struct PlotFit {
    panel: String,
    node_idx: usize,
    fit: SlopeFit,
}

fn cmd_plot(a: &PlotArgs, out: &Output) -> anyhow::Result<bool> {
    let field = |s: &str| s.parse::<Field>().map_err(|e| anyhow!(e));
    let file = std::fs::File::open(&a.csv).with_context(|| format!("opening {}", a.csv.display()))?;
    let records = read_csv(file)?;
    let spec = PlotSpec {
        x: field(&a.x)?,
        panels: a.panels.iter().map(|p| field(p)).collect::<anyhow::Result<_>>()?,
        nodes: a.nodes.clone(),
        regime_c: a.regime_c,
        title: a.title.clone(),
    };
    let plot = render(&records, &spec)?;
    let data = plot_data_path(&a.out);
    write_bytes(&a.out, plot.svg.as_bytes())?;
    write_bytes(&data, &plot.data_csv)?;
    let summary = PlotSummary {
        svg: a.out.clone(),
        data,
        fits: plot
            .fits
            .iter()
            .map(|(f, j, fit)| PlotFit {
                panel: f.to_string(),
                node_idx: *j,
                fit: *fit,
            })
            .collect(),
    };
    out.emit(&summary, || {
        summary
            .fits
            .iter()
            .map(|f| format!("{} node {}: slope {:.3}", f.panel, f.node_idx, f.fit.slope))
            .collect()
    });
    Ok(true)
}
