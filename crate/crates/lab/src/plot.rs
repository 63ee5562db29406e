//! Static log-log SVG panels from sweep CSV tables.
//!
//! One panel per y column; each node index gets its own colour, a scatter of
//! every successful trial and the line fitted to its per-point medians.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use anyhow::{bail, ensure};
use serde::Serialize;

use crate::fit::{fit_slope, Field, SlopeFit};
use crate::sweep::TrialRecord;

const PANEL_W: f64 = 360.0;
const PANEL_H: f64 = 300.0;
const MARGIN_L: f64 = 58.0;
const MARGIN_R: f64 = 12.0;
const MARGIN_T: f64 = 28.0;
const MARGIN_B: f64 = 42.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf",
];

#[derive(Debug, Clone, PartialEq)]
pub struct PlotSpec {
    pub x: Field,
    pub panels: Vec<Field>,
    /// Restrict to these node indices (all when `None`).
    pub nodes: Option<Vec<usize>>,
    /// Keep only rows inside the regime `ε ≤ c·δ^{2ℓ*−1}` for this `c`.
    pub regime_c: Option<f64>,
    pub title: String,
}

impl PlotSpec {
    /// The three amplification panels against `x`.
    pub fn standard(x: Field) -> Self {
        Self {
            x,
            panels: vec![Field::Kx, Field::Ka, Field::Discrepancy],
            nodes: None,
            regime_c: None,
            title: String::new(),
        }
    }
}

/// One row of the plot-data CSV.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlotPoint {
    pub panel: &'static str,
    pub node_idx: usize,
    pub x: f64,
    pub y: f64,
    /// Value of the fitted line at `x` (empty without a fit).
    pub fit_y: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Plot {
    pub svg: String,
    pub data_csv: Vec<u8>,
    pub fits: Vec<(Field, usize, SlopeFit)>,
}

struct Series {
    node: usize,
    points: Vec<(f64, f64)>,
    fit: Option<SlopeFit>,
}

pub fn render(records: &[TrialRecord], spec: &PlotSpec) -> anyhow::Result<Plot> {
    ensure!(!spec.panels.is_empty(), "no panels requested");
    let keep = |r: &TrialRecord| {
        r.success
            && r.node_idx.is_some_and(|j| spec.nodes.as_ref().is_none_or(|ns| ns.contains(&j)))
            && spec.regime_c.is_none_or(|c| r.in_regime(c))
    };
    let rows: Vec<&TrialRecord> = records.iter().filter(|r| keep(r)).collect();
    if rows.is_empty() {
        bail!("filter selects no successful rows");
    }
    let nodes: BTreeSet<usize> = rows.iter().filter_map(|r| r.node_idx).collect();

    let mut panels = Vec::new();
    let mut points = Vec::new();
    let mut fits = Vec::new();
    for &y in &spec.panels {
        let mut series = Vec::new();
        for &node in &nodes {
            let pts: Vec<(f64, f64)> = rows
                .iter()
                .filter(|r| r.node_idx == Some(node))
                .filter_map(|r| Some((spec.x.get(r)?, y.get(r)?)))
                .filter(|&(a, b)| a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite())
                .collect();
            if pts.is_empty() {
                continue;
            }
            let fit = fit_slope(records, spec.x, y, |r| keep(r) && r.node_idx == Some(node)).ok();
            if let Some(f) = fit {
                fits.push((y, node, f));
            }
            for &(a, b) in &pts {
                points.push(PlotPoint {
                    panel: y.as_str(),
                    node_idx: node,
                    x: a,
                    y: b,
                    fit_y: fit.map(|f| 10f64.powf(f.intercept + f.slope * a.log10())),
                });
            }
            series.push(Series { node, points: pts, fit });
        }
        panels.push((y, series));
    }
    if panels.iter().all(|(_, s)| s.is_empty()) {
        bail!("no positive values to plot in the requested columns");
    }

    let mut w = csv::Writer::from_writer(Vec::new());
    for p in &points {
        w.serialize(p)?;
    }
    Ok(Plot {
        svg: svg(spec, &panels),
        data_csv: w.into_inner()?,
        fits,
    })
}

/// Decade-aligned bounds of `values`.
fn decades(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(v), h.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    let (a, b) = (lo.log10().floor(), hi.log10().ceil());
    if a == b {
        (a, a + 1.0)
    } else {
        (a, b)
    }
}

fn svg(spec: &PlotSpec, panels: &[(Field, Vec<Series>)]) -> String {
    let width = PANEL_W * panels.len() as f64;
    let height = PANEL_H + if spec.title.is_empty() { 0.0 } else { 20.0 };
    let top = height - PANEL_H;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    if !spec.title.is_empty() {
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="15" text-anchor="middle" font-size="13">{}</text>"#,
            width / 2.0,
            escape(&spec.title)
        );
    }
    for (i, (field, series)) in panels.iter().enumerate() {
        let ox = PANEL_W * i as f64;
        let (x0, x1) = decades(series.iter().flat_map(|s| s.points.iter().map(|p| p.0)));
        let (y0, y1) = decades(series.iter().flat_map(|s| s.points.iter().map(|p| p.1)));
        let pw = PANEL_W - MARGIN_L - MARGIN_R;
        let ph = PANEL_H - MARGIN_T - MARGIN_B;
        let px = |x: f64| ox + MARGIN_L + (x.log10() - x0) / (x1 - x0) * pw;
        let py = |y: f64| top + MARGIN_T + (1.0 - (y.log10() - y0) / (y1 - y0)) * ph;

        let _ = writeln!(s, "<g>");
        let _ = writeln!(
            s,
            r#"<rect x="{:.2}" y="{:.2}" width="{pw:.2}" height="{ph:.2}" fill="none" stroke="black"/>"#,
            ox + MARGIN_L,
            top + MARGIN_T
        );
        let mut d = x0;
        while d <= x1 + 0.5 {
            let gx = px(10f64.powf(d));
            let _ = writeln!(
                s,
                r##"<line x1="{gx:.2}" y1="{:.2}" x2="{gx:.2}" y2="{:.2}" stroke="#ddd"/><text x="{gx:.2}" y="{:.2}" text-anchor="middle">1e{d}</text>"##,
                top + MARGIN_T,
                top + MARGIN_T + ph,
                top + MARGIN_T + ph + 14.0
            );
            d += 1.0;
        }
        let step = ((y1 - y0) / 8.0).ceil().max(1.0);
        let mut d = y0;
        while d <= y1 + 0.5 {
            let gy = py(10f64.powf(d));
            let _ = writeln!(
                s,
                r##"<line x1="{:.2}" y1="{gy:.2}" x2="{:.2}" y2="{gy:.2}" stroke="#ddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">1e{d}</text>"##,
                ox + MARGIN_L,
                ox + MARGIN_L + pw,
                ox + MARGIN_L - 4.0,
                gy + 4.0
            );
            d += step;
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            ox + MARGIN_L + pw / 2.0,
            top + PANEL_H - 8.0,
            spec.x
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="12">{}</text>"#,
            ox + MARGIN_L + pw / 2.0,
            top + MARGIN_T - 10.0,
            field
        );
        for (k, se) in series.iter().enumerate() {
            let colour = PALETTE[se.node % PALETTE.len()];
            for &(a, b) in &se.points {
                let _ = writeln!(
                    s,
                    r#"<circle cx="{:.2}" cy="{:.2}" r="1.8" fill="{colour}" fill-opacity="0.5"/>"#,
                    px(a),
                    py(b)
                );
            }
            let label = match se.fit {
                Some(f) => {
                    let (xa, xb) = se
                        .points
                        .iter()
                        .fold((f64::INFINITY, 0.0f64), |(l, h), p| (l.min(p.0), h.max(p.0)));
                    let line = |x: f64| 10f64.powf(f.intercept + f.slope * x.log10());
                    let _ = writeln!(
                        s,
                        r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{colour}" stroke-width="1.5"/>"#,
                        px(xa),
                        py(line(xa)),
                        px(xb),
                        py(line(xb))
                    );
                    format!("node {}: slope {:.2}", se.node, f.slope)
                }
                None => format!("node {}", se.node),
            };
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}" fill="{colour}">{label}</text>"#,
                ox + MARGIN_L + 6.0,
                top + MARGIN_T + 14.0 + 13.0 * k as f64
            );
        }
        let _ = writeln!(s, "</g>");
    }
    s.push_str("</svg>\n");
    s
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
