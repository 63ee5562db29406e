//! Log-log slope fits on per-grid-point medians with bootstrap intervals.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::sweep::TrialRecord;

/// Fewest distinct grid points a fit accepts.
pub const MIN_POINTS: usize = 5;
/// Bootstrap replicates for the confidence interval.
pub const BOOTSTRAP_REPLICATES: usize = 400;
const BOOTSTRAP_SEED: u64 = 0x0b00_75ee;

/// Numeric column of a [`TrialRecord`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Field {
    Delta,
    Srf,
    Epsilon,
    Omega,
    Kx,
    Ka,
    Discrepancy,
    Berr1,
    Berr2,
    Berr3,
}

impl Field {
    pub fn get(self, r: &TrialRecord) -> Option<f64> {
        match self {
            Field::Delta => Some(r.delta),
            Field::Srf => Some(r.srf),
            Field::Epsilon => Some(r.epsilon),
            Field::Omega => Some(r.omega),
            Field::Kx => r.kx,
            Field::Ka => r.ka,
            Field::Discrepancy => r.discrepancy,
            Field::Berr1 => r.berr1,
            Field::Berr2 => r.berr2,
            Field::Berr3 => r.berr3,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Field::Delta => "delta",
            Field::Srf => "srf",
            Field::Epsilon => "epsilon",
            Field::Omega => "omega",
            Field::Kx => "kx",
            Field::Ka => "ka",
            Field::Discrepancy => "discrepancy",
            Field::Berr1 => "berr1",
            Field::Berr2 => "berr2",
            Field::Berr3 => "berr3",
        }
    }
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Field {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "delta" => Field::Delta,
            "srf" => Field::Srf,
            "epsilon" => Field::Epsilon,
            "omega" => Field::Omega,
            "kx" => Field::Kx,
            "ka" => Field::Ka,
            "discrepancy" => Field::Discrepancy,
            "berr1" => Field::Berr1,
            "berr2" => Field::Berr2,
            "berr3" => Field::Berr3,
            _ => return Err(format!("unknown field {s:?}")),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    /// Bootstrap 90% interval of the slope.
    pub ci: [f64; 2],
    /// Distinct x values entering the fit.
    pub points: usize,
    /// Individual samples behind the medians.
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FitError {
    InsufficientPoints { found: usize, required: usize },
}

impl fmt::Display for FitError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FitError::InsufficientPoints { found, required } => {
                write!(f, "slope fit needs {required} grid points with positive data, found {found}")
            }
        }
    }
}

impl std::error::Error for FitError {}

/// Fits `log10 y` against `log10 x` over successful rows passing `filter`.
/// Rows sharing an `x` value form one grid point represented by its median.
pub fn fit_slope(
    records: &[TrialRecord],
    x: Field,
    y: Field,
    filter: impl Fn(&TrialRecord) -> bool,
) -> Result<SlopeFit, FitError> {
    let pairs = records
        .iter()
        .filter(|r| r.success && filter(r))
        .filter_map(|r| Some((x.get(r)?, y.get(r)?)));
    fit_pairs(pairs)
}

/// Same fit on raw `(x, y)` samples.
pub fn fit_pairs(pairs: impl IntoIterator<Item = (f64, f64)>) -> Result<SlopeFit, FitError> {
    let mut groups: BTreeMap<u64, (f64, Vec<f64>)> = BTreeMap::new();
    for (xv, yv) in pairs {
        if xv > 0.0 && yv > 0.0 && xv.is_finite() && yv.is_finite() {
            groups.entry(xv.to_bits()).or_insert_with(|| (xv, Vec::new())).1.push(yv);
        }
    }
    let mut grouped: Vec<(f64, Vec<f64>)> = groups.into_values().collect();
    grouped.sort_by(|a, b| a.0.total_cmp(&b.0));
    fit_grouped(&grouped)
}

/// OLS of `log10(median y)` on `log10 x`, one point per group.
pub fn fit_grouped(groups: &[(f64, Vec<f64>)]) -> Result<SlopeFit, FitError> {
    let groups: Vec<&(f64, Vec<f64>)> = groups.iter().filter(|(_, ys)| !ys.is_empty()).collect();
    if groups.len() < MIN_POINTS {
        return Err(FitError::InsufficientPoints {
            found: groups.len(),
            required: MIN_POINTS,
        });
    }
    let xs: Vec<f64> = groups.iter().map(|(x, _)| x.log10()).collect();
    let ys: Vec<f64> = groups.iter().map(|(_, v)| median(v).log10()).collect();
    let (slope, intercept, r2) = ols(&xs, &ys);

    let mut rng = ChaCha8Rng::seed_from_u64(BOOTSTRAP_SEED);
    let mut slopes = Vec::with_capacity(BOOTSTRAP_REPLICATES);
    let mut buf = Vec::new();
    for _ in 0..BOOTSTRAP_REPLICATES {
        let yb: Vec<f64> = groups
            .iter()
            .map(|(_, v)| {
                buf.clear();
                buf.extend((0..v.len()).map(|_| v[rng.gen_range(0..v.len())]));
                median(&buf).log10()
            })
            .collect();
        slopes.push(ols(&xs, &yb).0);
    }
    slopes.sort_by(f64::total_cmp);
    let q = |p: f64| slopes[((p * (slopes.len() - 1) as f64).round() as usize).min(slopes.len() - 1)];
    Ok(SlopeFit {
        slope,
        intercept,
        r2,
        ci: [q(0.05), q(0.95)],
        points: groups.len(),
        samples: groups.iter().map(|(_, v)| v.len()).sum(),
    })
}

pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let k = s.len();
    if k == 0 {
        f64::NAN
    } else if k % 2 == 1 {
        s[k / 2]
    } else {
        0.5 * (s[k / 2 - 1] + s[k / 2])
    }
}

/// `(slope, intercept, r²)`.
fn ols(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let k = x.len() as f64;
    let mx = x.iter().sum::<f64>() / k;
    let my = y.iter().sum::<f64>() / k;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let r2 = if syy > 0.0 { (sxy * sxy) / (sxx * syy) } else { 1.0 };
    (slope, intercept, r2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sweep::log_grid;

    #[test]
    fn exact_power_law() {
        let f = fit_pairs(log_grid(1e-3, 1.0, 8).into_iter().map(|x| (x, x * x))).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-9, "{f:?}");
        assert!((f.r2 - 1.0).abs() < 1e-12);
        assert!((f.ci[0] - 2.0).abs() < 1e-9 && (f.ci[1] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn constant_has_zero_slope() {
        let f = fit_pairs(log_grid(1e-3, 1.0, 6).into_iter().map(|x| (x, 3.5))).unwrap();
        assert!(f.slope.abs() < 1e-12);
    }

    #[test]
    fn too_few_points() {
        let e = fit_pairs(log_grid(1e-3, 1.0, 4).into_iter().map(|x| (x, x))).unwrap_err();
        assert_eq!(e, FitError::InsufficientPoints { found: 4, required: 5 });
    }

    #[test]
    fn median_ignores_ten_percent_contamination() {
        let xs = log_grid(1e-3, 1e-1, 10);
        let mut clean = Vec::new();
        let mut dirty = Vec::new();
        for &x in &xs {
            for t in 0..10 {
                let y = x.powi(-2) * (1.0 + 0.05 * t as f64);
                clean.push((x, y));
                // one trial in ten replaced by a wild value
                dirty.push((x, if t == 3 { 1e30 } else { y }));
            }
        }
        let a = fit_pairs(clean).unwrap();
        let b = fit_pairs(dirty).unwrap();
        assert!((a.slope - b.slope).abs() < 0.05, "{} vs {}", a.slope, b.slope);
    }

    #[test]
    fn median_even_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
