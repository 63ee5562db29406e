//! Named pass/fail checks attached to every summary.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Criterion {
    Within { target: f64, tolerance: f64 },
    AtMost { bound: f64 },
    AtLeast { bound: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    /// `None` when the quantity could not be computed (counts as a failure).
    pub value: Option<f64>,
    pub criterion: Criterion,
    pub pass: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, value: Option<f64>, criterion: Criterion) -> Self {
        let pass = value.is_some_and(|v| match criterion {
            Criterion::Within { target, tolerance } => (v - target).abs() <= tolerance,
            Criterion::AtMost { bound } => v <= bound,
            Criterion::AtLeast { bound } => v >= bound,
        });
        Self {
            name: name.into(),
            value,
            criterion,
            pass,
        }
    }

    pub fn within(name: impl Into<String>, value: Option<f64>, target: f64, tolerance: f64) -> Self {
        Self::new(name, value, Criterion::Within { target, tolerance })
    }

    /// `name: value (expected …)`.
    pub fn describe(&self) -> String {
        let v = self.value.map_or("n/a".to_string(), |v| format!("{v:.4e}"));
        let c = match self.criterion {
            Criterion::Within { target, tolerance } => format!("{target} ± {tolerance}"),
            Criterion::AtMost { bound } => format!("<= {bound:e}"),
            Criterion::AtLeast { bound } => format!(">= {bound}"),
        };
        format!("{}: {} (expected {})", self.name, v, c)
    }

    pub fn line(&self) -> String {
        format!("{} {}", if self.pass { "PASS" } else { "FAIL" }, self.describe())
    }
}

/// True when every check passed.
pub fn all_pass(checks: &[Check]) -> bool {
    checks.iter().all(|c| c.pass)
}
