//! One entry point for every recovery variant, driven by a bandwidth `Ω`.

use prony_core::decimation::{decimated_prony, DecimationPlan};
use prony_core::model::MomentVector;
use prony_core::pencil::{matrix_pencil, AmplitudeFit, PencilParams};
use prony_core::recovery::{prony_classical, prony_homogeneous, Method, RecoveryResult};
use serde::{Deserialize, Serialize};

/// Variant-specific knobs; `None` picks the default for the bandwidth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MethodOptions {
    pub lambdas: Option<Vec<u32>>,
    pub pencil_l: Option<usize>,
    pub pencil_amplitudes: AmplitudeFit,
}

impl Default for MethodOptions {
    fn default() -> Self {
        Self {
            lambdas: None,
            pencil_l: None,
            pencil_amplitudes: AmplitudeFit::FirstMoments,
        }
    }
}

/// Number of moments `m_0..` a method reads. Prony variants use `2n`,
/// the bandwidth-aware ones use `⌊Ω⌋ + 1`.
pub fn moments_needed(method: Method, n: usize, omega: f64) -> usize {
    match method {
        Method::Classical | Method::Homogeneous => 2 * n,
        Method::Decimated | Method::Pencil => (omega.floor() as usize + 1).max(2 * n),
    }
}

/// Runs `method` on `m` (which must hold at least [`moments_needed`] values).
pub fn recover(
    method: Method,
    m: &MomentVector,
    n: usize,
    omega: f64,
    opts: &MethodOptions,
    project: bool,
) -> prony_core::Result<RecoveryResult> {
    match method {
        Method::Classical => prony_classical(m, n, project),
        Method::Homogeneous => prony_homogeneous(m, n, project),
        Method::Decimated => {
            let plan = match &opts.lambdas {
                Some(l) => DecimationPlan::new(omega, l.clone(), n)?,
                None => DecimationPlan::full(omega, n)?,
            };
            decimated_prony(m, n, &plan, project)
        }
        Method::Pencil => {
            let samples = moments_needed(method, n, omega).min(m.len());
            let window = MomentVector::new(m.values[..samples].to_vec());
            let params = match opts.pencil_l {
                Some(l) => PencilParams::new(l, n, samples)?,
                None => PencilParams::default_for(samples, n)?,
            }
            .with_amplitudes(opts.pencil_amplitudes);
            matrix_pencil(&window, n, &params, project)
        }
    }
}
