use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use num_complex::Complex64;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A precondition on the inputs does not hold.
    InvalidArgument(String),
    /// The requested node geometry cannot be realized on the unit circle.
    Geometry(String),
    /// Elimination hit a pivot below the singularity threshold.
    Singular { pivot: usize, magnitude: f64 },
    /// Aberth iteration did not converge; carries the best iterate.
    NoConvergence {
        iterations: usize,
        best: Vec<Complex64>,
        residuals: Vec<f64>,
    },
    /// A numerical rank test failed (e.g. Matrix Pencil with σₙ/σ₁ too small).
    RankDeficient { rank: usize, required: usize },
    /// Every decimation parameter failed; one cause per λ.
    AllLambdasFailed(Vec<(u32, Error)>),
    /// A backward-error or limit estimator could not produce a value.
    Estimator(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// True for failures caused by the numbers rather than by the caller.
    pub fn is_numerical(&self) -> bool {
        !matches!(self, Error::InvalidArgument(_) | Error::Geometry(_))
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::Geometry(msg) => write!(f, "infeasible geometry: {msg}"),
            Error::Singular { pivot, magnitude } => {
                write!(f, "singular matrix: pivot {pivot} has magnitude {magnitude:e}")
            }
            Error::NoConvergence { iterations, residuals, .. } => {
                let worst = residuals.iter().cloned().fold(0.0, f64::max);
                write!(
                    f,
                    "root finder did not converge after {iterations} iterations (worst residual {worst:e})"
                )
            }
            Error::RankDeficient { rank, required } => {
                write!(f, "numerical rank {rank} below required {required}")
            }
            Error::AllLambdasFailed(causes) => {
                write!(f, "all decimation parameters failed:")?;
                for (lambda, cause) in causes {
                    write!(f, " [λ={lambda}: {cause}]")?;
                }
                Ok(())
            }
            Error::Estimator(msg) => write!(f, "estimator failure: {msg}"),
        }
    }
}

impl core::error::Error for Error {}
