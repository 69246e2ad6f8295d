//! Low-rank tensor completion solvers behind a common interface.
//!
//! Every solver returns a tensor that equals the observation bitwise on the
//! observed set; each published iterate is Ω-projected before the observer
//! sees it.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{DenseTensor, ObservationMask};

pub mod config;
pub mod tracenorm;
pub mod tv;
pub mod tv2;

pub use config::SolverConfig;
pub use tracenorm::{complete_tracenorm, TraceNormSolver};
pub use tv::TvDifference;
pub use tv2::{complete_tv2, objective_tv2, TvTuckerSolver};

#[derive(Clone, Debug)]
pub struct CompletionResult {
    pub restored: DenseTensor,
    pub iterations: usize,
    pub final_relative_change: f64,
    /// Objective value after each iteration.
    pub objective_trace: Vec<f64>,
    /// Primal constraint residual after each iteration.
    pub residual_trace: Vec<f64>,
}

/// Callback receiving `(iteration, iterate)` after each Ω-projected update.
pub type Observer<'a> = dyn FnMut(usize, &DenseTensor) + 'a;

/// A completion method usable by the coarse-to-fine engine.
pub trait CompletionSolver: Send + Sync {
    fn name(&self) -> &str;

    fn complete_observed(
        &self,
        y: &DenseTensor,
        omega: &ObservationMask,
        cfg: &SolverConfig,
        observer: &mut Observer<'_>,
    ) -> Result<CompletionResult>;

    fn complete(
        &self,
        y: &DenseTensor,
        omega: &ObservationMask,
        cfg: &SolverConfig,
    ) -> Result<CompletionResult> {
        self.complete_observed(y, omega, cfg, &mut |_, _| {})
    }
}

/// Built-in solvers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    /// Averaged trace norm of all unfoldings (HaLRTC-style ADMM).
    TraceNorm,
    /// Total variation plus Tucker factor trace norms (LRTC-TV-II).
    Tv2,
}

impl SolverKind {
    pub fn solver(self) -> &'static dyn CompletionSolver {
        match self {
            SolverKind::TraceNorm => &TraceNormSolver,
            SolverKind::Tv2 => &TvTuckerSolver,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SolverKind::TraceNorm => "tracenorm",
            SolverKind::Tv2 => "tv2",
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tracenorm" | "trace-norm" | "halrtc" => Ok(SolverKind::TraceNorm),
            "tv2" | "lrtc-tv2" | "lrtc-tv-ii" => Ok(SolverKind::Tv2),
            other => Err(Error::Config(format!("unknown solver {other:?}"))),
        }
    }
}

pub(crate) fn relative_change(new: &DenseTensor, old: &DenseTensor) -> f64 {
    let diff: f64 = new
        .data()
        .iter()
        .zip(old.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    let base = old.norm();
    diff.sqrt() / if base > 0.0 { base } else { 1.0 }
}

/// Both the iterate change and the primal residual, relative to the
/// iterate, are below `tol`.
pub(crate) fn converged(change: f64, residual: f64, z: &DenseTensor, tol: f64) -> bool {
    let base = z.norm();
    change < tol && residual <= tol * if base > 0.0 { base } else { 1.0 }
}

/// `a += c * b`, entrywise.
pub(crate) fn axpy(a: &mut DenseTensor, c: f64, b: &DenseTensor) {
    debug_assert_eq!(a.dims(), b.dims());
    a.data_mut()
        .iter_mut()
        .zip(b.data())
        .for_each(|(x, y)| *x += c * y);
}
