use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hyperparameters shared by the completion solvers.
///
/// The trace-norm solver reads `alpha`, `trace_scale` and the penalty
/// schedule; the TV/Tucker solver reads the three `lambda` weights, `beta`
/// and the penalty schedule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Total-variation weight.
    pub lambda1: f64,
    /// Trace-norm weight on the Tucker factors.
    pub lambda2: f64,
    /// Ridge weight on the Tucker core.
    pub lambda3: f64,
    /// Per-mode switch for the total-variation term.
    pub beta: Vec<bool>,
    /// Per-mode trace-norm weights, summing to one.
    pub alpha: Vec<f64>,
    /// Uniform multiplier on the trace-norm shrinkage of the trace-norm solver.
    pub trace_scale: f64,
    pub rho0: f64,
    pub rho_growth: f64,
    pub rho_max: f64,
    pub max_iters: usize,
    /// Stop once `||Z_new - Z_old||_F / ||Z_old||_F` and the relative primal
    /// residual both drop below this.
    pub tol: f64,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self::for_order(3)
    }
}

impl SolverConfig {
    /// Defaults for a `d`-way tensor: TV on the first two (spatial) modes,
    /// equal trace-norm weights.
    pub fn for_order(d: usize) -> Self {
        let d = d.max(1);
        Self {
            lambda1: 1.0,
            lambda2: 10.0,
            lambda3: 0.1,
            beta: (0..d).map(|k| k < 2).collect(),
            alpha: vec![1.0 / d as f64; d],
            trace_scale: 1.0,
            rho0: 1e-3,
            rho_growth: 1.05,
            rho_max: 1e6,
            max_iters: 500,
            tol: 1e-5,
            seed: 0,
        }
    }

    /// Parses a TOML table; absent keys keep their defaults.
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("solver config: {e}")))
    }

    /// Copy with the low-rank pressure multiplied by `factor`: `lambda2` for
    /// the TV/Tucker solver, the shrinkage scale for the trace-norm solver.
    pub fn tightened(&self, factor: f64) -> Self {
        Self {
            lambda2: self.lambda2 * factor,
            trace_scale: self.trace_scale * factor,
            ..self.clone()
        }
    }

    pub fn validate(&self, order: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        for (name, v) in [
            ("lambda1", self.lambda1),
            ("lambda2", self.lambda2),
            ("lambda3", self.lambda3),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be finite and nonnegative, got {v}"));
            }
        }
        if self.beta.len() != order || self.alpha.len() != order {
            return bad(format!(
                "beta/alpha have lengths {}/{}, tensor has {order} modes",
                self.beta.len(),
                self.alpha.len()
            ));
        }
        if self.alpha.iter().any(|a| !(*a >= 0.0 && a.is_finite())) {
            return bad(format!(
                "alpha weights must be nonnegative: {:?}",
                self.alpha
            ));
        }
        let sum: f64 = self.alpha.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return bad(format!("alpha weights sum to {sum}, expected 1"));
        }
        if !(self.trace_scale > 0.0 && self.trace_scale.is_finite()) {
            return bad(format!(
                "trace_scale must be positive, got {}",
                self.trace_scale
            ));
        }
        if !(self.rho0 > 0.0 && self.rho0.is_finite()) {
            return bad(format!("rho0 must be positive, got {}", self.rho0));
        }
        if !(self.rho_growth >= 1.0 && self.rho_growth.is_finite()) {
            return bad(format!("rho_growth must be >= 1, got {}", self.rho_growth));
        }
        if !(self.rho_max >= self.rho0) {
            return bad(format!(
                "rho_max {} is below rho0 {}",
                self.rho_max, self.rho0
            ));
        }
        if self.max_iters == 0 {
            return bad("max_iters must be positive".into());
        }
        if !(self.tol > 0.0) {
            return bad(format!("tol must be positive, got {}", self.tol));
        }
        Ok(())
    }
}
