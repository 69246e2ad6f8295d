//! ADMM for `min sum_k alpha_k ||M_k||_*` subject to `M_k = Z_(k)` and
//! `[Z]_Ω = [Y]_Ω`.
//!
//! Per iteration, with scaled penalty `rho`:
//!
//! ```text
//! M_k <- svt(Z_(k) + L_k / rho, s * alpha_k / rho)
//! Z   <- mean_k fold(M_k - L_k / rho), then Z_Ω <- Y_Ω
//! L_k <- L_k + rho (Z - M_k)
//! rho <- min(rho * growth, rho_max)
//! ```
//!
//! where `s` is `SolverConfig::trace_scale`.

use super::{
    axpy, converged, relative_change, CompletionResult, CompletionSolver, Observer, SolverConfig,
};
use crate::error::Result;
use crate::linalg::svt_parts;
use crate::tensor::{fold, matricize, DenseTensor, ObservationMask};

#[derive(Clone, Copy, Debug, Default)]
pub struct TraceNormSolver;

impl CompletionSolver for TraceNormSolver {
    fn name(&self) -> &str {
        "tracenorm"
    }

    fn complete_observed(
        &self,
        y: &DenseTensor,
        omega: &ObservationMask,
        cfg: &SolverConfig,
        observer: &mut Observer<'_>,
    ) -> Result<CompletionResult> {
        run(y, omega, cfg, observer)
    }
}

pub fn complete_tracenorm(
    y: &DenseTensor,
    omega: &ObservationMask,
    cfg: &SolverConfig,
) -> Result<CompletionResult> {
    run(y, omega, cfg, &mut |_, _| {})
}

fn run(
    y: &DenseTensor,
    omega: &ObservationMask,
    cfg: &SolverConfig,
    observer: &mut Observer<'_>,
) -> Result<CompletionResult> {
    let order = y.order();
    cfg.validate(order)?;
    omega.check_observed_finite(y)?;
    let dims = y.dims().to_vec();

    let mut z = omega.observed_or_zero(y)?;
    let mut duals = vec![DenseTensor::zeros(&dims)?; order];
    let mut rho = cfg.rho0;
    let mut objective_trace = Vec::new();
    let mut residual_trace = Vec::new();
    let mut change = f64::INFINITY;
    let mut iterations = 0;

    for iter in 1..=cfg.max_iters {
        let mut aux = Vec::with_capacity(order);
        let mut objective = 0.0;
        for (k, dual) in duals.iter().enumerate() {
            let mut shifted = z.clone();
            axpy(&mut shifted, 1.0 / rho, dual);
            let tau = cfg.trace_scale * cfg.alpha[k] / rho;
            let shrunk = svt_parts(matricize(&shifted, k)?.as_ref(), tau)?;
            objective += cfg.alpha[k] * shrunk.nuclear;
            aux.push(fold(shrunk.matrix.as_ref(), k, &dims)?);
        }

        let mut next = DenseTensor::zeros(&dims)?;
        let inv = 1.0 / order as f64;
        for (m, l) in aux.iter().zip(&duals) {
            axpy(&mut next, inv, m);
            axpy(&mut next, -inv / rho, l);
        }
        omega.project(&mut next, y)?;

        let mut residual = 0.0;
        for (m, l) in aux.iter().zip(duals.iter_mut()) {
            for ((lv, &zv), &mv) in l.data_mut().iter_mut().zip(next.data()).zip(m.data()) {
                let diff = zv - mv;
                *lv += rho * diff;
                residual += diff * diff;
            }
        }

        change = relative_change(&next, &z);
        z = next;
        iterations = iter;
        objective_trace.push(objective);
        residual_trace.push(residual.sqrt());
        observer(iter, &z);

        rho = (rho * cfg.rho_growth).min(cfg.rho_max);
        if converged(change, residual.sqrt(), &z, cfg.tol) {
            break;
        }
    }

    Ok(CompletionResult {
        restored: z,
        iterations,
        final_relative_change: change,
        objective_trace,
        residual_trace,
    })
}
