//! Completion with total variation and Tucker-factor trace norms:
//!
//! ```text
//! min  l1 sum_k b_k |F_k Z_(k)|_1 + l2 sum_k ||U_k||_* + l3 ||S||_F^2
//! s.t. Z = S x_1 U_1 ... x_d U_d,   [Z]_Ω = [Y]_Ω
//! ```
//!
//! with square factors `U_k` (`I_k x I_k`) and a full-size core.
//!
//! ADMM splits `G_k = F_k Z_(k)` and `V_k = U_k` and dualizes the Tucker
//! constraint. One sweep updates, in order: `G_k` (soft threshold), `V_k`
//! (singular value threshold), each `U_k` (regularized least squares, modes
//! in sequence), `S` (ridge solve in the eigenbases of `U_k^T U_k`), `Z`
//! (exact solve of `(I + sum_k b_k F_k^T F_k) Z = rhs` in the cosine basis,
//! then Ω-projection), and finally the multipliers.

use faer::linalg::solvers::Solve;
use faer::{Mat, MatRef, Side};

use super::tv::{adjoint_along, forward_along, laplacian_eigenbasis};
use super::{
    axpy, converged, relative_change, CompletionResult, CompletionSolver, Observer, SolverConfig,
};
use crate::error::{Error, Result};
use crate::linalg::{self, soft_threshold, svt_parts};
use crate::tensor::{
    matricize, mode_k_product, multi_mode_product, sum_of_squares, DenseTensor, ObservationMask,
};

#[derive(Clone, Copy, Debug, Default)]
pub struct TvTuckerSolver;

impl CompletionSolver for TvTuckerSolver {
    fn name(&self) -> &str {
        "tv2"
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

pub fn complete_tv2(
    y: &DenseTensor,
    omega: &ObservationMask,
    cfg: &SolverConfig,
) -> Result<CompletionResult> {
    run(y, omega, cfg, &mut |_, _| {})
}

/// Exact objective value of `(z, core, factors)`; the Tucker constraint is
/// not checked, only shape conformity.
pub fn objective_tv2(
    z: &DenseTensor,
    core: &DenseTensor,
    factors: &[Mat<f64>],
    cfg: &SolverConfig,
) -> Result<f64> {
    let order = z.order();
    if core.order() != order || factors.len() != order || cfg.beta.len() != order {
        return Err(Error::shape(format!(
            "objective needs {order} modes in core, factors and beta"
        )));
    }
    for (k, u) in factors.iter().enumerate() {
        if u.nrows() != z.dims()[k] || u.ncols() != core.dims()[k] {
            return Err(Error::shape(format!(
                "factor {k} is {}x{}, expected {}x{}",
                u.nrows(),
                u.ncols(),
                z.dims()[k],
                core.dims()[k]
            )));
        }
    }
    let mut tv = 0.0;
    for k in (0..order).filter(|&k| cfg.beta[k]) {
        if let Some(d) = forward_along(z, k) {
            tv += d.data().iter().map(|v| v.abs()).sum::<f64>();
        }
    }
    let mut nuclear = 0.0;
    for u in factors {
        nuclear += linalg::nuclear_norm(u.as_ref())?;
    }
    Ok(cfg.lambda1 * tv + cfg.lambda2 * nuclear + cfg.lambda3 * sum_of_squares(core.data()))
}

fn lincomb(a: MatRef<'_, f64>, c: f64, b: MatRef<'_, f64>) -> Mat<f64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] + c * b[(i, j)])
}

/// `core x_n U_n` over every mode except `skip`.
fn product_except(core: &DenseTensor, factors: &[Mat<f64>], skip: usize) -> Result<DenseTensor> {
    let refs: Vec<_> = factors
        .iter()
        .enumerate()
        .map(|(n, u)| (n != skip).then(|| u.as_ref()))
        .collect();
    multi_mode_product(core, &refs)
}

fn tucker_product(core: &DenseTensor, factors: &[Mat<f64>]) -> Result<DenseTensor> {
    let refs: Vec<_> = factors.iter().map(|u| Some(u.as_ref())).collect();
    multi_mode_product(core, &refs)
}

/// Solves `X a = rhs` for symmetric positive definite `a`.
fn solve_right_spd(rhs: MatRef<'_, f64>, a: MatRef<'_, f64>) -> Result<Mat<f64>> {
    let llt = a.llt(Side::Lower).map_err(|_| {
        Error::InvalidConfig("factor update system is not positive definite".into())
    })?;
    let xt = llt.solve(rhs.transpose());
    Ok(xt.transpose().to_owned())
}

/// `argmin_S l3 ||S||^2 + rho/2 ||T - S x U||^2`.
fn ridge_core(
    target: &DenseTensor,
    factors: &[Mat<f64>],
    rho: f64,
    lambda3: f64,
) -> Result<DenseTensor> {
    let mut spectra = Vec::with_capacity(factors.len());
    let mut to_eig = Vec::with_capacity(factors.len());
    let mut from_eig = Vec::with_capacity(factors.len());
    for u in factors {
        let gram = u.transpose() * u;
        let (vals, q) = linalg::symmetric_eigen(gram.as_ref())?;
        to_eig.push(q.transpose() * u.transpose());
        spectra.push(vals.into_iter().map(|v| v.max(0.0)).collect::<Vec<_>>());
        from_eig.push(q);
    }
    let refs: Vec<_> = to_eig.iter().map(|m| Some(m.as_ref())).collect();
    let projected = multi_mode_product(target, &refs)?;
    let scale = DenseTensor::from_fn(projected.dims(), |idx| {
        let prod: f64 = idx.iter().zip(&spectra).map(|(&i, s)| s[i]).product();
        let denom = rho * prod + 2.0 * lambda3;
        if denom > f64::MIN_POSITIVE {
            rho / denom
        } else {
            0.0
        }
    })?;
    let scaled = projected.zip_with(&scale, |a, b| a * b)?;
    let refs: Vec<_> = from_eig.iter().map(|m| Some(m.as_ref())).collect();
    multi_mode_product(&scaled, &refs)
}

struct TvBasis {
    mode: usize,
    eig: Vec<f64>,
    basis: Mat<f64>,
    basis_t: Mat<f64>,
}

/// Solves `(I + sum_k F_k^T F_k along mode k) Z = rhs`.
fn solve_smoothing(rhs: &DenseTensor, bases: &[TvBasis]) -> Result<DenseTensor> {
    if bases.is_empty() {
        return Ok(rhs.clone());
    }
    let mut t = rhs.clone();
    for b in bases {
        t = mode_k_product(&t, b.basis_t.as_ref(), b.mode)?;
    }
    let denom = DenseTensor::from_fn(t.dims(), |idx| {
        1.0 + bases.iter().map(|b| b.eig[idx[b.mode]]).sum::<f64>()
    })?;
    t = t.zip_with(&denom, |a, d| a / d)?;
    for b in bases {
        t = mode_k_product(&t, b.basis.as_ref(), b.mode)?;
    }
    Ok(t)
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

    // Modes of length one carry no differences.
    let tv_modes: Vec<usize> = (0..order)
        .filter(|&k| cfg.beta[k] && dims[k] >= 2)
        .collect();
    let bases: Vec<TvBasis> = tv_modes
        .iter()
        .map(|&k| {
            let (eig, basis) = laplacian_eigenbasis(dims[k]);
            let basis_t = basis.transpose().to_owned();
            TvBasis {
                mode: k,
                eig,
                basis,
                basis_t,
            }
        })
        .collect();

    let mut z = omega.observed_or_zero(y)?;
    let mut core = z.clone();
    let mut factors: Vec<Mat<f64>> = dims.iter().map(|&n| Mat::identity(n, n)).collect();
    let mut aux_factors = factors.clone();
    let mut factor_duals: Vec<Mat<f64>> = dims.iter().map(|&n| Mat::zeros(n, n)).collect();
    let mut diffs: Vec<DenseTensor> = tv_modes
        .iter()
        .map(|&k| forward_along(&z, k).expect("tv mode has length >= 2"))
        .collect();
    let mut diff_duals: Vec<DenseTensor> = diffs.iter().map(|g| g.map(|_| 0.0)).collect();
    let mut tucker_dual = DenseTensor::zeros(&dims)?;

    let mut rho = cfg.rho0;
    let mut objective_trace = Vec::new();
    let mut residual_trace = Vec::new();
    let mut change = f64::INFINITY;
    let mut iterations = 0;

    for iter in 1..=cfg.max_iters {
        // G_k
        for ((g, psi), &k) in diffs.iter_mut().zip(&diff_duals).zip(&tv_modes) {
            let mut d = forward_along(&z, k).expect("tv mode");
            axpy(&mut d, -1.0 / rho, psi);
            *g = soft_threshold(&d, cfg.lambda1 / rho)?;
        }

        // V_k
        let mut nuclear = 0.0;
        for ((v, u), phi) in aux_factors.iter_mut().zip(&factors).zip(&factor_duals) {
            let shifted = lincomb(u.as_ref(), 1.0 / rho, phi.as_ref());
            let shrunk = svt_parts(shifted.as_ref(), cfg.lambda2 / rho)?;
            nuclear += shrunk.nuclear;
            *v = shrunk.matrix;
        }

        // U_k
        let mut target = z.clone();
        axpy(&mut target, 1.0 / rho, &tucker_dual);
        for k in 0..order {
            let b = matricize(&product_except(&core, &factors, k)?, k)?;
            let t = matricize(&target, k)?;
            let w = lincomb(
                aux_factors[k].as_ref(),
                -1.0 / rho,
                factor_duals[k].as_ref(),
            );
            let mut normal = &b * b.transpose();
            for i in 0..normal.nrows() {
                normal[(i, i)] += 1.0;
            }
            let rhs = &t * b.transpose() + &w;
            factors[k] = solve_right_spd(rhs.as_ref(), normal.as_ref())?;
        }

        // S
        core = ridge_core(&target, &factors, rho, cfg.lambda3)?;

        // Z
        let tucker = tucker_product(&core, &factors)?;
        let mut rhs = tucker.clone();
        axpy(&mut rhs, -1.0 / rho, &tucker_dual);
        for ((g, psi), &k) in diffs.iter().zip(&diff_duals).zip(&tv_modes) {
            let mut shifted = g.clone();
            axpy(&mut shifted, 1.0 / rho, psi);
            axpy(&mut rhs, 1.0, &adjoint_along(&shifted, k, dims[k]));
        }
        let mut next = solve_smoothing(&rhs, &bases)?;
        omega.project(&mut next, y)?;

        // multipliers
        let mut residual = 0.0;
        for ((lv, &zv), &xv) in tucker_dual
            .data_mut()
            .iter_mut()
            .zip(next.data())
            .zip(tucker.data())
        {
            let diff = zv - xv;
            *lv += rho * diff;
            residual += diff * diff;
        }
        for ((phi, u), v) in factor_duals.iter_mut().zip(&factors).zip(&aux_factors) {
            *phi = lincomb(phi.as_ref(), rho, (u - v).as_ref());
        }
        let mut tv = 0.0;
        for ((psi, g), &k) in diff_duals.iter_mut().zip(&diffs).zip(&tv_modes) {
            let d = forward_along(&next, k).expect("tv mode");
            tv += d.data().iter().map(|v| v.abs()).sum::<f64>();
            axpy(psi, rho, &g.sub(&d)?);
        }

        change = relative_change(&next, &z);
        z = next;
        iterations = iter;
        // The factor term is evaluated at the split copies V_k.
        objective_trace.push(
            cfg.lambda1 * tv + cfg.lambda2 * nuclear + cfg.lambda3 * sum_of_squares(core.data()),
        );
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
