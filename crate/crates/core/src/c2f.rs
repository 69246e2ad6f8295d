//! Coarse-to-fine restoration.
//!
//! A coarse completion of the whole tensor is refined over stages
//! `f = 1..=F`. Stage `f` cuts the observation, its mask and the current
//! estimate into a `2^f x 2^f` overlapping grid, re-completes each patch with
//! the rank weight multiplied by `mu` once more, and swaps in every patch
//! whose relative gap to the current estimate is below the threshold
//! `epsilon`. The threshold is then re-derived from the gaps just seen.
//!
//! The short-cut variant runs only the finest stage, with the rank weight
//! scaled by `mu^F`.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::metrics::{psnr, rse};
use crate::patch::{extract, extract_mask, make_grid, merge};
use crate::solvers::{SolverConfig, SolverKind};
use crate::tensor::{frobenius_norm, DenseTensor, ObservationMask};

/// Version of the JSON-lines stage log written by [`write_stage_log`].
pub const STAGE_LOG_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct C2FPlan {
    /// Number of fine stages `F`.
    pub stages: usize,
    pub epsilon0: f64,
    /// Per-stage multiplier on the rank weight, `> 1`.
    pub mu: f64,
    /// Overlap for stage `f` is `overlap[f - 1]`; the last entry repeats.
    pub overlap: Vec<usize>,
    pub solver: SolverKind,
    pub config: SolverConfig,
    pub shortcut: bool,
    pub seed: u64,
}

impl Default for C2FPlan {
    fn default() -> Self {
        Self {
            stages: 3,
            epsilon0: 0.15,
            mu: 1.5,
            overlap: vec![8],
            solver: SolverKind::Tv2,
            config: SolverConfig::default(),
            shortcut: false,
            seed: 0,
        }
    }
}

/// Initial threshold used by the short-cut variant unless overridden.
pub const SHORTCUT_EPSILON0: f64 = 0.3;

impl C2FPlan {
    pub fn validate(&self, order: usize) -> Result<()> {
        if !(self.mu > 1.0 && self.mu.is_finite()) {
            return Err(Error::InvalidPlan(format!(
                "mu must exceed 1, got {}",
                self.mu
            )));
        }
        if !(self.epsilon0 > 0.0) {
            return Err(Error::InvalidPlan(format!(
                "epsilon0 must be positive, got {}",
                self.epsilon0
            )));
        }
        if self.stages > 0 && self.overlap.is_empty() {
            return Err(Error::InvalidPlan("overlap list is empty".into()));
        }
        self.config.validate(order)
    }

    pub fn overlap_for(&self, stage: usize) -> usize {
        let i = stage
            .saturating_sub(1)
            .min(self.overlap.len().saturating_sub(1));
        self.overlap.get(i).copied().unwrap_or(0)
    }

    /// Stages that actually run.
    pub fn active_stages(&self) -> Vec<usize> {
        match (self.shortcut, self.stages) {
            (_, 0) => Vec::new(),
            (true, f) => vec![f],
            (false, f) => (1..=f).collect(),
        }
    }

    /// Solver settings for stage `f`: rank weight scaled by `mu^f`.
    pub fn config_for(&self, stage: usize) -> SolverConfig {
        (0..stage).fold(self.config.clone(), |c, _| c.tightened(self.mu))
    }
}

/// `||a - b||_F / ||b||_F`; `+inf` when `b` is zero, so such a patch is
/// never replaced.
pub fn gap(a: &DenseTensor, b: &DenseTensor) -> Result<f64> {
    if a.dims() != b.dims() {
        return Err(Error::shape(format!(
            "gap between {:?} and {:?}",
            a.dims(),
            b.dims()
        )));
    }
    let base = frobenius_norm(b);
    if base == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(frobenius_norm(&a.sub(b)?) / base)
}

/// Replace iff `gap < epsilon`.
pub fn replace_decision(gap: f64, epsilon: f64) -> bool {
    gap < epsilon
}

/// Threshold for the stage after `stage_just_finished`.
///
/// After stage 1 it is `1.5 * max_k gaps[k]`; after later stages the max
/// runs only over patches that stage replaced. Infinite gaps (unsolvable
/// patches) are left out. If the max is zero or empty, `prev_epsilon` is kept.
pub fn update_epsilon(
    stage_just_finished: usize,
    gaps: &[f64],
    replaced: &[bool],
    prev_epsilon: f64,
) -> Result<f64> {
    if gaps.len() != replaced.len() {
        return Err(Error::shape(format!(
            "{} gaps but {} replacement flags",
            gaps.len(),
            replaced.len()
        )));
    }
    let masked = stage_just_finished >= 2;
    let max = gaps
        .iter()
        .zip(replaced)
        .filter(|&(g, &r)| g.is_finite() && (r || !masked))
        .map(|(&g, _)| g)
        .fold(0.0f64, f64::max);
    Ok(if max > 0.0 { 1.5 * max } else { prev_epsilon })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: usize,
    /// Gap per patch; `+inf` for skipped patches or a zero reference.
    pub gaps: Vec<f64>,
    pub replaced: Vec<bool>,
    /// Patches with no observed entry, left untouched.
    pub skipped: Vec<bool>,
    pub iterations: Vec<usize>,
    pub epsilon_used: f64,
    pub epsilon_next: f64,
    pub overlap: usize,
    pub lambda2: f64,
    pub trace_scale: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageMetrics {
    pub stage: usize,
    pub psnr: f64,
    pub rse: f64,
}

/// Output of the coarse stage, reusable across plans with the same solver
/// settings.
#[derive(Clone, Debug)]
pub struct Coarse {
    pub restored: DenseTensor,
    pub iterations: usize,
}

#[derive(Clone, Debug)]
pub struct C2FResult {
    pub restored: DenseTensor,
    pub coarse: DenseTensor,
    pub coarse_iterations: usize,
    pub stage_records: Vec<StageRecord>,
    /// Quality after the coarse stage and after each fine stage, when a
    /// ground truth was supplied.
    pub metrics_trace: Option<Vec<StageMetrics>>,
}

fn check_inputs(y: &DenseTensor, omega: &ObservationMask, plan: &C2FPlan) -> Result<()> {
    if y.dims() != omega.dims() {
        return Err(Error::shape(format!(
            "observation {:?} vs mask {:?}",
            y.dims(),
            omega.dims()
        )));
    }
    plan.validate(y.order())
}

pub fn complete_coarse(y: &DenseTensor, omega: &ObservationMask, plan: &C2FPlan) -> Result<Coarse> {
    check_inputs(y, omega, plan)?;
    let out = plan.solver.solver().complete(y, omega, &plan.config)?;
    Ok(Coarse {
        restored: out.restored,
        iterations: out.iterations,
    })
}

fn stage_metrics(
    stage: usize,
    z: &DenseTensor,
    truth: Option<&DenseTensor>,
) -> Result<Option<StageMetrics>> {
    truth
        .map(|t| {
            Ok(StageMetrics {
                stage,
                psnr: psnr(z, t)?,
                rse: rse(z, t)?,
            })
        })
        .transpose()
}

/// Runs the fine stages of `plan` (all, or only the last when
/// `plan.shortcut`) on top of an existing coarse result.
pub fn refine(
    y: &DenseTensor,
    omega: &ObservationMask,
    plan: &C2FPlan,
    coarse: &Coarse,
    truth: Option<&DenseTensor>,
) -> Result<C2FResult> {
    check_inputs(y, omega, plan)?;
    if coarse.restored.dims() != y.dims() {
        return Err(Error::shape(
            "coarse estimate does not match the observation",
        ));
    }
    let solver = plan.solver.solver();
    let mut current = coarse.restored.clone();
    let mut epsilon = plan.epsilon0;
    let mut records = Vec::new();
    let mut trace: Vec<StageMetrics> = stage_metrics(0, &current, truth)?.into_iter().collect();

    for stage in plan.active_stages() {
        let cfg = plan.config_for(stage);
        let grid = make_grid(y.dims(), stage, plan.overlap_for(stage))?;
        let y_set = extract(y, &grid)?;
        let masks = extract_mask(omega, &grid)?;
        let cur_set = extract(&current, &grid)?;

        let outcomes = (0..grid.len())
            .into_par_iter()
            .map(|k| {
                if masks[k].observed_count() == 0 {
                    return Ok(None);
                }
                solver
                    .complete(&y_set.patches[k], &masks[k], &cfg)
                    .map(Some)
                    .map_err(|e| Error::Patch {
                        index: k,
                        source: Box::new(e),
                    })
            })
            .collect::<Result<Vec<_>>>()?;

        let n = grid.len();
        let mut gaps = Vec::with_capacity(n);
        let mut replaced = Vec::with_capacity(n);
        let mut skipped = Vec::with_capacity(n);
        let mut iterations = Vec::with_capacity(n);
        let mut accepted = Vec::new();
        for (k, outcome) in outcomes.into_iter().enumerate() {
            let Some(out) = outcome else {
                log::info!("stage {stage}: patch {k} has no observed entries, kept");
                gaps.push(f64::INFINITY);
                replaced.push(false);
                skipped.push(true);
                iterations.push(0);
                continue;
            };
            let g = gap(&out.restored, &cur_set.patches[k])?;
            if !g.is_finite() {
                log::info!("stage {stage}: patch {k} reference is zero, kept");
            }
            let r = replace_decision(g, epsilon);
            gaps.push(g);
            replaced.push(r);
            skipped.push(false);
            iterations.push(out.iterations);
            if r {
                accepted.push((k, out.restored));
            }
        }
        current = merge(&current, &accepted, &grid)?;
        let epsilon_next = update_epsilon(stage, &gaps, &replaced, epsilon)?;
        log::debug!(
            "stage {stage}: {} of {n} replaced at epsilon {epsilon:.4}, next {epsilon_next:.4}",
            accepted.len()
        );
        records.push(StageRecord {
            stage,
            gaps,
            replaced,
            skipped,
            iterations,
            epsilon_used: epsilon,
            epsilon_next,
            overlap: grid.overlap(),
            lambda2: cfg.lambda2,
            trace_scale: cfg.trace_scale,
        });
        epsilon = epsilon_next;
        // Observed entries already agree; the projection only guards the
        // per-stage metrics against rounding in overlap averages.
        omega.project(&mut current, y)?;
        trace.extend(stage_metrics(stage, &current, truth)?);
    }
    omega.project(&mut current, y)?;

    Ok(C2FResult {
        restored: current,
        coarse: coarse.restored.clone(),
        coarse_iterations: coarse.iterations,
        stage_records: records,
        metrics_trace: truth.map(|_| trace),
    })
}

/// Full coarse-to-fine run (all `F` stages) regardless of `plan.shortcut`.
pub fn run_c2f(y: &DenseTensor, omega: &ObservationMask, plan: &C2FPlan) -> Result<C2FResult> {
    let plan = C2FPlan {
        shortcut: false,
        ..plan.clone()
    };
    let coarse = complete_coarse(y, omega, &plan)?;
    refine(y, omega, &plan, &coarse, None)
}

/// Coarse stage followed by the finest stage only.
pub fn run_shortcut(y: &DenseTensor, omega: &ObservationMask, plan: &C2FPlan) -> Result<C2FResult> {
    let plan = C2FPlan {
        shortcut: true,
        ..plan.clone()
    };
    let coarse = complete_coarse(y, omega, &plan)?;
    refine(y, omega, &plan, &coarse, None)
}

/// JSON-lines stage log: a header, one line for the coarse stage, then per
/// stage one line per patch and a summary line. Non-finite numbers are
/// written as `null`.
pub fn write_stage_log(result: &C2FResult, plan: &C2FPlan, mut w: impl Write) -> Result<()> {
    let mut line = |v: serde_json::Value| -> Result<()> {
        serde_json::to_writer(&mut w, &v).map_err(std::io::Error::from)?;
        w.write_all(b"\n")?;
        Ok(())
    };
    line(json!({
        "schema": "c2f-stage-log",
        "version": STAGE_LOG_VERSION,
        "solver": plan.solver.as_str(),
        "shortcut": plan.shortcut,
        "stages": plan.stages,
        "epsilon0": plan.epsilon0,
        "mu": plan.mu,
        "seed": plan.seed,
    }))?;
    line(json!({
        "type": "coarse",
        "iterations": result.coarse_iterations,
        "lambda2": plan.config.lambda2,
        "trace_scale": plan.config.trace_scale,
    }))?;
    let quality = |stage: usize| {
        let m = result
            .metrics_trace
            .as_ref()
            .and_then(|t| t.iter().find(|m| m.stage == stage));
        (m.map(|m| m.psnr), m.map(|m| m.rse))
    };
    let (p0, r0) = quality(0);
    if p0.is_some() {
        line(json!({"type": "quality", "stage": 0, "psnr": p0, "rse": r0}))?;
    }
    for rec in &result.stage_records {
        for k in 0..rec.gaps.len() {
            line(json!({
                "type": "patch",
                "stage": rec.stage,
                "patch": k,
                "gap": rec.gaps[k],
                "epsilon": rec.epsilon_used,
                "replaced": rec.replaced[k],
                "skipped": rec.skipped[k],
                "iterations": rec.iterations[k],
            }))?;
        }
        line(json!({
            "type": "stage",
            "stage": rec.stage,
            "patches": rec.gaps.len(),
            "replaced": rec.replaced.iter().filter(|&&r| r).count(),
            "epsilon_used": rec.epsilon_used,
            "epsilon_next": rec.epsilon_next,
            "overlap": rec.overlap,
            "lambda2": rec.lambda2,
            "trace_scale": rec.trace_scale,
        }))?;
        let (p, r) = quality(rec.stage);
        if p.is_some() {
            line(json!({"type": "quality", "stage": rec.stage, "psnr": p, "rse": r}))?;
        }
    }
    Ok(())
}
