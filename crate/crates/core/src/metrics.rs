//! Restoration quality metrics and relative patch rank.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::singular_values;
use crate::patch::{extract, make_grid};
use crate::tensor::{matricize, DenseTensor};

/// Share of the singular value sum a patch's rank must account for.
pub const RPR_MASS: f64 = 0.9;

fn check_same(z: &DenseTensor, truth: &DenseTensor) -> Result<()> {
    if z.dims() != truth.dims() {
        return Err(Error::shape(format!(
            "estimate {:?} vs truth {:?}",
            z.dims(),
            truth.dims()
        )));
    }
    Ok(())
}

fn squared_error(z: &DenseTensor, truth: &DenseTensor) -> f64 {
    z.data()
        .iter()
        .zip(truth.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum()
}

/// `||z - truth||_F / ||truth||_F`.
pub fn rse(z: &DenseTensor, truth: &DenseTensor) -> Result<f64> {
    check_same(z, truth)?;
    let base = truth.norm();
    if base == 0.0 {
        return Err(Error::ZeroReference);
    }
    Ok(squared_error(z, truth).sqrt() / base)
}

/// `10 log10(MAX^2 / MSE)` with `MAX` the largest entry of `truth`.
/// A perfect match gives `+inf`.
pub fn psnr(z: &DenseTensor, truth: &DenseTensor) -> Result<f64> {
    check_same(z, truth)?;
    let mse = squared_error(z, truth) / truth.len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    let peak = truth.max_value();
    Ok(10.0 * (peak * peak / mse).log10())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub psnr: f64,
    pub rse: f64,
    pub dims: Vec<usize>,
    pub max_pixel: f64,
}

impl MetricReport {
    pub fn compute(z: &DenseTensor, truth: &DenseTensor) -> Result<Self> {
        Ok(Self {
            psnr: psnr(z, truth)?,
            rse: rse(z, truth)?,
            dims: truth.dims().to_vec(),
            max_pixel: truth.max_value(),
        })
    }
}

/// Fraction of the maximal rank needed to hold 90% of the singular value
/// sum of the mode-0 unfolding (`H x W*C`). A zero patch counts as rank one.
pub fn rpr(patch: &DenseTensor) -> Result<f64> {
    let dims = patch.dims();
    if dims.len() < 2 || dims[0] * dims[1] < 2 {
        return Err(Error::DegeneratePatch(format!("patch dims {dims:?}")));
    }
    let m = matricize(patch, 0)?;
    let sv = singular_values(m.as_ref())?;
    let full = m.nrows().min(m.ncols());
    let total: f64 = sv.iter().sum();
    let goal = RPR_MASS * total;
    let mut acc = 0.0;
    let mut rank = full;
    for (i, s) in sv.iter().enumerate() {
        acc += s;
        if acc >= goal {
            rank = i + 1;
            break;
        }
    }
    Ok(rank.max(1) as f64 / full as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RprReport {
    /// 0 for the whole image, `f` for the `2^f x 2^f` grid.
    pub stage: usize,
    pub per_patch: Vec<f64>,
    pub average: f64,
}

impl RprReport {
    pub fn label(&self) -> String {
        stage_label(self.stage)
    }
}

pub fn stage_label(stage: usize) -> String {
    if stage == 0 {
        "coarse".to_string()
    } else {
        format!("fine-{stage}")
    }
}

/// Average RPR over non-overlapping grids for stages `0..=max_stage`.
pub fn rpr_table(truth: &DenseTensor, max_stage: usize) -> Result<Vec<RprReport>> {
    (0..=max_stage)
        .map(|stage| {
            let grid = make_grid(truth.dims(), stage, 0)?;
            let set = extract(truth, &grid)?;
            let per_patch = set
                .patches
                .par_iter()
                .map(rpr)
                .collect::<Result<Vec<_>>>()?;
            let average = per_patch.iter().sum::<f64>() / per_patch.len() as f64;
            Ok(RprReport {
                stage,
                per_patch,
                average,
            })
        })
        .collect()
}
