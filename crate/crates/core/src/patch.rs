//! Spatial patch grids over the first two modes of a tensor.
//!
//! Stage `f` tiles the `H x W` plane with a `2^f x 2^f` grid of core regions;
//! each patch region is its core grown by the overlap on every side that
//! faces another core, clipped to the image. All later modes (channels) are
//! carried whole. Patches are numbered row-major over the grid.

use std::ops::Range;

use crate::error::{Error, Result};
use crate::tensor::{DenseTensor, ObservationMask};

/// Row and column ranges of a spatial rectangle.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Region {
    pub rows: Range<usize>,
    pub cols: Range<usize>,
}

impl Region {
    pub fn height(&self) -> usize {
        self.rows.len()
    }

    pub fn width(&self) -> usize {
        self.cols.len()
    }

    pub fn contains(&self, row: usize, col: usize) -> bool {
        self.rows.contains(&row) && self.cols.contains(&col)
    }

    pub fn covers(&self, other: &Region) -> bool {
        self.rows.start <= other.rows.start
            && other.rows.end <= self.rows.end
            && self.cols.start <= other.cols.start
            && other.cols.end <= self.cols.end
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PatchGrid {
    stage: usize,
    cells: usize,
    overlap: usize,
    dims: Vec<usize>,
    cores: Vec<Region>,
    patches: Vec<Region>,
}

/// Splits `0..n` into `parts` near-equal ranges; the last `n % parts`
/// ranges get one extra element.
fn split(n: usize, parts: usize) -> Vec<Range<usize>> {
    let base = n / parts;
    let extra = n % parts;
    let mut out = Vec::with_capacity(parts);
    let mut start = 0;
    for i in 0..parts {
        let len = base + usize::from(i >= parts - extra);
        out.push(start..start + len);
        start += len;
    }
    out
}

fn grow(r: &Range<usize>, by: usize, n: usize) -> Range<usize> {
    r.start.saturating_sub(by)..(r.end + by).min(n)
}

/// Grid for stage `f` with overlap `o`. The overlap is capped at half the
/// smallest core side.
pub fn make_grid(dims: &[usize], f: usize, o: usize) -> Result<PatchGrid> {
    if dims.len() < 2 || dims.contains(&0) {
        return Err(Error::shape(format!(
            "patch grids need a nonempty tensor with at least two modes, got {dims:?}"
        )));
    }
    let (h, w) = (dims[0], dims[1]);
    let cells = u32::try_from(f)
        .ok()
        .and_then(|f| 1usize.checked_shl(f))
        .filter(|&c| c <= h && c <= w)
        .ok_or(Error::GridTooFine {
            cells: 1usize.checked_shl(f.min(63) as u32).unwrap_or(usize::MAX),
            height: h,
            width: w,
        })?;
    let row_bands = split(h, cells);
    let col_bands = split(w, cells);
    let overlap = o.min((h / cells).min(w / cells) / 2);
    let mut cores = Vec::with_capacity(cells * cells);
    let mut patches = Vec::with_capacity(cells * cells);
    for rows in &row_bands {
        for cols in &col_bands {
            cores.push(Region {
                rows: rows.clone(),
                cols: cols.clone(),
            });
            patches.push(Region {
                rows: grow(rows, overlap, h),
                cols: grow(cols, overlap, w),
            });
        }
    }
    Ok(PatchGrid {
        stage: f,
        cells,
        overlap,
        dims: dims.to_vec(),
        cores,
        patches,
    })
}

impl PatchGrid {
    pub fn stage(&self) -> usize {
        self.stage
    }

    /// Cells per side, `2^f`.
    pub fn cells(&self) -> usize {
        self.cells
    }

    /// Effective overlap after capping.
    pub fn overlap(&self) -> usize {
        self.overlap
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn len(&self) -> usize {
        self.cores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cores.is_empty()
    }

    pub fn core_regions(&self) -> &[Region] {
        &self.cores
    }

    pub fn patch_regions(&self) -> &[Region] {
        &self.patches
    }

    /// Full tensor shape of patch `k`.
    pub fn patch_dims(&self, k: usize) -> Vec<usize> {
        let r = &self.patches[k];
        let mut d = self.dims.clone();
        d[0] = r.height();
        d[1] = r.width();
        d
    }

    fn check_dims(&self, dims: &[usize]) -> Result<()> {
        if dims != self.dims.as_slice() {
            return Err(Error::shape(format!(
                "tensor dims {dims:?} do not match grid dims {:?}",
                self.dims
            )));
        }
        Ok(())
    }
}

/// Patches cut from one tensor along a grid.
#[derive(Clone, Debug)]
pub struct PatchSet {
    pub grid: PatchGrid,
    pub patches: Vec<DenseTensor>,
}

/// Copies `values` restricted to `region` (column-major layout).
fn crop_slice<T: Copy>(values: &[T], dims: &[usize], region: &Region) -> Vec<T> {
    let (h, w) = (dims[0], dims[1]);
    let rest: usize = dims[2..].iter().product();
    let mut out = Vec::with_capacity(region.height() * region.width() * rest);
    for q in 0..rest {
        for c in region.cols.clone() {
            let base = h * (c + w * q);
            out.extend_from_slice(&values[base + region.rows.start..base + region.rows.end]);
        }
    }
    out
}

pub fn extract(t: &DenseTensor, grid: &PatchGrid) -> Result<PatchSet> {
    grid.check_dims(t.dims())?;
    let patches = (0..grid.len())
        .map(|k| {
            DenseTensor::new(
                grid.patch_dims(k),
                crop_slice(t.data(), t.dims(), &grid.patches[k]),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PatchSet {
        grid: grid.clone(),
        patches,
    })
}

/// Restriction of `omega` to every patch region.
pub fn extract_mask(omega: &ObservationMask, grid: &PatchGrid) -> Result<Vec<ObservationMask>> {
    grid.check_dims(omega.dims())?;
    (0..grid.len())
        .map(|k| {
            ObservationMask::from_indicator(
                &grid.patch_dims(k),
                crop_slice(omega.indicator(), omega.dims(), &grid.patches[k]),
            )
        })
        .collect()
}

/// Writes the accepted patches over `base`, averaging where accepted patches
/// overlap. Entries covered by no accepted patch keep the base value.
pub fn merge(
    base: &DenseTensor,
    accepted: &[(usize, DenseTensor)],
    grid: &PatchGrid,
) -> Result<DenseTensor> {
    grid.check_dims(base.dims())?;
    let mut seen = vec![false; grid.len()];
    for (k, p) in accepted {
        let k = *k;
        if k >= grid.len() {
            return Err(Error::shape(format!(
                "patch index {k} out of range for {} patches",
                grid.len()
            )));
        }
        if std::mem::replace(&mut seen[k], true) {
            return Err(Error::DuplicatePatch(k));
        }
        let expect = grid.patch_dims(k);
        if p.dims() != expect.as_slice() {
            return Err(Error::shape(format!(
                "patch {k} has dims {:?}, region needs {expect:?}",
                p.dims()
            )));
        }
    }

    let dims = base.dims();
    let (h, w) = (dims[0], dims[1]);
    let rest: usize = dims[2..].iter().product();
    let n = base.len();
    let mut sum = vec![0.0; n];
    let mut first = vec![0.0; n];
    let mut uniform = vec![true; n];
    let mut hits = vec![0u32; n];
    for (k, p) in accepted {
        let region = &grid.patches[*k];
        let mut values = p.data().iter();
        for q in 0..rest {
            for c in region.cols.clone() {
                for r in region.rows.clone() {
                    let at = r + h * (c + w * q);
                    let v = *values.next().expect("patch shape checked");
                    if hits[at] == 0 {
                        first[at] = v;
                    } else if v.to_bits() != first[at].to_bits() {
                        uniform[at] = false;
                    }
                    hits[at] += 1;
                    sum[at] += v;
                }
            }
        }
    }
    let mut out = base.clone();
    for (at, o) in out.data_mut().iter_mut().enumerate() {
        if hits[at] > 0 {
            // Exact when every covering patch holds the same value.
            *o = if uniform[at] {
                first[at]
            } else {
                sum[at] / hits[at] as f64
            };
        }
    }
    Ok(out)
}
