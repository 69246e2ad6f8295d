//! Dense d-way tensors and the multilinear primitives the solvers build on.
//!
//! Storage is column-major: the first index varies fastest, so the linear
//! offset of `(i_0, ..., i_{d-1})` is `i_0 + I_0 * (i_1 + I_1 * (i_2 + ...))`.
//! With this layout the mode-0 matricization is a plain reshape, and the
//! column index of every mode-k matricization follows the standard
//! Kolda-Bader ordering `j = sum_{n != k} i_n * J_n` with
//! `J_n = prod_{m < n, m != k} I_m` (0-based).
//!
//! Modes are 0-based throughout the API.

use faer::linalg::matmul::matmul;
use faer::{Accum, Mat, MatMut, MatRef};

use crate::error::{Error, Result};
use crate::linalg;

/// A d-way array of `f64` with column-major storage.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseTensor {
    dims: Vec<usize>,
    data: Vec<f64>,
}

fn checked_len(dims: &[usize]) -> Result<usize> {
    if dims.is_empty() || dims.contains(&0) {
        return Err(Error::EmptyTensor(dims.to_vec()));
    }
    Ok(dims.iter().product())
}

impl DenseTensor {
    pub fn new(dims: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let expected = checked_len(&dims)?;
        if data.len() != expected {
            return Err(Error::DataLength {
                dims,
                expected,
                actual: data.len(),
            });
        }
        Ok(Self { dims, data })
    }

    pub fn zeros(dims: &[usize]) -> Result<Self> {
        Self::filled(dims, 0.0)
    }

    pub fn filled(dims: &[usize], value: f64) -> Result<Self> {
        let len = checked_len(dims)?;
        Ok(Self {
            dims: dims.to_vec(),
            data: vec![value; len],
        })
    }

    /// Builds a tensor by evaluating `f` at every multi-index, in storage order.
    pub fn from_fn(dims: &[usize], mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        let len = checked_len(dims)?;
        let mut idx = vec![0usize; dims.len()];
        let mut data = Vec::with_capacity(len);
        for _ in 0..len {
            data.push(f(&idx));
            for (i, &d) in idx.iter_mut().zip(dims) {
                *i += 1;
                if *i < d {
                    break;
                }
                *i = 0;
            }
        }
        Ok(Self {
            dims: dims.to_vec(),
            data,
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Linear storage offset of a multi-index. Panics if the index is out of bounds.
    pub fn linear_index(&self, idx: &[usize]) -> usize {
        assert_eq!(idx.len(), self.dims.len(), "index order mismatch");
        let mut offset = 0;
        for (&i, &d) in idx.iter().zip(&self.dims).rev() {
            assert!(i < d, "index {i} out of bounds for dimension {d}");
            offset = offset * d + i;
        }
        offset
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.data[self.linear_index(idx)]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn max_value(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            dims: self.dims.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    /// Entrywise `self - other`.
    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    /// Entrywise `self + other`.
    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.dims != other.dims {
            return Err(Error::shape(format!("{:?} vs {:?}", self.dims, other.dims)));
        }
        Ok(Self {
            dims: self.dims.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn norm(&self) -> f64 {
        frobenius_norm(self)
    }

    /// `(L, I_k, R)` block decomposition of the storage around `mode`.
    fn split(&self, mode: usize) -> (usize, usize, usize) {
        let left = self.dims[..mode].iter().product();
        let right = self.dims[mode + 1..].iter().product();
        (left, self.dims[mode], right)
    }

    fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.order() {
            return Err(Error::ModeOutOfRange {
                mode,
                order: self.order(),
            });
        }
        Ok(())
    }
}

/// Frobenius norm, summed over eight interleaved lanes.
pub fn frobenius_norm(t: &DenseTensor) -> f64 {
    sum_of_squares(&t.data).sqrt()
}

pub(crate) fn sum_of_squares(values: &[f64]) -> f64 {
    let mut lanes = [0.0f64; 8];
    let chunks = values.chunks_exact(8);
    let tail = chunks.remainder();
    for c in chunks {
        for (acc, &v) in lanes.iter_mut().zip(c) {
            *acc += v * v;
        }
    }
    let mut total: f64 = lanes.iter().sum();
    for &v in tail {
        total += v * v;
    }
    total
}

/// Mode-k matricization: an `I_k x prod_{n != k} I_n` matrix.
pub fn matricize(t: &DenseTensor, mode: usize) -> Result<Mat<f64>> {
    t.check_mode(mode)?;
    let (left, n, right) = t.split(mode);
    let data = &t.data;
    Ok(Mat::from_fn(n, left * right, |i, j| {
        let (l, r) = (j % left, j / left);
        data[l + left * (i + n * r)]
    }))
}

/// Inverse of [`matricize`]: reshapes `m` back into a tensor with `dims`.
pub fn fold(m: MatRef<'_, f64>, mode: usize, dims: &[usize]) -> Result<DenseTensor> {
    let len = checked_len(dims)?;
    if mode >= dims.len() {
        return Err(Error::ModeOutOfRange {
            mode,
            order: dims.len(),
        });
    }
    let n = dims[mode];
    if m.nrows() != n || m.nrows() * m.ncols() != len {
        return Err(Error::shape(format!(
            "cannot fold a {}x{} matrix along mode {mode} into {dims:?}",
            m.nrows(),
            m.ncols()
        )));
    }
    let left: usize = dims[..mode].iter().product();
    let mut data = vec![0.0; len];
    for j in 0..m.ncols() {
        let (l, r) = (j % left, j / left);
        let col = m.col(j);
        for i in 0..n {
            data[l + left * (i + n * r)] = col[i];
        }
    }
    Ok(DenseTensor {
        dims: dims.to_vec(),
        data,
    })
}

/// Mode-k product `t x_k u` with `u` of shape `R x I_k`; mode `k` of the
/// result has length `R`.
pub fn mode_k_product(t: &DenseTensor, u: MatRef<'_, f64>, mode: usize) -> Result<DenseTensor> {
    t.check_mode(mode)?;
    let (left, n, right) = t.split(mode);
    if u.ncols() != n {
        return Err(Error::shape(format!(
            "mode-{mode} product needs {n} columns, matrix is {}x{}",
            u.nrows(),
            u.ncols()
        )));
    }
    if u.nrows() == 0 {
        return Err(Error::EmptyTensor(vec![0]));
    }
    let rows = u.nrows();
    let mut dims = t.dims.clone();
    dims[mode] = rows;
    let mut data = vec![0.0; left * rows * right];
    let par = faer::get_global_parallelism();

    if left == 1 {
        // The whole tensor is the I_k x R mode-0 unfolding.
        let src = MatRef::from_column_major_slice(&t.data, n, right);
        let dst = MatMut::from_column_major_slice_mut(&mut data, rows, right);
        matmul(dst, Accum::Replace, u, src, 1.0, par);
    } else {
        // Each trailing slab is an L x I_k matrix; the slab product is slab * u^T.
        for r in 0..right {
            let src =
                MatRef::from_column_major_slice(&t.data[r * left * n..(r + 1) * left * n], left, n);
            let dst = MatMut::from_column_major_slice_mut(
                &mut data[r * left * rows..(r + 1) * left * rows],
                left,
                rows,
            );
            matmul(dst, Accum::Replace, src, u.transpose(), 1.0, par);
        }
    }
    Ok(DenseTensor { dims, data })
}

/// Applies `t x_0 u_0 x_1 u_1 ...`, skipping modes whose matrix is `None`.
pub fn multi_mode_product(
    t: &DenseTensor,
    factors: &[Option<MatRef<'_, f64>>],
) -> Result<DenseTensor> {
    if factors.len() != t.order() {
        return Err(Error::shape(format!(
            "{} factors for a {}-way tensor",
            factors.len(),
            t.order()
        )));
    }
    let mut out = t.clone();
    for (k, f) in factors.iter().enumerate() {
        if let Some(u) = f {
            out = mode_k_product(&out, *u, k)?;
        }
    }
    Ok(out)
}

/// Set of observed entries of a tensor, stored as a dense indicator.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ObservationMask {
    dims: Vec<usize>,
    observed: Vec<bool>,
    count: usize,
}

impl ObservationMask {
    /// Every entry observed.
    pub fn full(dims: &[usize]) -> Result<Self> {
        let len = checked_len(dims)?;
        Ok(Self {
            dims: dims.to_vec(),
            observed: vec![true; len],
            count: len,
        })
    }

    /// From an indicator in tensor storage order (`true` = observed).
    pub fn from_indicator(dims: &[usize], observed: Vec<bool>) -> Result<Self> {
        let len = checked_len(dims)?;
        if observed.len() != len {
            return Err(Error::InvalidMask(format!(
                "indicator length {} does not match dims {dims:?}",
                observed.len()
            )));
        }
        let count = observed.iter().filter(|&&b| b).count();
        Ok(Self {
            dims: dims.to_vec(),
            observed,
            count,
        })
    }

    /// From an explicit list of observed multi-indices.
    pub fn from_indices<I>(dims: &[usize], indices: I) -> Result<Self>
    where
        I: IntoIterator,
        I::Item: AsRef<[usize]>,
    {
        let len = checked_len(dims)?;
        let mut observed = vec![false; len];
        let mut count = 0;
        for idx in indices {
            let idx = idx.as_ref();
            if idx.len() != dims.len() || idx.iter().zip(dims).any(|(&i, &d)| i >= d) {
                return Err(Error::InvalidMask(format!(
                    "index {idx:?} outside dims {dims:?}"
                )));
            }
            let offset = idx
                .iter()
                .zip(dims)
                .rev()
                .fold(0, |acc, (&i, &d)| acc * d + i);
            if observed[offset] {
                return Err(Error::InvalidMask(format!("duplicate index {idx:?}")));
            }
            observed[offset] = true;
            count += 1;
        }
        Ok(Self {
            dims: dims.to_vec(),
            observed,
            count,
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn indicator(&self) -> &[bool] {
        &self.observed
    }

    pub fn is_observed_at(&self, offset: usize) -> bool {
        self.observed[offset]
    }

    pub fn observed_count(&self) -> usize {
        self.count
    }

    pub fn len(&self) -> usize {
        self.observed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn missing_ratio(&self) -> f64 {
        1.0 - self.count as f64 / self.observed.len() as f64
    }

    /// Observed multi-indices in storage order.
    pub fn indices(&self) -> impl Iterator<Item = Vec<usize>> + '_ {
        let dims = &self.dims;
        self.observed
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(mut off, _)| {
                dims.iter()
                    .map(|&d| {
                        let i = off % d;
                        off /= d;
                        i
                    })
                    .collect()
            })
    }

    /// The 0/1 indicator as a tensor.
    pub fn indicator_tensor(&self) -> DenseTensor {
        DenseTensor {
            dims: self.dims.clone(),
            data: self
                .observed
                .iter()
                .map(|&b| if b { 1.0 } else { 0.0 })
                .collect(),
        }
    }

    /// Overwrites the observed entries of `z` with those of `y`.
    pub fn project(&self, z: &mut DenseTensor, y: &DenseTensor) -> Result<()> {
        if z.dims != self.dims || y.dims != self.dims {
            return Err(Error::shape(format!(
                "mask {:?}, target {:?}, source {:?}",
                self.dims, z.dims, y.dims
            )));
        }
        for ((zv, &yv), &obs) in z.data.iter_mut().zip(&y.data).zip(&self.observed) {
            if obs {
                *zv = yv;
            }
        }
        Ok(())
    }

    /// `true` if `y` matches `z` bitwise on every observed entry.
    pub fn agrees(&self, z: &DenseTensor, y: &DenseTensor) -> bool {
        z.dims == self.dims
            && y.dims == self.dims
            && z.data
                .iter()
                .zip(&y.data)
                .zip(&self.observed)
                .all(|((a, b), &obs)| !obs || a.to_bits() == b.to_bits())
    }

    /// Starting iterate for the solvers: `y` on the observed set, zero elsewhere.
    pub fn observed_or_zero(&self, y: &DenseTensor) -> Result<DenseTensor> {
        let mut z = DenseTensor::zeros(&self.dims)?;
        self.project(&mut z, y)?;
        Ok(z)
    }

    pub(crate) fn check_observed_finite(&self, y: &DenseTensor) -> Result<()> {
        if y.dims != self.dims {
            return Err(Error::shape(format!(
                "mask {:?} vs tensor {:?}",
                self.dims, y.dims
            )));
        }
        if self.count == 0 {
            return Err(Error::EmptyObservation);
        }
        let finite = y
            .data
            .iter()
            .zip(&self.observed)
            .all(|(v, &obs)| !obs || v.is_finite());
        if !finite {
            return Err(Error::NonFinite("observed entries"));
        }
        Ok(())
    }
}

/// Tucker factors: `core x_0 U_0 x_1 ... x_{d-1} U_{d-1}`.
#[derive(Clone, Debug)]
pub struct FactorSet {
    pub core: DenseTensor,
    pub factors: Vec<Mat<f64>>,
}

impl FactorSet {
    pub fn reconstruct(&self) -> Result<DenseTensor> {
        let refs: Vec<_> = self.factors.iter().map(|u| Some(u.as_ref())).collect();
        multi_mode_product(&self.core, &refs)
    }

    pub fn dims(&self) -> Vec<usize> {
        self.factors.iter().map(|u| u.nrows()).collect()
    }
}

/// Truncated higher-order SVD with per-mode ranks.
pub fn hosvd(t: &DenseTensor, ranks: &[usize]) -> Result<FactorSet> {
    if ranks.len() != t.order() {
        return Err(Error::shape(format!(
            "{} ranks for a {}-way tensor",
            ranks.len(),
            t.order()
        )));
    }
    let mut factors = Vec::with_capacity(t.order());
    for (mode, (&rank, &dim)) in ranks.iter().zip(t.dims()).enumerate() {
        if rank == 0 || rank > dim {
            return Err(Error::RankOutOfRange { mode, rank, dim });
        }
        let svd = linalg::svd(matricize(t, mode)?.as_ref())?;
        // Thin SVD gives min(I_k, rest) vectors; complete the basis when the
        // requested rank exceeds it.
        let u = if rank <= svd.u.ncols() {
            svd.u.subcols(0, rank).to_owned()
        } else {
            linalg::complete_orthonormal_columns(svd.u.as_ref(), rank)
        };
        factors.push(u);
    }
    let transposed: Vec<Mat<f64>> = factors.iter().map(|u| u.transpose().to_owned()).collect();
    let refs: Vec<_> = transposed.iter().map(|u| Some(u.as_ref())).collect();
    let core = multi_mode_product(t, &refs)?;
    Ok(FactorSet { core, factors })
}
