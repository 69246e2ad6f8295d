//! Matrix kernels: SVD with a fixed sign convention and the proximal
//! operators of the trace norm and the l1 norm.

use faer::linalg::matmul::matmul;
use faer::{Accum, Mat, MatRef, Side};

use crate::error::{Error, Result};
use crate::tensor::DenseTensor;

/// Thin SVD `m = u * diag(s) * v^T`, `s` nonincreasing.
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: Mat<f64>,
    pub s: Vec<f64>,
    pub v: Mat<f64>,
}

impl Svd {
    pub fn reconstruct(&self) -> Mat<f64> {
        scaled_product(self.u.as_ref(), &self.s, self.v.as_ref())
    }
}

fn check_finite(m: MatRef<'_, f64>) -> Result<()> {
    for j in 0..m.ncols() {
        if !m.col(j).iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("matrix"));
        }
    }
    Ok(())
}

/// Copy of `m` with subnormal entries set to zero, or `None` if there are
/// none. The iterative decompositions can fail to converge on them.
fn flush_subnormal(m: MatRef<'_, f64>) -> Option<Mat<f64>> {
    let tiny = |x: f64| x != 0.0 && x.abs() < f64::MIN_POSITIVE;
    let any = (0..m.ncols()).any(|j| m.col(j).iter().any(|&x| tiny(x)));
    any.then(|| {
        Mat::from_fn(m.nrows(), m.ncols(), |i, j| {
            let x = m[(i, j)];
            if tiny(x) {
                0.0
            } else {
                x
            }
        })
    })
}

/// Thin SVD. Each left singular vector is signed so that its
/// largest-magnitude entry (first one on ties) is nonnegative.
pub fn svd(m: MatRef<'_, f64>) -> Result<Svd> {
    check_finite(m)?;
    let k = m.nrows().min(m.ncols());
    if k == 0 {
        return Ok(Svd {
            u: Mat::zeros(m.nrows(), 0),
            s: Vec::new(),
            v: Mat::zeros(m.ncols(), 0),
        });
    }
    let flushed = flush_subnormal(m);
    let m = flushed.as_ref().map_or(m, |f| f.as_ref());
    let dec = m.thin_svd().map_err(|_| Error::SvdFailed)?;
    let mut u = dec.U().to_owned();
    let mut v = dec.V().to_owned();
    let s: Vec<f64> = dec.S().column_vector().iter().copied().collect();
    for j in 0..k {
        let col = u.col(j);
        let mut best = 0;
        for i in 1..col.nrows() {
            if col[i].abs() > col[best].abs() {
                best = i;
            }
        }
        if col[best] < 0.0 {
            u.col_mut(j).iter_mut().for_each(|x| *x = -*x);
            v.col_mut(j).iter_mut().for_each(|x| *x = -*x);
        }
    }
    Ok(Svd { u, s, v })
}

pub fn singular_values(m: MatRef<'_, f64>) -> Result<Vec<f64>> {
    check_finite(m)?;
    if m.nrows().min(m.ncols()) == 0 {
        return Ok(Vec::new());
    }
    let flushed = flush_subnormal(m);
    let m = flushed.as_ref().map_or(m, |f| f.as_ref());
    m.singular_values().map_err(|_| Error::SvdFailed)
}

pub fn nuclear_norm(m: MatRef<'_, f64>) -> Result<f64> {
    Ok(singular_values(m)?.iter().sum())
}

/// `u[:, ..k] * diag(s[..k]) * v[:, ..k]^T` where `k = s.len()`.
fn scaled_product(u: MatRef<'_, f64>, s: &[f64], v: MatRef<'_, f64>) -> Mat<f64> {
    let k = s.len();
    let mut us = u.subcols(0, k).to_owned();
    for (j, &sj) in s.iter().enumerate() {
        us.col_mut(j).iter_mut().for_each(|x| *x *= sj);
    }
    let mut out = Mat::zeros(u.nrows(), v.nrows());
    if k > 0 {
        matmul(
            out.as_mut(),
            Accum::Replace,
            us.as_ref(),
            v.subcols(0, k).transpose(),
            1.0,
            faer::get_global_parallelism(),
        );
    }
    out
}

/// Result of singular value thresholding with the bookkeeping the solvers use.
pub(crate) struct Shrunk {
    pub matrix: Mat<f64>,
    /// Trace norm of `matrix`.
    pub nuclear: f64,
}

pub(crate) fn svt_parts(m: MatRef<'_, f64>, tau: f64) -> Result<Shrunk> {
    if tau < 0.0 || tau.is_nan() {
        return Err(Error::NegativeThreshold(tau));
    }
    let dec = svd(m)?;
    let kept: Vec<f64> = dec
        .s
        .iter()
        .map(|&s| s - tau)
        .take_while(|&s| s > 0.0)
        .collect();
    Ok(Shrunk {
        matrix: scaled_product(dec.u.as_ref(), &kept, dec.v.as_ref()),
        nuclear: kept.iter().sum(),
    })
}

/// Singular value thresholding `U max(S - tau, 0) V^T`, the proximal
/// operator of `tau * ||.||_*`.
pub fn svt(m: MatRef<'_, f64>, tau: f64) -> Result<Mat<f64>> {
    Ok(svt_parts(m, tau)?.matrix)
}

/// Scalar soft threshold `sign(x) max(|x| - tau, 0)`.
#[inline]
pub fn shrink(x: f64, tau: f64) -> f64 {
    if x > tau {
        x - tau
    } else if x < -tau {
        x + tau
    } else {
        0.0
    }
}

/// Containers whose entries can be transformed one by one.
pub trait Entrywise: Sized {
    fn map_entries(&self, f: impl Fn(f64) -> f64) -> Self;
}

impl Entrywise for DenseTensor {
    fn map_entries(&self, f: impl Fn(f64) -> f64) -> Self {
        self.map(f)
    }
}

impl Entrywise for Mat<f64> {
    fn map_entries(&self, f: impl Fn(f64) -> f64) -> Self {
        Mat::from_fn(self.nrows(), self.ncols(), |i, j| f(self[(i, j)]))
    }
}

impl Entrywise for Vec<f64> {
    fn map_entries(&self, f: impl Fn(f64) -> f64) -> Self {
        self.iter().map(|&v| f(v)).collect()
    }
}

impl Entrywise for f64 {
    fn map_entries(&self, f: impl Fn(f64) -> f64) -> Self {
        f(*self)
    }
}

/// Entrywise soft threshold, the proximal operator of `tau * ||.||_1`.
pub fn soft_threshold<T: Entrywise>(x: &T, tau: f64) -> Result<T> {
    if tau < 0.0 || tau.is_nan() {
        return Err(Error::NegativeThreshold(tau));
    }
    Ok(x.map_entries(|v| shrink(v, tau)))
}

/// Eigen-decomposition of a symmetric matrix; eigenvalues ascending.
pub(crate) fn symmetric_eigen(m: MatRef<'_, f64>) -> Result<(Vec<f64>, Mat<f64>)> {
    check_finite(m)?;
    let flushed = flush_subnormal(m);
    let m = flushed.as_ref().map_or(m, |f| f.as_ref());
    let evd = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|_| Error::SvdFailed)?;
    let vals = evd.S().column_vector().iter().copied().collect();
    Ok((vals, evd.U().to_owned()))
}

/// Extends orthonormal columns `q` (n x k) to `target` orthonormal columns by
/// Gram-Schmidt against the standard basis.
pub(crate) fn complete_orthonormal_columns(q: MatRef<'_, f64>, target: usize) -> Mat<f64> {
    let n = q.nrows();
    assert!(target <= n);
    let mut cols: Vec<Vec<f64>> = (0..q.ncols())
        .map(|j| q.col(j).iter().copied().collect())
        .collect();
    for e in 0..n {
        if cols.len() == target {
            break;
        }
        let mut v = vec![0.0; n];
        v[e] = 1.0;
        for _ in 0..2 {
            for c in &cols {
                let dot: f64 = c.iter().zip(&v).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(c).for_each(|(x, ci)| *x -= dot * ci);
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            v.iter_mut().for_each(|x| *x /= norm);
            cols.push(v);
        }
    }
    Mat::from_fn(n, target, |i, j| cols[j][i])
}
