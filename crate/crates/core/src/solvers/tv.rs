//! First-difference operator `F` with `F(i, i) = 1`, `F(i, i+1) = -1`,
//! applied matrix-free along one tensor mode, and the cosine basis that
//! diagonalizes `F^T F`.

use faer::Mat;

use crate::tensor::DenseTensor;

/// The `(n-1) x n` forward-difference matrix, kept implicit.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TvDifference {
    len: usize,
}

impl TvDifference {
    pub fn new(len: usize) -> Self {
        Self { len }
    }

    pub fn cols(&self) -> usize {
        self.len
    }

    pub fn rows(&self) -> usize {
        self.len.saturating_sub(1)
    }

    /// `(F x)(i) = x(i) - x(i + 1)`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.len);
        x.windows(2).map(|w| w[0] - w[1]).collect()
    }

    /// `(F^T g)(i) = g(i) - g(i - 1)` with `g(-1) = g(n - 1) = 0`.
    pub fn adjoint(&self, g: &[f64]) -> Vec<f64> {
        assert_eq!(g.len(), self.rows());
        (0..self.len)
            .map(|i| {
                let cur = if i < g.len() { g[i] } else { 0.0 };
                let prev = if i > 0 { g[i - 1] } else { 0.0 };
                cur - prev
            })
            .collect()
    }

    pub fn to_dense(&self) -> Mat<f64> {
        Mat::from_fn(self.rows(), self.len, |i, j| {
            if j == i {
                1.0
            } else if j == i + 1 {
                -1.0
            } else {
                0.0
            }
        })
    }
}

/// `fold(F_k * unfold(t, k))`: differences along `mode`. `None` when the mode
/// has length one and the operator is empty.
pub fn forward_along(t: &DenseTensor, mode: usize) -> Option<DenseTensor> {
    let dims = t.dims();
    let n = dims[mode];
    if n < 2 {
        return None;
    }
    let left: usize = dims[..mode].iter().product();
    let right: usize = dims[mode + 1..].iter().product();
    let mut out_dims = dims.to_vec();
    out_dims[mode] = n - 1;
    let src = t.data();
    let mut data = vec![0.0; left * (n - 1) * right];
    for r in 0..right {
        for i in 0..n - 1 {
            let a = &src[left * (i + n * r)..][..left];
            let b = &src[left * (i + 1 + n * r)..][..left];
            let dst = &mut data[left * (i + (n - 1) * r)..][..left];
            for ((d, x), y) in dst.iter_mut().zip(a).zip(b) {
                *d = x - y;
            }
        }
    }
    Some(DenseTensor::new(out_dims, data).expect("difference shape"))
}

/// Adjoint of [`forward_along`]: maps a tensor with `n - 1` entries along
/// `mode` back to `n`.
pub fn adjoint_along(g: &DenseTensor, mode: usize, n: usize) -> DenseTensor {
    let dims = g.dims();
    assert_eq!(dims[mode] + 1, n);
    let left: usize = dims[..mode].iter().product();
    let right: usize = dims[mode + 1..].iter().product();
    let mut out_dims = dims.to_vec();
    out_dims[mode] = n;
    let src = g.data();
    let m = n - 1;
    let mut data = vec![0.0; left * n * right];
    for r in 0..right {
        for i in 0..n {
            let dst = &mut data[left * (i + n * r)..][..left];
            if i < m {
                let cur = &src[left * (i + m * r)..][..left];
                dst.iter_mut().zip(cur).for_each(|(d, c)| *d += c);
            }
            if i > 0 {
                let prev = &src[left * (i - 1 + m * r)..][..left];
                dst.iter_mut().zip(prev).for_each(|(d, p)| *d -= p);
            }
        }
    }
    DenseTensor::new(out_dims, data).expect("adjoint shape")
}

/// Orthonormal DCT-II basis `C` and eigenvalues `e` with
/// `F^T F = C diag(e) C^T`, `e_j = 2 - 2 cos(pi j / n)`.
pub fn laplacian_eigenbasis(n: usize) -> (Vec<f64>, Mat<f64>) {
    let nf = n as f64;
    let eig = (0..n)
        .map(|j| 2.0 - 2.0 * (std::f64::consts::PI * j as f64 / nf).cos())
        .collect();
    let basis = Mat::from_fn(n, n, |i, j| {
        let c = if j == 0 {
            (1.0 / nf).sqrt()
        } else {
            (2.0 / nf).sqrt()
        };
        c * (std::f64::consts::PI * j as f64 * (i as f64 + 0.5) / nf).cos()
    });
    (eig, basis)
}
