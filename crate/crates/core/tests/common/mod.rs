//! Independent reference implementations shared by the integration tests and
//! the acceptance gate. Nothing here calls into the library's linear algebra.

// The oracles are written as plain index loops on purpose.
#![allow(
    dead_code,
    clippy::neg_cmp_op_on_partial_ord,
    clippy::needless_range_loop,
    clippy::type_complexity
)]

pub mod suites;

use c2f_core::{DenseTensor, Mat};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor(rng: &mut impl Rng, dims: &[usize]) -> DenseTensor {
    let n: usize = dims.iter().product();
    DenseTensor::new(
        dims.to_vec(),
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
    )
    .unwrap()
}

pub fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> Mat<f64> {
    Mat::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
}

pub fn random_dims(rng: &mut impl Rng, max_order: usize, max_dim: usize) -> Vec<usize> {
    let order = rng.gen_range(1..=max_order);
    (0..order).map(|_| rng.gen_range(1..=max_dim)).collect()
}

/// Column-major offset computed by walking the strides.
pub fn offset(idx: &[usize], dims: &[usize]) -> usize {
    let mut off = 0;
    let mut stride = 1;
    for (i, d) in idx.iter().zip(dims) {
        off += i * stride;
        stride *= d;
    }
    off
}

/// Every multi-index of `dims`, first index fastest.
pub fn all_indices(dims: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for &d in dims.iter().rev() {
        out = out
            .into_iter()
            .flat_map(|tail| {
                (0..d).map(move |i| {
                    let mut v = vec![i];
                    v.extend(&tail);
                    v
                })
            })
            .collect();
    }
    out
}

/// Unfolding column of `idx` for mode `k`: `j = sum_{n != k} i_n J_n` with
/// `J_n = prod_{m < n, m != k} I_m` (zero-based form of the 1-based law).
pub fn unfolding_column(idx: &[usize], dims: &[usize], k: usize) -> usize {
    let mut j = 0;
    for n in 0..dims.len() {
        if n == k {
            continue;
        }
        let jn: usize = (0..n).filter(|&m| m != k).map(|m| dims[m]).product();
        j += idx[n] * jn;
    }
    j
}

/// `(t x_k u)(i_0..j..i_{d-1}) = sum_{i_k} t(i_0..i_k..) u(j, i_k)` by loops.
pub fn mode_product_loops(t: &DenseTensor, u: &Mat<f64>, k: usize) -> DenseTensor {
    let mut dims = t.dims().to_vec();
    dims[k] = u.nrows();
    let out_dims = dims.clone();
    DenseTensor::from_fn(&out_dims, |idx| {
        let mut src = idx.to_vec();
        let mut acc = 0.0;
        for i in 0..t.dims()[k] {
            src[k] = i;
            acc += t.data()[offset(&src, t.dims())] * u[(idx[k], i)];
        }
        acc
    })
    .unwrap()
}

/// Kahan-compensated sum.
pub fn kahan_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut c = 0.0;
    for v in values {
        let y = v - c;
        let t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
    sum
}

pub fn frob(values: &[f64]) -> f64 {
    kahan_sum(values.iter().map(|v| v * v)).sqrt()
}

/// Singular values by one-sided Jacobi rotations on copied columns,
/// sorted nonincreasing.
pub fn jacobi_singular_values(m: &Mat<f64>) -> Vec<f64> {
    let (rows, cols) = (m.nrows(), m.ncols());
    // Work on the wider orientation's columns so there are min(rows, cols) of them.
    let (n_vec, len, get): (usize, usize, Box<dyn Fn(usize, usize) -> f64>) = if rows >= cols {
        (cols, rows, Box::new(|c, r| m[(r, c)]))
    } else {
        (rows, cols, Box::new(|c, r| m[(c, r)]))
    };
    let mut a: Vec<Vec<f64>> = (0..n_vec)
        .map(|c| (0..len).map(|r| get(c, r)).collect())
        .collect();
    for _sweep in 0..100 {
        let mut off = 0.0f64;
        for p in 0..n_vec {
            for q in p + 1..n_vec {
                let alpha: f64 = a[p].iter().map(|x| x * x).sum();
                let beta: f64 = a[q].iter().map(|x| x * x).sum();
                let gamma: f64 = a[p].iter().zip(&a[q]).map(|(x, y)| x * y).sum();
                if gamma == 0.0 {
                    continue;
                }
                off = off.max(gamma.abs() / (alpha * beta).sqrt().max(f64::MIN_POSITIVE));
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for r in 0..len {
                    let (x, y) = (a[p][r], a[q][r]);
                    a[p][r] = c * x - s * y;
                    a[q][r] = s * x + c * y;
                }
            }
        }
        if off < 1e-15 {
            break;
        }
    }
    let mut s: Vec<f64> = a
        .iter()
        .map(|col| col.iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();
    s.sort_by(|x, y| y.partial_cmp(x).unwrap());
    s
}

/// Mode-0 unfolding built by loops, as a matrix.
pub fn unfold0_loops(t: &DenseTensor) -> Mat<f64> {
    let dims = t.dims();
    let cols: usize = dims[1..].iter().product();
    let mut m = Mat::zeros(dims[0], cols);
    for idx in all_indices(dims) {
        m[(idx[0], unfolding_column(&idx, dims, 0))] = t.data()[offset(&idx, dims)];
    }
    m
}

/// Relative patch rank by cumulative sum over a Jacobi spectrum.
pub fn rpr_reference(patch: &DenseTensor) -> f64 {
    let s = jacobi_singular_values(&unfold0_loops(patch));
    let total: f64 = s.iter().sum();
    let mut acc = 0.0;
    let mut r = s.len();
    for (i, v) in s.iter().enumerate() {
        acc += v;
        if acc >= 0.9 * total {
            r = i + 1;
            break;
        }
    }
    r.max(1) as f64 / s.len() as f64
}

/// Threshold schedule evaluated directly from its definition.
pub fn epsilon_reference(stage: usize, gaps: &[f64], replaced: &[bool], prev: f64) -> f64 {
    let mut best = 0.0f64;
    for (g, r) in gaps.iter().zip(replaced) {
        let term = if stage >= 2 {
            g * f64::from(u8::from(*r))
        } else {
            *g
        };
        if term.is_finite() && term > best {
            best = term;
        }
    }
    if best == 0.0 {
        prev
    } else {
        1.5 * best
    }
}

/// Deterministic synthetic RGB image, smooth plus texture.
pub fn synthetic_image(h: usize, w: usize, seed: u64) -> DenseTensor {
    let mut r = rng(seed);
    let phase: Vec<f64> = (0..6)
        .map(|_| r.gen_range(0.0..std::f64::consts::TAU))
        .collect();
    DenseTensor::from_fn(&[h, w, 3], |i| {
        let (y, x, c) = (i[0] as f64 / h as f64, i[1] as f64 / w as f64, i[2] as f64);
        let v = 0.5
            + 0.25 * (6.0 * y + phase[i[2]]).sin() * (4.0 * x + phase[3 + i[2]]).cos()
            + 0.1 * ((x + y) * 9.0 + c).sin();
        v.clamp(0.0, 1.0)
    })
    .unwrap()
}

/// Random Tucker tensor with the given core ranks and Gaussian-like factors.
pub fn random_tucker(rng: &mut impl Rng, dims: &[usize], ranks: &[usize]) -> DenseTensor {
    let core = random_tensor(rng, ranks);
    let mut t = core;
    for (k, (&d, &r)) in dims.iter().zip(ranks).enumerate() {
        t = mode_product_loops(&t, &random_matrix(rng, d, r), k);
    }
    t
}
