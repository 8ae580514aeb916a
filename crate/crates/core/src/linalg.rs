//! Small dense kernels for the encoder: row-major matrix products, softmax
//! and layer normalization, with the backward passes the trainer needs.
//!
//! Everything is written over contiguous `&[f64]` rows so the inner loops
//! vectorize; these kernels dominate training time.

use alloc::vec;
use alloc::vec::Vec;

use crate::math;

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `out[m x n] = a[m x k] * b[k x n]` (row-major, overwrite).
pub fn matmul(out: &mut [f64], a: &[f64], b: &[f64], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(out.len(), m * n);
    out.fill(0.0);
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        let orow = &mut out[i * n..(i + 1) * n];
        for (p, &av) in arow.iter().enumerate() {
            let brow = &b[p * n..(p + 1) * n];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
}

/// `out[k x n] += aᵀ * c` where `a` is `m x k` and `c` is `m x n`.
/// This is the weight-gradient shape: dW += Xᵀ dY.
pub fn matmul_at_b_acc(out: &mut [f64], a: &[f64], c: &[f64], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(c.len(), m * n);
    debug_assert_eq!(out.len(), k * n);
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        let crow = &c[i * n..(i + 1) * n];
        for (p, &av) in arow.iter().enumerate() {
            let orow = &mut out[p * n..(p + 1) * n];
            for (o, &cv) in orow.iter_mut().zip(crow) {
                *o += av * cv;
            }
        }
    }
}

/// `out[m x k] += c * bᵀ` where `c` is `m x n` and `b` is `k x n`.
/// This is the input-gradient shape: dX += dY Wᵀ.
pub fn matmul_a_bt_acc(out: &mut [f64], c: &[f64], b: &[f64], m: usize, k: usize, n: usize) {
    debug_assert_eq!(c.len(), m * n);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(out.len(), m * k);
    for i in 0..m {
        let crow = &c[i * n..(i + 1) * n];
        let orow = &mut out[i * k..(i + 1) * k];
        for (p, o) in orow.iter_mut().enumerate() {
            *o += dot(crow, &b[p * n..(p + 1) * n]);
        }
    }
}

/// In-place row softmax with the max-shift trick.
pub fn softmax_row(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in row.iter_mut() {
        *x = math::exp(*x - max);
        sum += *x;
    }
    for x in row.iter_mut() {
        *x /= sum;
    }
}

/// Backward of a row softmax: `ds = p ⊙ (dp − <dp, p>)`.
pub fn softmax_row_backward(ds: &mut [f64], p: &[f64], dp: &[f64]) {
    let inner = dot(dp, p);
    for ((d, &pv), &dpv) in ds.iter_mut().zip(p).zip(dp) {
        *d = pv * (dpv - inner);
    }
}

pub const LAYER_NORM_EPS: f64 = 1e-5;

/// Cached values from a layer-norm forward pass, needed by the backward.
pub struct LayerNormCache {
    /// `(x - mean) * rstd`, row-major.
    pub xhat: Vec<f64>,
    /// One reciprocal standard deviation per row.
    pub rstd: Vec<f64>,
}

/// Per-row layer normalization:
/// `y = (x - mean) / sqrt(var + eps) * gain + bias`.
pub fn layer_norm(
    out: &mut [f64],
    x: &[f64],
    gain: &[f64],
    bias: &[f64],
    rows: usize,
    d: usize,
) -> LayerNormCache {
    debug_assert_eq!(x.len(), rows * d);
    debug_assert_eq!(out.len(), rows * d);
    debug_assert_eq!(gain.len(), d);
    debug_assert_eq!(bias.len(), d);
    let mut xhat = vec![0.0; rows * d];
    let mut rstd = vec![0.0; rows];
    for r in 0..rows {
        let xr = &x[r * d..(r + 1) * d];
        let mean = xr.iter().sum::<f64>() / d as f64;
        let var = xr.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
        let rs = 1.0 / math::sqrt(var + LAYER_NORM_EPS);
        rstd[r] = rs;
        let xh = &mut xhat[r * d..(r + 1) * d];
        let or = &mut out[r * d..(r + 1) * d];
        for i in 0..d {
            xh[i] = (xr[i] - mean) * rs;
            or[i] = xh[i] * gain[i] + bias[i];
        }
    }
    LayerNormCache { xhat, rstd }
}

/// Backward of layer normalization. Accumulates parameter gradients into
/// `dgain`/`dbias` and writes the input gradient to `dx`.
pub fn layer_norm_backward(
    dx: &mut [f64],
    dgain: &mut [f64],
    dbias: &mut [f64],
    dy: &[f64],
    cache: &LayerNormCache,
    gain: &[f64],
    rows: usize,
    d: usize,
) {
    for r in 0..rows {
        let dyr = &dy[r * d..(r + 1) * d];
        let xh = &cache.xhat[r * d..(r + 1) * d];
        let rs = cache.rstd[r];
        // dxhat = dy * gain; two row means appear in the input gradient.
        let mut mean_dxhat = 0.0;
        let mut mean_dxhat_xhat = 0.0;
        for ((&dyv, &g), &xhv) in dyr.iter().zip(gain).zip(xh) {
            let dxh = dyv * g;
            mean_dxhat += dxh;
            mean_dxhat_xhat += dxh * xhv;
        }
        mean_dxhat /= d as f64;
        mean_dxhat_xhat /= d as f64;
        let dxr = &mut dx[r * d..(r + 1) * d];
        for i in 0..d {
            let dxh = dyr[i] * gain[i];
            dxr[i] = rs * (dxh - mean_dxhat - xh[i] * mean_dxhat_xhat);
            dgain[i] += dyr[i] * xh[i];
            dbias[i] += dyr[i];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Xoshiro256;

    fn rand_vec(rng: &mut Xoshiro256, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.uniform(-1.0, 1.0)).collect()
    }

    #[test]
    fn matmul_matches_naive_triple_loop() {
        let mut rng = Xoshiro256::from_seed(1);
        let (m, k, n) = (4, 5, 3);
        let a = rand_vec(&mut rng, m * k);
        let b = rand_vec(&mut rng, k * n);
        let mut out = vec![0.0; m * n];
        matmul(&mut out, &a, &b, m, k, n);
        for i in 0..m {
            for j in 0..n {
                let expected: f64 = (0..k).map(|p| a[i * k + p] * b[p * n + j]).sum();
                assert!((out[i * n + j] - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn transposed_products_match_naive() {
        let mut rng = Xoshiro256::from_seed(2);
        let (m, k, n) = (3, 4, 5);
        let a = rand_vec(&mut rng, m * k);
        let b = rand_vec(&mut rng, k * n);
        let c = rand_vec(&mut rng, m * n);

        let mut dw = vec![0.0; k * n];
        matmul_at_b_acc(&mut dw, &a, &c, m, k, n);
        for p in 0..k {
            for j in 0..n {
                let expected: f64 = (0..m).map(|i| a[i * k + p] * c[i * n + j]).sum();
                assert!((dw[p * n + j] - expected).abs() < 1e-12);
            }
        }

        let mut dx = vec![0.0; m * k];
        matmul_a_bt_acc(&mut dx, &c, &b, m, k, n);
        for i in 0..m {
            for p in 0..k {
                let expected: f64 = (0..n).map(|j| c[i * n + j] * b[p * n + j]).sum();
                assert!((dx[i * k + p] - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn softmax_rows_are_distributions() {
        let mut rng = Xoshiro256::from_seed(3);
        for _ in 0..100 {
            let mut row = rand_vec(&mut rng, 7);
            softmax_row(&mut row);
            assert!(row.iter().all(|&p| p >= 0.0));
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_backward_matches_finite_differences() {
        let mut rng = Xoshiro256::from_seed(4);
        let x = rand_vec(&mut rng, 5);
        let upstream = rand_vec(&mut rng, 5);
        let f = |x: &[f64]| -> f64 {
            let mut p = x.to_vec();
            softmax_row(&mut p);
            dot(&p, &upstream)
        };
        let mut p = x.clone();
        softmax_row(&mut p);
        let mut ds = vec![0.0; 5];
        softmax_row_backward(&mut ds, &p, &upstream);
        let h = 1e-6;
        for i in 0..5 {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            let fd = (f(&xp) - f(&xm)) / (2.0 * h);
            assert!((ds[i] - fd).abs() < 1e-8, "coord {i}: {} vs {fd}", ds[i]);
        }
    }

    #[test]
    fn layer_norm_backward_matches_finite_differences() {
        let mut rng = Xoshiro256::from_seed(5);
        let (rows, d) = (2, 6);
        let x = rand_vec(&mut rng, rows * d);
        let gain = rand_vec(&mut rng, d);
        let bias = rand_vec(&mut rng, d);
        let upstream = rand_vec(&mut rng, rows * d);
        let f = |x: &[f64], gain: &[f64], bias: &[f64]| -> f64 {
            let mut y = vec![0.0; rows * d];
            layer_norm(&mut y, x, gain, bias, rows, d);
            dot(&y, &upstream)
        };

        let mut y = vec![0.0; rows * d];
        let cache = layer_norm(&mut y, &x, &gain, &bias, rows, d);
        let mut dx = vec![0.0; rows * d];
        let mut dgain = vec![0.0; d];
        let mut dbias = vec![0.0; d];
        layer_norm_backward(
            &mut dx, &mut dgain, &mut dbias, &upstream, &cache, &gain, rows, d,
        );

        let h = 1e-6;
        for i in 0..rows * d {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            let fd = (f(&xp, &gain, &bias) - f(&xm, &gain, &bias)) / (2.0 * h);
            assert!((dx[i] - fd).abs() < 1e-7, "dx[{i}]: {} vs {fd}", dx[i]);
        }
        for i in 0..d {
            let mut gp = gain.clone();
            let mut gm = gain.clone();
            gp[i] += h;
            gm[i] -= h;
            let fd = (f(&x, &gp, &bias) - f(&x, &gm, &bias)) / (2.0 * h);
            assert!((dgain[i] - fd).abs() < 1e-7);
            let mut bp = bias.clone();
            let mut bm = bias.clone();
            bp[i] += h;
            bm[i] -= h;
            let fd = (f(&x, &gain, &bp) - f(&x, &gain, &bm)) / (2.0 * h);
            assert!((dbias[i] - fd).abs() < 1e-7);
        }
    }
}
