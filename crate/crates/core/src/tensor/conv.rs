//! Same-padded stride-1 convolution, lowered to a column matrix and a
//! 64-bit GEMM per batch item.

use rayon::prelude::*;

use super::{ConvKernel, Tensor4};
use crate::error::{Error, Result};

/// Upper bound on column-matrix elements materialised at once. Large slices
/// are processed in row bands so whole-slice inference stays bounded in memory.
const COL_BUDGET: usize = 1 << 21;

/// Gradients of a convolution with respect to its input, weights and biases.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvGrads {
    pub input: Tensor4,
    pub weights: Vec<f32>,
    pub bias: Vec<f32>,
}

struct Geometry {
    in_c: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
}

impl Geometry {
    fn rows(&self) -> usize {
        self.in_c * self.kh * self.kw
    }

    fn band_rows(&self) -> usize {
        (COL_BUDGET / (self.rows() * self.w)).clamp(1, self.h)
    }

    /// Column matrix for output rows `y0..y1`: `rows() × ((y1 - y0) · w)`.
    fn im2col(&self, x: &[f32], y0: usize, y1: usize, col: &mut Vec<f64>) {
        let (h, w, kh, kw) = (self.h, self.w, self.kh, self.kw);
        let (ph, pw) = (kh / 2, kw / 2);
        let span = (y1 - y0) * w;
        col.clear();
        col.resize(self.rows() * span, 0.0);
        for ci in 0..self.in_c {
            let plane = &x[ci * h * w..(ci + 1) * h * w];
            for dy in 0..kh {
                for dx in 0..kw {
                    let r = (ci * kh + dy) * kw + dx;
                    let dst = &mut col[r * span..(r + 1) * span];
                    for y in y0..y1 {
                        let sy = y + dy;
                        if sy < ph || sy - ph >= h {
                            continue;
                        }
                        let src = &plane[(sy - ph) * w..(sy - ph + 1) * w];
                        let row = &mut dst[(y - y0) * w..(y - y0 + 1) * w];
                        let lo = pw.saturating_sub(dx);
                        let hi = (w + pw).saturating_sub(dx).min(w);
                        for xo in lo..hi {
                            row[xo] = src[xo + dx - pw] as f64;
                        }
                    }
                }
            }
        }
    }

    /// Scatter-add of a column-matrix gradient back onto the input planes.
    fn col2im(&self, col: &[f64], y0: usize, y1: usize, gx: &mut [f64]) {
        let (h, w, kh, kw) = (self.h, self.w, self.kh, self.kw);
        let (ph, pw) = (kh / 2, kw / 2);
        let span = (y1 - y0) * w;
        for ci in 0..self.in_c {
            let plane = &mut gx[ci * h * w..(ci + 1) * h * w];
            for dy in 0..kh {
                for dx in 0..kw {
                    let r = (ci * kh + dy) * kw + dx;
                    let src = &col[r * span..(r + 1) * span];
                    for y in y0..y1 {
                        let sy = y + dy;
                        if sy < ph || sy - ph >= h {
                            continue;
                        }
                        let dst = &mut plane[(sy - ph) * w..(sy - ph + 1) * w];
                        let row = &src[(y - y0) * w..(y - y0 + 1) * w];
                        let lo = pw.saturating_sub(dx);
                        let hi = (w + pw).saturating_sub(dx).min(w);
                        for xo in lo..hi {
                            dst[xo + dx - pw] += row[xo];
                        }
                    }
                }
            }
        }
    }
}

/// `c[m × n] (+)= a[m × k] · b[k × n]` with explicit strides.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (usize, usize),
    b: &[f64],
    (rsb, csb): (usize, usize),
    accumulate: bool,
    c: &mut [f64],
) {
    debug_assert!(c.len() >= m * n);
    debug_assert!(a.len() > (m - 1) * rsa + (k - 1) * csa);
    debug_assert!(b.len() > (k - 1) * rsb + (n - 1) * csb);
    // SAFETY: the debug assertions above state the extents read and written;
    // callers size every buffer from the same m/k/n they pass here.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            if accumulate { 1.0 } else { 0.0 },
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

fn geometry(x: &Tensor4, k: &ConvKernel) -> Result<Geometry> {
    if x.c() != k.in_c() {
        return Err(Error::contract(format!(
            "conv: input has {} channels, kernel expects {}",
            x.c(),
            k.in_c()
        )));
    }
    Ok(Geometry { in_c: x.c(), h: x.h(), w: x.w(), kh: k.kh(), kw: k.kw() })
}

/// Zero-padded, stride-1 convolution: output is `n × out_c × h × w`.
pub fn conv2d_same_forward(x: &Tensor4, k: &ConvKernel) -> Result<Tensor4> {
    let geo = geometry(x, k)?;
    let (n, _, h, w) = x.dims();
    let out_c = k.out_c();
    let rows = geo.rows();
    let band = geo.band_rows();
    let weights: Vec<f64> = k.weights.iter().map(|&v| v as f64).collect();

    let items: Vec<Vec<f32>> = (0..n)
        .into_par_iter()
        .map(|b| {
            let xi = x.item(b);
            let mut out = vec![0.0f32; out_c * h * w];
            let mut col = Vec::new();
            let mut acc = Vec::new();
            let mut y0 = 0;
            while y0 < h {
                let y1 = (y0 + band).min(h);
                let span = (y1 - y0) * w;
                geo.im2col(xi, y0, y1, &mut col);
                acc.clear();
                acc.resize(out_c * span, 0.0);
                gemm(out_c, rows, span, &weights, (rows, 1), &col, (span, 1), false, &mut acc);
                for o in 0..out_c {
                    let bias = k.bias[o] as f64;
                    let dst = &mut out[o * h * w + y0 * w..o * h * w + y1 * w];
                    for (d, &s) in dst.iter_mut().zip(&acc[o * span..(o + 1) * span]) {
                        *d = (s + bias) as f32;
                    }
                }
                y0 = y1;
            }
            out
        })
        .collect();

    Tensor4::from_vec(n, out_c, h, w, items.concat())
}

/// Exact gradients of [`conv2d_same_forward`]. Weight and bias gradients
/// are summed over the batch in item order.
pub fn conv2d_same_backward(x: &Tensor4, k: &ConvKernel, grad_out: &Tensor4) -> Result<ConvGrads> {
    let geo = geometry(x, k)?;
    let (n, c, h, w) = x.dims();
    let out_c = k.out_c();
    if grad_out.dims() != (n, out_c, h, w) {
        return Err(Error::contract(format!(
            "conv backward: grad_out dims {:?}, expected {:?}",
            grad_out.dims(),
            (n, out_c, h, w)
        )));
    }
    let rows = geo.rows();
    let band = geo.band_rows();
    let weights: Vec<f64> = k.weights.iter().map(|&v| v as f64).collect();

    let per_item: Vec<(Vec<f32>, Vec<f64>, Vec<f64>)> = (0..n)
        .into_par_iter()
        .map(|b| {
            let xi = x.item(b);
            let gi = grad_out.item(b);
            let mut gx = vec![0.0f64; c * h * w];
            let mut gw = vec![0.0f64; out_c * rows];
            let mut gb = vec![0.0f64; out_c];
            let mut col = Vec::new();
            let mut gcol = Vec::new();
            let mut g = Vec::new();
            let mut y0 = 0;
            while y0 < h {
                let y1 = (y0 + band).min(h);
                let span = (y1 - y0) * w;
                g.clear();
                for o in 0..out_c {
                    let src = &gi[o * h * w + y0 * w..o * h * w + y1 * w];
                    g.extend(src.iter().map(|&v| v as f64));
                    gb[o] += g[o * span..(o + 1) * span].iter().sum::<f64>();
                }
                geo.im2col(xi, y0, y1, &mut col);
                // dW += G · colᵀ
                gemm(out_c, span, rows, &g, (span, 1), &col, (1, span), true, &mut gw);
                // dcol = Wᵀ · G
                gcol.clear();
                gcol.resize(rows * span, 0.0);
                gemm(rows, out_c, span, &weights, (1, rows), &g, (span, 1), false, &mut gcol);
                geo.col2im(&gcol, y0, y1, &mut gx);
                y0 = y1;
            }
            (gx.into_iter().map(|v| v as f32).collect(), gw, gb)
        })
        .collect();

    let mut gw = vec![0.0f64; out_c * rows];
    let mut gb = vec![0.0f64; out_c];
    let mut gx = Vec::with_capacity(n * c * h * w);
    for (item_gx, item_gw, item_gb) in per_item {
        gx.extend_from_slice(&item_gx);
        for (acc, v) in gw.iter_mut().zip(item_gw) {
            *acc += v;
        }
        for (acc, v) in gb.iter_mut().zip(item_gb) {
            *acc += v;
        }
    }
    Ok(ConvGrads {
        input: Tensor4::from_vec(n, c, h, w, gx)?,
        weights: gw.into_iter().map(|v| v as f32).collect(),
        bias: gb.into_iter().map(|v| v as f32).collect(),
    })
}
