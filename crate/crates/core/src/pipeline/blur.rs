//! Gaussian-blurred membership targets.

use crate::volume::{LabelMask, Volume};

/// Normalised 1-D Gaussian truncated at `ceil(3σ)`; `[1]` when `σ = 0`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return vec![1.0];
    }
    let radius = (3.0 * sigma).ceil() as i64;
    let raw: Vec<f64> = (-radius..=radius)
        .map(|k| (-(k * k) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

/// Separable 3-D Gaussian smoothing of a binary mask with per-axis
/// `σ = sigma_mm / spacing`, replicate boundary. Output lies in [0, 1].
pub fn blur_labels(mask: &LabelMask, sigma_mm: f64) -> Volume {
    assert!(sigma_mm >= 0.0, "sigma_mm must be >= 0");
    let grid = mask.grid;
    let dims = grid.dims;
    let strides = [1, dims[0], dims[0] * dims[1]];
    let mut buf: Vec<f64> = mask.data().iter().map(|&b| b as f64).collect();
    let mut next = vec![0.0f64; buf.len()];

    for axis in 0..3 {
        let kernel = gaussian_kernel(sigma_mm / grid.spacing[axis] as f64);
        if kernel.len() == 1 {
            continue;
        }
        let radius = (kernel.len() / 2) as i64;
        let len = dims[axis] as i64;
        let stride = strides[axis];
        for (i, out) in next.iter_mut().enumerate() {
            let pos = ((i / stride) % dims[axis]) as i64;
            let line_start = i - pos as usize * stride;
            let mut acc = 0.0;
            for (t, &w) in kernel.iter().enumerate() {
                let src = (pos + t as i64 - radius).clamp(0, len - 1) as usize;
                acc += w * buf[line_start + src * stride];
            }
            *out = acc;
        }
        std::mem::swap(&mut buf, &mut next);
    }

    Volume { grid, data: buf.into_iter().map(|v| v.clamp(0.0, 1.0) as f32).collect() }
}
