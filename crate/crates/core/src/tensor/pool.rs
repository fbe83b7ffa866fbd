//! 3×3 stride-1 pooling that keeps the spatial size.
//!
//! Max pooling only considers in-bounds taps (equivalent to −∞ padding) and
//! breaks ties on the first tap in row-major order. Average pooling divides
//! by the number of in-bounds taps, so borders are not darkened.

use super::Tensor4;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PoolMode {
    Max,
    Avg,
}

/// What the backward pass needs from a forward pooling call.
#[derive(Clone, Debug)]
pub struct PoolCache {
    mode: PoolMode,
    dims: (usize, usize, usize, usize),
    /// For max pooling: in-plane flat index of the selected tap per output.
    argmax: Vec<u32>,
}

impl PoolCache {
    pub fn mode(&self) -> PoolMode {
        self.mode
    }

    /// Selected tap per output (max pooling only; empty for average).
    pub fn argmax(&self) -> &[u32] {
        &self.argmax
    }
}

#[inline]
fn window(i: usize, len: usize) -> (usize, usize) {
    (i.saturating_sub(1), (i + 2).min(len))
}

pub fn pool3x3_forward(x: &Tensor4, mode: PoolMode) -> (Tensor4, PoolCache) {
    let (n, c, h, w) = x.dims();
    let plane = h * w;
    let mut out = vec![0.0f32; x.len()];
    let mut argmax = match mode {
        PoolMode::Max => vec![0u32; x.len()],
        PoolMode::Avg => Vec::new(),
    };
    for p in 0..n * c {
        let src = &x.data()[p * plane..(p + 1) * plane];
        let dst = &mut out[p * plane..(p + 1) * plane];
        for y in 0..h {
            let (y0, y1) = window(y, h);
            for xo in 0..w {
                let (x0, x1) = window(xo, w);
                match mode {
                    PoolMode::Max => {
                        let mut best = f32::NEG_INFINITY;
                        let mut best_at = 0usize;
                        for sy in y0..y1 {
                            for sx in x0..x1 {
                                let v = src[sy * w + sx];
                                if v > best {
                                    best = v;
                                    best_at = sy * w + sx;
                                }
                            }
                        }
                        dst[y * w + xo] = best;
                        argmax[p * plane + y * w + xo] = best_at as u32;
                    }
                    PoolMode::Avg => {
                        let mut s = 0.0f64;
                        for sy in y0..y1 {
                            for sx in x0..x1 {
                                s += src[sy * w + sx] as f64;
                            }
                        }
                        let count = ((y1 - y0) * (x1 - x0)) as f64;
                        dst[y * w + xo] = (s / count) as f32;
                    }
                }
            }
        }
    }
    let y = Tensor4::from_vec(n, c, h, w, out).expect("pool output has input dims");
    (y, PoolCache { mode, dims: x.dims(), argmax })
}

pub fn pool3x3_backward(cache: &PoolCache, grad_out: &Tensor4) -> Result<Tensor4> {
    if grad_out.dims() != cache.dims {
        return Err(Error::contract(format!(
            "pool backward: grad_out dims {:?}, forward dims {:?}",
            grad_out.dims(),
            cache.dims
        )));
    }
    let (n, c, h, w) = cache.dims;
    let plane = h * w;
    let mut gx = vec![0.0f64; grad_out.len()];
    for p in 0..n * c {
        let g = &grad_out.data()[p * plane..(p + 1) * plane];
        let dst = &mut gx[p * plane..(p + 1) * plane];
        match cache.mode {
            PoolMode::Max => {
                let sel = &cache.argmax[p * plane..(p + 1) * plane];
                for (&gv, &at) in g.iter().zip(sel) {
                    dst[at as usize] += gv as f64;
                }
            }
            PoolMode::Avg => {
                for y in 0..h {
                    let (y0, y1) = window(y, h);
                    for xo in 0..w {
                        let (x0, x1) = window(xo, w);
                        let share = g[y * w + xo] as f64 / ((y1 - y0) * (x1 - x0)) as f64;
                        for sy in y0..y1 {
                            for sx in x0..x1 {
                                dst[sy * w + sx] += share;
                            }
                        }
                    }
                }
            }
        }
    }
    Tensor4::from_vec(n, c, h, w, gx.into_iter().map(|v| v as f32).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Enumerates each window explicitly with signed offsets.
    fn window_oracle(x: &Tensor4, mode: PoolMode) -> Vec<f32> {
        let (n, c, h, w) = x.dims();
        let mut out = Vec::new();
        for b in 0..n {
            for ch in 0..c {
                for y in 0..h as isize {
                    for xo in 0..w as isize {
                        let mut taps = Vec::new();
                        for dy in -1..=1isize {
                            for dx in -1..=1isize {
                                let (sy, sx) = (y + dy, xo + dx);
                                if sy >= 0 && sx >= 0 && sy < h as isize && sx < w as isize {
                                    taps.push(x.get(b, ch, sy as usize, sx as usize));
                                }
                            }
                        }
                        out.push(match mode {
                            PoolMode::Max => taps.iter().cloned().fold(f32::NEG_INFINITY, f32::max),
                            PoolMode::Avg => {
                                (taps.iter().map(|&v| v as f64).sum::<f64>() / taps.len() as f64) as f32
                            }
                        });
                    }
                }
            }
        }
        out
    }

    #[test]
    fn constant_plane_avg_is_constant() {
        let x = Tensor4::filled(1, 2, 4, 5, 3.25);
        let (y, _) = pool3x3_forward(&x, PoolMode::Avg);
        assert!(y.data().iter().all(|&v| v == 3.25));
    }

    #[test]
    fn centre_spike_fills_max_window() {
        let mut x = Tensor4::zeros(1, 1, 3, 3);
        x.set(0, 0, 1, 1, 1.0);
        let (y, _) = pool3x3_forward(&x, PoolMode::Max);
        assert!(y.data().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn matches_window_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let data = (0..50).map(|_| rng.random_range(-2.0f32..2.0)).collect();
        let x = Tensor4::from_vec(2, 1, 5, 5, data).unwrap();
        for mode in [PoolMode::Max, PoolMode::Avg] {
            let (y, _) = pool3x3_forward(&x, mode);
            for (a, b) in y.data().iter().zip(window_oracle(&x, mode)) {
                assert!((a - b).abs() <= 1e-6, "{mode:?}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn max_ties_route_to_first_tap() {
        let x = Tensor4::filled(1, 1, 3, 3, 1.0);
        let (_, cache) = pool3x3_forward(&x, PoolMode::Max);
        let g = pool3x3_backward(&cache, &Tensor4::filled(1, 1, 3, 3, 1.0)).unwrap();
        // Every window's first in-bounds tap: (0,0) for the top-left 2x2
        // outputs, (0,1) for the rest of the top rows, and so on.
        assert_eq!(g.data(), &[4.0, 2.0, 0.0, 2.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn zero_upstream_gives_zero_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let data = (0..32).map(|_| rng.random_range(-1.0f32..1.0)).collect();
        let x = Tensor4::from_vec(2, 1, 4, 4, data).unwrap();
        for mode in [PoolMode::Max, PoolMode::Avg] {
            let (_, cache) = pool3x3_forward(&x, mode);
            let g = pool3x3_backward(&cache, &Tensor4::zeros(2, 1, 4, 4)).unwrap();
            assert!(g.data().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn avg_backward_interior_is_neighbour_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let data: Vec<f32> = (0..49).map(|_| rng.random_range(-1.0f32..1.0)).collect();
        let g = Tensor4::from_vec(1, 1, 7, 7, data).unwrap();
        let (_, cache) = pool3x3_forward(&Tensor4::zeros(1, 1, 7, 7), PoolMode::Avg);
        let gx = pool3x3_backward(&cache, &g).unwrap();
        // Positions whose whole 3x3 neighbourhood consists of interior outputs.
        for y in 2..5 {
            for x in 2..5 {
                let mut s = 0.0f64;
                for sy in y - 1..=y + 1 {
                    for sx in x - 1..=x + 1 {
                        s += g.get(0, 0, sy, sx) as f64 / 9.0;
                    }
                }
                assert!((gx.get(0, 0, y, x) as f64 - s).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn max_dominates_avg_on_nonnegative_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut vals: Vec<f32> = (0..60).map(|i| i as f32 * 0.1).collect();
        vals.shuffle(&mut rng);
        let x = Tensor4::from_vec(1, 3, 4, 5, vals).unwrap();
        let (mx, _) = pool3x3_forward(&x, PoolMode::Max);
        let (av, _) = pool3x3_forward(&x, PoolMode::Avg);
        assert!(mx.data().iter().zip(av.data()).all(|(a, b)| a >= b));
    }

    #[test]
    fn backward_rejects_wrong_dims() {
        let (_, cache) = pool3x3_forward(&Tensor4::zeros(1, 1, 3, 3), PoolMode::Avg);
        assert!(pool3x3_backward(&cache, &Tensor4::zeros(1, 1, 3, 4)).is_err());
    }
}
