//! Brute-force reference implementations and fixtures shared by the
//! integration tests and the acceptance run.

#![allow(dead_code)]

use std::collections::VecDeque;

use inseg::net::InceptionConfig;
use inseg::pipeline::TrainConfig;
use inseg::{generate_phantom, Grid, LabelMask, MultiContrast, Orientation, PhantomSpec};
use rand::Rng;

pub fn grid(dims: [usize; 3]) -> Grid {
    Grid::new(dims, [1.0; 3], Orientation::Axial).unwrap()
}

pub fn random_mask(rng: &mut impl Rng, dims: [usize; 3], density: f64) -> LabelMask {
    let g = grid(dims);
    let data = (0..g.len()).map(|_| rng.random_bool(density) as u8).collect();
    LabelMask::new(g, data).unwrap()
}

fn neighbours_18(dims: [usize; 3], p: [usize; 3]) -> Vec<[usize; 3]> {
    let mut out = Vec::new();
    for dz in -1i64..=1 {
        for dy in -1i64..=1 {
            for dx in -1i64..=1 {
                let manhattan = dx.abs() + dy.abs() + dz.abs();
                if manhattan == 0 || manhattan == 3 {
                    continue;
                }
                let q = [p[0] as i64 + dx, p[1] as i64 + dy, p[2] as i64 + dz];
                if (0..3).all(|i| q[i] >= 0 && q[i] < dims[i] as i64) {
                    out.push([q[0] as usize, q[1] as usize, q[2] as usize]);
                }
            }
        }
    }
    out
}

/// Breadth-first flood fill from every unvisited foreground voxel in scan
/// order. Each component lists its voxel indices.
pub fn flood_fill_components(mask: &LabelMask) -> Vec<Vec<usize>> {
    let g = mask.grid;
    let mut seen = vec![false; g.len()];
    let mut comps = Vec::new();
    for start in 0..g.len() {
        if !mask.is_set(start) || seen[start] {
            continue;
        }
        seen[start] = true;
        let mut comp = vec![start];
        let mut queue = VecDeque::from([start]);
        while let Some(i) = queue.pop_front() {
            for q in neighbours_18(g.dims, g.coords(i)) {
                let j = g.index(q[0], q[1], q[2]);
                if mask.is_set(j) && !seen[j] {
                    seen[j] = true;
                    comp.push(j);
                    queue.push_back(j);
                }
            }
        }
        comps.push(comp);
    }
    comps
}

/// Component membership as "smallest voxel index in my component", or
/// `usize::MAX` for background. Equal vectors mean equal partitions.
pub fn canonical_partition(len: usize, comps: &[Vec<usize>]) -> Vec<usize> {
    let mut out = vec![usize::MAX; len];
    for c in comps {
        let root = *c.iter().min().unwrap();
        for &i in c {
            out[i] = root;
        }
    }
    out
}

pub fn partition_from_labels(labels: &[u32]) -> Vec<usize> {
    let mut first = std::collections::HashMap::new();
    labels
        .iter()
        .enumerate()
        .map(|(i, &l)| if l == 0 { usize::MAX } else { *first.entry(l).or_insert(i) })
        .collect()
}

/// Enumerate components, sort their volumes, take the nearest-rank
/// percentile and drop every component strictly smaller than it.
pub fn filter_oracle(mask: &LabelMask, percent: u32) -> LabelMask {
    let comps = flood_fill_components(mask);
    let mut out = LabelMask::empty(mask.grid);
    if comps.is_empty() {
        return out;
    }
    let mut volumes: Vec<usize> = comps.iter().map(Vec::len).collect();
    volumes.sort_unstable();
    let k = volumes.len() as u64;
    let rank = ((percent as u64 * k).div_ceil(100)).max(1) as usize;
    let cut = volumes[rank - 1];
    for c in comps.iter().filter(|c| c.len() >= cut) {
        for &i in c {
            out.set(i, true);
        }
    }
    out
}

fn counts(a: &LabelMask, m: &LabelMask) -> (f64, f64, f64) {
    let (mut na, mut nm, mut both) = (0.0, 0.0, 0.0);
    for i in 0..a.grid.len() {
        let (x, y) = (a.is_set(i), m.is_set(i));
        na += x as u8 as f64;
        nm += y as u8 as f64;
        both += (x && y) as u8 as f64;
    }
    (na, nm, both)
}

pub fn dice_oracle(a: &LabelMask, m: &LabelMask) -> Option<f64> {
    let (na, nm, both) = counts(a, m);
    (na + nm > 0.0).then(|| 2.0 * both / (na + nm))
}

pub fn ppv_oracle(a: &LabelMask, m: &LabelMask) -> Option<f64> {
    let (na, _, both) = counts(a, m);
    (na > 0.0).then(|| both / na)
}

pub fn vd_oracle(a: &LabelMask, m: &LabelMask) -> Option<f64> {
    let (na, nm, _) = counts(a, m);
    (nm > 0.0).then(|| (na - nm).abs() / nm)
}

/// Foreground voxels with a background or off-grid face neighbour.
pub fn boundary_oracle(mask: &LabelMask) -> Vec<[usize; 3]> {
    let g = mask.grid;
    let mut out = Vec::new();
    for i in 0..g.len() {
        if !mask.is_set(i) {
            continue;
        }
        let p = g.coords(i);
        let mut edge = false;
        for axis in 0..3 {
            for step in [-1i64, 1] {
                let mut q = p.map(|v| v as i64);
                q[axis] += step;
                if q[axis] < 0 || q[axis] >= g.dims[axis] as i64 {
                    edge = true;
                } else if !mask.is_set(g.index(q[0] as usize, q[1] as usize, q[2] as usize)) {
                    edge = true;
                }
            }
        }
        if edge {
            out.push(p);
        }
    }
    out
}

/// Mean of the two directed Hausdorff distances between boundaries,
/// every pair enumerated.
pub fn surface_distance_oracle(a: &LabelMask, m: &LabelMask, spacing: [f64; 3]) -> Option<f64> {
    let (ba, bm) = (boundary_oracle(a), boundary_oracle(m));
    if ba.is_empty() || bm.is_empty() {
        return None;
    }
    let dist = |p: &[usize; 3], q: &[usize; 3]| {
        (0..3)
            .map(|i| ((p[i] as f64 - q[i] as f64) * spacing[i]).powi(2))
            .sum::<f64>()
            .sqrt()
    };
    let directed = |from: &[[usize; 3]], to: &[[usize; 3]]| {
        from.iter()
            .map(|p| to.iter().map(|q| dist(p, q)).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    Some((directed(&ba, &bm) + directed(&bm, &ba)) / 2.0)
}

pub fn close(a: Option<f64>, b: Option<f64>, tol: f64) -> bool {
    match (a, b) {
        (Some(x), Some(y)) => (x - y).abs() <= tol,
        (None, None) => true,
        _ => false,
    }
}

pub fn phantoms(seeds: impl IntoIterator<Item = u64>, base: &PhantomSpec) -> Vec<(MultiContrast, LabelMask)> {
    seeds
        .into_iter()
        .map(|seed| generate_phantom(&PhantomSpec { seed, ..base.clone() }).unwrap())
        .collect()
}

/// The reduced-width configuration used for desk-scale phantom runs.
pub fn phantom_train_config(patches: usize, epochs: usize) -> TrainConfig {
    let mut cfg = TrainConfig {
        patch_size: 25,
        batch_size: 16,
        epochs,
        patches,
        stack: [InceptionConfig::new(4, 4, 8, 2, 4, 4, 4); 3],
        ..TrainConfig::default()
    };
    cfg.adam.lr = 1e-3;
    cfg
}
