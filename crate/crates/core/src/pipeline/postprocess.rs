//! Thresholding and 18-connected component filtering.

use crate::volume::{LabelMask, Volume};

/// Foreground where `membership >= threshold`.
pub fn binarize(membership: &Volume, threshold: f32) -> LabelMask {
    let data = membership.data.iter().map(|&m| (m >= threshold) as u8).collect();
    LabelMask::new(membership.grid, data).expect("binary by construction")
}

/// Neighbour offsets sharing a face or an edge: Chebyshev distance 1 with at
/// most two non-zero coordinates.
pub fn offsets_18() -> Vec<[i64; 3]> {
    let mut out = Vec::with_capacity(18);
    for dz in -1..=1i64 {
        for dy in -1..=1i64 {
            for dx in -1..=1i64 {
                let nonzero = [dx, dy, dz].iter().filter(|&&d| d != 0).count();
                if (1..=2).contains(&nonzero) {
                    out.push([dx, dy, dz]);
                }
            }
        }
    }
    out
}

fn find(parent: &mut [u32], mut i: u32) -> u32 {
    while parent[i as usize] != i {
        let p = parent[i as usize];
        parent[i as usize] = parent[p as usize];
        i = p;
    }
    i
}

/// Labels 18-connected foreground components `1..=K` in order of each
/// component's first voxel in x-fastest scan order; background is 0.
/// Returns the label volume and the voxel count of each label.
pub fn label_components_18(mask: &LabelMask) -> (Vec<u32>, Vec<usize>) {
    let g = mask.grid;
    let [nx, ny, nz] = g.dims.map(|d| d as i64);
    // Neighbours already visited by the scan.
    let back: Vec<[i64; 3]> = offsets_18()
        .into_iter()
        .filter(|&[dx, dy, dz]| dz < 0 || (dz == 0 && (dy < 0 || (dy == 0 && dx < 0))))
        .collect();

    let mut provisional = vec![0u32; g.len()];
    let mut parent: Vec<u32> = vec![0];
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let i = g.index(x as usize, y as usize, z as usize);
                if !mask.is_set(i) {
                    continue;
                }
                let mut label = 0u32;
                for &[dx, dy, dz] in &back {
                    let (sx, sy, sz) = (x + dx, y + dy, z + dz);
                    if sx < 0 || sy < 0 || sz < 0 || sx >= nx || sy >= ny {
                        continue;
                    }
                    let l = provisional[g.index(sx as usize, sy as usize, sz as usize)];
                    if l == 0 {
                        continue;
                    }
                    if label == 0 {
                        label = find(&mut parent, l);
                    } else {
                        let (a, b) = (find(&mut parent, label), find(&mut parent, l));
                        if a != b {
                            let (lo, hi) = (a.min(b), a.max(b));
                            parent[hi as usize] = lo;
                            label = lo;
                        }
                    }
                }
                if label == 0 {
                    label = parent.len() as u32;
                    parent.push(label);
                }
                provisional[i] = label;
            }
        }
    }

    // Renumber roots by first appearance in scan order.
    let mut remap = vec![0u32; parent.len()];
    let mut volumes = Vec::new();
    for l in provisional.iter_mut() {
        if *l == 0 {
            continue;
        }
        let root = find(&mut parent, *l) as usize;
        if remap[root] == 0 {
            volumes.push(0);
            remap[root] = volumes.len() as u32;
        }
        *l = remap[root];
        volumes[*l as usize - 1] += 1;
    }
    (provisional, volumes)
}

/// Nearest-rank percentile: the smallest value with at least `percent`% of
/// the values at or below it. `None` for an empty list.
pub fn nearest_rank_percentile(values: &[usize], percent: u32) -> Option<usize> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_unstable();
    let rank = (percent as usize * sorted.len()).div_ceil(100).max(1);
    Some(sorted[rank - 1])
}

/// Removes 18-connected components whose volume is strictly below the
/// `percent`-th nearest-rank percentile of all component volumes.
pub fn filter_small_components(mask: &LabelMask, percent: u32) -> LabelMask {
    assert!((1..=100).contains(&percent), "percentile must be in 1..=100");
    let (labels, volumes) = label_components_18(mask);
    let Some(threshold) = nearest_rank_percentile(&volumes, percent) else {
        return mask.clone();
    };
    let keep: Vec<bool> = volumes.iter().map(|&v| v >= threshold).collect();
    let mut out = LabelMask::empty(mask.grid);
    for (i, &l) in labels.iter().enumerate() {
        if l != 0 && keep[l as usize - 1] {
            out.set(i, true);
        }
    }
    out
}
