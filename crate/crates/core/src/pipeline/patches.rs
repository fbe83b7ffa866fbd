//! Lesion-centred 2-D patch sampling.

use rand::Rng;

use super::normalize::normalize_intensities;
use super::TrainConfig;
use crate::error::{Error, Result};
use crate::tensor::Tensor4;
use crate::volume::{LabelMask, MultiContrast, Volume};

/// Input patches (3 contrasts as channels), membership targets, and the
/// storage coordinates of each patch centre.
#[derive(Clone, Debug, PartialEq)]
pub struct PatchBatch {
    pub inputs: Tensor4,
    pub targets: Tensor4,
    pub centers: Vec<[usize; 3]>,
}

/// Copies the `p × p` in-plane window centred on `center` from slice
/// `center[2]` of `v`. Rows follow storage axis 1, columns axis 0; outside
/// the volume reads as zero.
pub(crate) fn extract_patch(v: &Volume, center: [usize; 3], p: usize, out: &mut [f32]) {
    debug_assert_eq!(out.len(), p * p);
    let [w, h, _] = v.dims();
    let half = (p / 2) as isize;
    for r in 0..p {
        let sy = center[1] as isize + r as isize - half;
        let row = &mut out[r * p..(r + 1) * p];
        if sy < 0 || sy >= h as isize {
            row.fill(0.0);
            continue;
        }
        for (q, dst) in row.iter_mut().enumerate() {
            let sx = center[0] as isize + q as isize - half;
            *dst = if sx < 0 || sx >= w as isize {
                0.0
            } else {
                v.get(sx as usize, sy as usize, center[2])
            };
        }
    }
}

/// Assembles a batch from already-normalised contrasts.
pub(crate) fn assemble_batch(
    items: &[(&MultiContrast, &Volume, [usize; 3])],
    p: usize,
) -> Result<PatchBatch> {
    let n = items.len();
    let plane = p * p;
    let mut inputs = vec![0.0f32; n * 3 * plane];
    let mut targets = vec![0.0f32; n * plane];
    for (b, (mc, membership, center)) in items.iter().enumerate() {
        for (c, vol) in mc.channels().into_iter().enumerate() {
            let off = (b * 3 + c) * plane;
            extract_patch(vol, *center, p, &mut inputs[off..off + plane]);
        }
        extract_patch(membership, *center, p, &mut targets[b * plane..(b + 1) * plane]);
    }
    Ok(PatchBatch {
        inputs: Tensor4::from_vec(n, 3, p, p, inputs)?,
        targets: Tensor4::from_vec(n, 1, p, p, targets)?,
        centers: items.iter().map(|it| it.2).collect(),
    })
}

pub(crate) fn lesion_voxels(mask: &LabelMask) -> Vec<usize> {
    (0..mask.data().len()).filter(|&i| mask.is_set(i)).collect()
}

/// Draws `cfg.batch_size` patch centres uniformly, with replacement, from
/// the non-zero voxels of `mask`, and cuts z-scored input patches and
/// membership targets around them. Volumes are zero-padded so centres near
/// the edge are valid.
pub fn sample_patch_batch<R: Rng + ?Sized>(
    mc: &MultiContrast,
    mask: &LabelMask,
    membership: &Volume,
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<PatchBatch> {
    mc.grid().check_same(&mask.grid, "mask vs images")?;
    mc.grid().check_same(&membership.grid, "membership vs images")?;
    let lesion = lesion_voxels(mask);
    if lesion.is_empty() {
        return Err(Error::NoLesionVoxels);
    }
    let normalized = mc.map(normalize_intensities);
    let items: Vec<_> = (0..cfg.batch_size)
        .map(|_| {
            let i = lesion[rng.random_range(0..lesion.len())];
            (&normalized, membership, mask.grid.coords(i))
        })
        .collect();
    assemble_batch(&items, cfg.patch_size)
}
