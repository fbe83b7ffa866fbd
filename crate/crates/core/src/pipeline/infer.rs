//! Whole-slice inference, orientation fusion and the end-to-end segmenter.

use rayon::prelude::*;

use super::normalize::normalize_intensities;
use super::postprocess::{binarize, filter_small_components};
use super::SegmentConfig;
use crate::error::{Error, Result};
use crate::net::Network;
use crate::tensor::Tensor4;
use crate::volume::{reorient, LabelMask, MultiContrast, Orientation, Volume};

/// Membership for every voxel of `mc`, computed slice by slice in
/// `orientation`. Each slice goes through the network whole; the result
/// is reoriented back onto the subject's grid.
pub fn infer_orientation(net: &Network, mc: &MultiContrast, orientation: Orientation) -> Result<Volume> {
    if net.input_channels != 3 {
        return Err(Error::contract("network must take 3 input channels"));
    }
    let native = mc.grid().orientation;
    let images = mc.map(normalize_intensities).reorient(orientation);
    let grid = images.grid();
    let [w, h, slices] = grid.dims;
    let plane = w * h;

    let out: Vec<Vec<f32>> = (0..slices)
        .into_par_iter()
        .map(|k| {
            let mut x = Vec::with_capacity(3 * plane);
            for vol in images.channels() {
                x.extend_from_slice(&vol.data[k * plane..(k + 1) * plane]);
            }
            let x = Tensor4::from_vec(1, 3, h, w, x)?;
            Ok(net.predict(&x)?.into_vec())
        })
        .collect::<Result<_>>()?;

    let membership = Volume::new(grid, out.concat())?;
    Ok(reorient(&membership, native))
}

/// Voxelwise mean of three memberships on the same grid.
pub fn fuse_memberships(a: &Volume, b: &Volume, c: &Volume) -> Result<Volume> {
    a.grid.check_same(&b.grid, "fuse")?;
    a.grid.check_same(&c.grid, "fuse")?;
    let data = a
        .data
        .iter()
        .zip(&b.data)
        .zip(&c.data)
        .map(|((&x, &y), &z)| ((x as f64 + y as f64 + z as f64) / 3.0) as f32)
        .collect();
    Volume::new(a.grid, data)
}

/// Axial, coronal and sagittal models → fused membership → threshold →
/// small-component removal. Returns the final mask and the fused membership.
pub fn segment(
    models: &[Network; 3],
    mc: &MultiContrast,
    cfg: &SegmentConfig,
) -> Result<(LabelMask, Volume)> {
    let memberships = Orientation::ALL
        .par_iter()
        .zip(models.par_iter())
        .map(|(&o, net)| infer_orientation(net, mc, o))
        .collect::<Result<Vec<_>>>()?;
    let fused = fuse_memberships(&memberships[0], &memberships[1], &memberships[2])?;
    let mask = filter_small_components(&binarize(&fused, cfg.threshold), cfg.percentile);
    Ok((mask, fused))
}
