//! Per-orientation training on lesion-centred patches.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::blur::blur_labels;
use super::normalize::normalize_intensities;
use super::patches::{assemble_batch, lesion_voxels, PatchBatch};
use super::{derive_seed, TrainConfig};
use crate::error::{Error, Result};
use crate::net::{build_network, network_backward, network_forward, Network};
use crate::optim::{adam_step, mse_loss, AdamState};
use crate::volume::{LabelMask, MultiContrast, Orientation, Volume};

/// Mean training and validation loss per epoch.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LossHistory {
    pub train: Vec<f64>,
    pub validation: Vec<f64>,
}

/// An atlas reoriented and prepared for patch extraction.
struct PreparedAtlas {
    images: MultiContrast,
    membership: Volume,
    lesions: Vec<usize>,
    grid: crate::volume::Grid,
}

fn prepare(atlas: &(MultiContrast, LabelMask), orientation: Orientation, sigma_mm: f64) -> Result<PreparedAtlas> {
    let (mc, mask) = atlas;
    mc.grid().check_same(&mask.grid, "atlas mask vs images")?;
    // Normalise on the native grid so statistics match inference exactly.
    let images = mc.map(normalize_intensities).reorient(orientation);
    let mask = mask.reorient(orientation);
    let membership = blur_labels(&mask, sigma_mm);
    let lesions = lesion_voxels(&mask);
    Ok(PreparedAtlas { images, membership, lesions, grid: mask.grid })
}

/// Number of pool patches held out for validation.
pub fn validation_count(pool: usize, fraction: f64) -> usize {
    (pool as f64 * fraction).round() as usize
}

/// Trains one orientation's network.
///
/// Atlases are reoriented, membership targets are built by blurring the
/// manual masks, and a pool of `cfg.patches` lesion-centred patch centres is
/// drawn uniformly over all atlases' lesion voxels. The first
/// `round(validation_fraction · pool)` entries are held out; the rest are
/// shuffled every epoch and fed to Adam in mini-batches.
pub fn train_orientation_model(
    atlases: &[(MultiContrast, LabelMask)],
    orientation: Orientation,
    cfg: &TrainConfig,
) -> Result<(Network, LossHistory)> {
    train_orientation_model_with(atlases, orientation, cfg, |_, _, _| {})
}

/// As [`train_orientation_model`], calling `on_epoch(epoch, train, val)`
/// after every epoch.
pub fn train_orientation_model_with(
    atlases: &[(MultiContrast, LabelMask)],
    orientation: Orientation,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(usize, f64, f64),
) -> Result<(Network, LossHistory)> {
    cfg.validate()?;
    if atlases.is_empty() {
        return Err(Error::Config("training needs at least one atlas".into()));
    }
    let prepared = atlases
        .iter()
        .map(|a| prepare(a, orientation, cfg.blur_sigma_mm))
        .collect::<Result<Vec<_>>>()?;

    let offsets: Vec<usize> = prepared
        .iter()
        .scan(0, |acc, a| {
            let start = *acc;
            *acc += a.lesions.len();
            Some(start)
        })
        .collect();
    let total_lesion: usize = prepared.iter().map(|a| a.lesions.len()).sum();
    if total_lesion == 0 {
        return Err(Error::NoLesionVoxels);
    }

    let tag = orientation.code() as u64;
    let mut pool_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 1 + tag, 0));
    let pool: Vec<(usize, [usize; 3])> = (0..cfg.patches)
        .map(|_| {
            let k = pool_rng.random_range(0..total_lesion);
            let a = offsets.partition_point(|&o| o <= k) - 1;
            let voxel = prepared[a].lesions[k - offsets[a]];
            (a, prepared[a].grid.coords(voxel))
        })
        .collect();
    let n_val = validation_count(pool.len(), cfg.validation_fraction);
    let (val_pool, train_pool) = pool.split_at(n_val);
    if train_pool.is_empty() {
        return Err(Error::Config("no training patches left after the validation split".into()));
    }

    let batch_of = |entries: &[(usize, [usize; 3])]| -> Result<PatchBatch> {
        let items: Vec<_> = entries
            .iter()
            .map(|&(a, c)| (&prepared[a].images, &prepared[a].membership, c))
            .collect();
        assemble_batch(&items, cfg.patch_size)
    };

    let mut net = build_network(&cfg.stack, derive_seed(cfg.seed, 10 + tag, 0))?;
    let mut params = net.params();
    let mut state = AdamState::<f32>::new(params.len());
    let mut history = LossHistory::default();
    let mut order: Vec<usize> = (0..train_pool.len()).collect();

    for epoch in 0..cfg.epochs {
        let mut shuffle_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 20 + tag, epoch as u64 + 1));
        order.shuffle(&mut shuffle_rng);
        let (mut loss_sum, mut seen) = (0.0f64, 0usize);
        for chunk in order.chunks(cfg.batch_size) {
            let entries: Vec<_> = chunk.iter().map(|&i| train_pool[i]).collect();
            let batch = batch_of(&entries)?;
            let (pred, cache) = network_forward(&net, &batch.inputs)?;
            let (loss, grad) = mse_loss(&pred, &batch.targets)?;
            let grads = network_backward(&net, &cache, &grad)?.flatten();
            let (p, s) = adam_step(&params, &grads, &state, &cfg.adam)?;
            params = p;
            state = s;
            net.set_params(&params)?;
            loss_sum += loss * chunk.len() as f64;
            seen += chunk.len();
        }
        let train_loss = loss_sum / seen as f64;

        let mut val_sum = 0.0f64;
        for chunk in val_pool.chunks(cfg.batch_size) {
            let batch = batch_of(chunk)?;
            let pred = net.predict(&batch.inputs)?;
            val_sum += mse_loss(&pred, &batch.targets)?.0 * chunk.len() as f64;
        }
        let val_loss = if val_pool.is_empty() { f64::NAN } else { val_sum / val_pool.len() as f64 };

        history.train.push(train_loss);
        history.validation.push(val_loss);
        on_epoch(epoch, train_loss, val_loss);
    }
    Ok((net, history))
}
