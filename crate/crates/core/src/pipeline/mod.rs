//! Volumes in, segmentations out: target construction, patch sampling,
//! training, whole-slice inference, fusion and post-processing.

mod blur;
mod infer;
mod normalize;
mod patches;
mod postprocess;
mod train;

pub use blur::{blur_labels, gaussian_kernel};
pub use infer::{fuse_memberships, infer_orientation, segment};
pub use normalize::normalize_intensities;
pub use patches::{sample_patch_batch, PatchBatch};
pub use postprocess::{
    binarize, filter_small_components, label_components_18, nearest_rank_percentile, offsets_18,
};
pub use train::{train_orientation_model, train_orientation_model_with, validation_count, LossHistory};

use crate::error::{Error, Result};
use crate::net::InceptionConfig;
use crate::optim::AdamHyper;

/// Training settings for one orientation model.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    /// In-plane patch edge; odd.
    pub patch_size: usize,
    pub batch_size: usize,
    pub epochs: usize,
    /// Share of the patch pool held out for validation, in `[0, 1)`.
    pub validation_fraction: f64,
    /// Gaussian σ (mm) applied to manual masks to build membership targets.
    pub blur_sigma_mm: f64,
    /// Size of the lesion-centred patch pool per orientation.
    pub patches: usize,
    pub seed: u64,
    pub adam: AdamHyper,
    pub stack: [InceptionConfig; 3],
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            patch_size: 45,
            batch_size: 64,
            epochs: 10,
            validation_fraction: 0.2,
            blur_sigma_mm: 1.0,
            patches: 450_000,
            seed: 0,
            adam: AdamHyper::default(),
            stack: InceptionConfig::DEFAULT_STACK,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if self.patch_size == 0 || self.patch_size % 2 == 0 {
            return fail("patch_size must be odd");
        }
        if self.batch_size == 0 || self.epochs == 0 || self.patches == 0 {
            return fail("batch_size, epochs and patches must be >= 1");
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return fail("validation_fraction must be in [0, 1)");
        }
        if !(self.blur_sigma_mm >= 0.0 && self.blur_sigma_mm.is_finite()) {
            return fail("blur_sigma_mm must be >= 0");
        }
        self.adam.validate()?;
        self.stack.iter().try_for_each(InceptionConfig::validate)
    }
}

/// Post-processing settings for [`segment`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SegmentConfig {
    /// Membership at or above this is foreground.
    pub threshold: f32,
    /// Components smaller than this nearest-rank percentile of component
    /// volumes are dropped.
    pub percentile: u32,
}

impl Default for SegmentConfig {
    fn default() -> Self {
        Self { threshold: 0.5, percentile: 90 }
    }
}

impl SegmentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::Config("threshold must be in (0, 1)".into()));
        }
        if !(1..=100).contains(&self.percentile) {
            return Err(Error::Config("percentile must be in 1..=100".into()));
        }
        Ok(())
    }
}

/// SplitMix64-style mixing of a base seed with a stream tag and index, so
/// every random stream in training is fixed by the configured seed alone.
pub fn derive_seed(seed: u64, tag: u64, index: u64) -> u64 {
    let mut z = seed
        ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ index.wrapping_mul(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
