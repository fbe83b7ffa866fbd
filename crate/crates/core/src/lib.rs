//! Fully-convolutional lesion segmentation from multi-contrast MRI.
//!
//! A small network built from modified Inception modules is trained per
//! slice orientation (axial, coronal, sagittal) on lesion-centred patches
//! with blurred label targets. At inference each model predicts a
//! membership volume, the three are averaged, thresholded, and small
//! connected components are removed.
//!
//! Everything, including convolution backward passes and the optimizer,
//! is implemented here without an ML framework.

pub mod error;
pub mod gradcheck;
pub mod io;
pub mod metrics;
pub mod net;
pub mod optim;
pub mod phantom;
pub mod pipeline;
pub mod tensor;
pub mod volume;

pub use error::{Error, Result};
pub use metrics::{evaluate, CohortSummary, MetricsReport};
pub use net::{build_network, count_params, InceptionConfig, Network};
pub use phantom::{generate_phantom, PhantomSpec};
pub use pipeline::{segment, train_orientation_model, SegmentConfig, TrainConfig};
pub use tensor::Tensor4;
pub use volume::{Grid, LabelMask, MultiContrast, Orientation, Volume};
