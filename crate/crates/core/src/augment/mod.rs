//! Augmentation: per-op Bernoulli pipelines with a shared probability,
//! registered image/mask transforms, differentiable discriminator-map
//! transforms, and the adaptive probability controller.

mod adaptive;
mod apply;
mod geometry;
mod plan;

pub use adaptive::{update_probability, AdaptiveState, WINDOW_CAPACITY};
pub use apply::{augment_maps, augment_pair, MapAugmentation};
pub use geometry::{cutout_box, Interp, Resampler};
pub use plan::{
    sample_pipeline, AugmentationConfig, OpKind, Transform, TransformPlan, BRIGHTNESS_MAX, CONTRAST_RANGE,
    CUTOUT_FRACTION, HUE_MAX_TURNS, ROTATE_MAX_DEG, SCALE_RANGE, TRANSLATE_MAX_PX,
};
