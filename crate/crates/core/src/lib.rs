//! Toolkit for studying adversarial domain adaptation of building
//! segmentation under limited source data.
//!
//! - [`geodata`]: deterministic synthetic city tiles, manifests, splits, batching.
//! - [`models`]: segmenter / discriminator networks and entropy maps.
//! - [`augment`]: paired and discriminator-side augmentation, adaptive probability.
//! - [`adapt`]: source-only and adversarial training loops, overfitting monitor.
//! - [`eval`]: IoU metrics, report tables, prediction panels.
//! - [`labelgap`]: purity curves over single-linkage merges of label features.

pub mod adapt;
pub mod augment;
pub mod error;
pub mod eval;
pub mod geodata;
pub mod labelgap;
pub mod models;
pub mod rng;

pub use error::{Error, Result};
