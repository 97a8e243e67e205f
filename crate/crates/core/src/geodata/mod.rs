//! Synthetic city tiles, manifests, splits and batch iteration.

mod batches;
mod manifest;
pub mod presets;
mod render;
mod style;

pub use batches::{batch_iterator, Batch, BatchIterator, Cursor};
pub use manifest::{
    generate_dataset, save_image_png, save_mask_png, split, split_dataset, tile_seed, Dataset, Manifest, ManifestEntry,
    MANIFEST_FILE, MANIFEST_VERSION,
};
pub use presets::{benchmark_preset, style_by_name, BenchmarkPreset};
pub use render::{generate_tile, Mask, Sample, TileMeta, MIN_TILE_SIZE};
pub use style::{CityStyle, DomainTag, OrientationMode, Role};
