//! Segmenter and discriminator networks, their layer primitives, and the
//! entropy / self-information maps that connect them.

mod checkpoint;
mod discriminator;
mod heads;
mod layers;
mod params;
mod segmenter;
mod tensor;

pub use checkpoint::{ArrayData, Checkpoint, NamedArray, FORMAT_VERSION};
pub use discriminator::{Discriminator, DiscriminatorCache, DiscriminatorDescriptor};
pub use heads::{
    entropy_backward, entropy_map, self_information_backward, self_information_map, softmax_probs, ProbMap,
    SelfInfoMap, LOG_EPS,
};
pub use layers::{conv2d, conv2d_backward, conv2d_forward, upsample2x, upsample2x_backward, ConvGeometry, ConvGrads};
pub use params::{Param, ParamSet};
pub use segmenter::{Segmenter, SegmenterCache, SegmenterDescriptor};
pub use tensor::{Real, Tensor};
