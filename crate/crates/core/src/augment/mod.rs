//! Inputs for the augmenter network and fixed traditional augmentations.

mod batch;
mod route;
mod traditional;

pub use batch::{pack_channels, select_samples, unpack_channels, AugmentBatch, Selection};
pub use route::{route_by_class, ClassPartition};
pub use traditional::{
    flip_horizontal, gaussian_blur3, rotate, traditional_expand, traditional_variants, TraditionalAugConfig,
};
