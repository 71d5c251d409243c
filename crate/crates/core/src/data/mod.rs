//! Dataset ingestion, preprocessing, splitting and the synthetic generator.

mod dataset;
pub mod idx;
mod image_dir;
pub mod pnm;
mod preprocess;
mod split;
mod synthetic;

pub use dataset::{Dataset, Sample};
pub use idx::load_idx;
pub use image_dir::{load_image_dir, load_image_dir_with, read_image, subject_from_filename, write_image_dir};
pub use preprocess::{clip_unit, preprocess, resize_bilinear, to_grayscale, PreprocessTarget};
pub use split::{split, SplitSpec};
pub use synthetic::{gen_synthetic, SyntheticSpec, CLASS_NAMES};
