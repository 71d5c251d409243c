use super::config::{DatasetSource, ExperimentConfig};
use crate::data::{gen_synthetic, load_idx, load_image_dir_with, preprocess, split, Dataset, PreprocessTarget, SplitSpec, SyntheticSpec};
use crate::error::Result;
use crate::trainer::Splits;

/// Generator settings for a config's synthetic dataset.
pub fn synthetic_spec(config: &ExperimentConfig) -> SyntheticSpec {
    SyntheticSpec {
        noise_std: config.synthetic_noise,
        ..SyntheticSpec::new(config.image_height, config.image_width)
    }
}

/// The synthetic set is generated class-interleaved and cut into consecutive
/// train / validation / test blocks of the configured sizes.
fn synthetic_splits(config: &ExperimentConfig) -> Result<Splits> {
    let (tr, va, te) = (config.synthetic_train, config.synthetic_val, config.synthetic_test);
    let total = tr + va + te;
    let all = gen_synthetic(total.div_ceil(2), &synthetic_spec(config), config.seed)?;
    let range = |a: usize, b: usize| all.subset(&(a..b).collect::<Vec<_>>());
    Ok(Splits {
        train: range(0, tr)?,
        val: range(tr, tr + va)?,
        test: range(tr + va, total)?,
    })
}

fn target(config: &ExperimentConfig) -> PreprocessTarget {
    PreprocessTarget {
        grayscale: config.grayscale,
        height: config.image_height,
        width: config.image_width,
    }
}

/// Loads or generates the data a config names and splits it 70/20/10
/// (subject-exclusive when requested). Loaded images are resized to the
/// configured size.
pub fn load_splits(config: &ExperimentConfig) -> Result<Splits> {
    let loaded: Dataset = match &config.dataset {
        DatasetSource::Synthetic => return synthetic_splits(config),
        DatasetSource::Directory(root) => load_image_dir_with(root, Some(&target(config)))?,
        DatasetSource::Idx { images, labels } => {
            let t = target(config);
            load_idx(images, labels)?.map_images(|img| preprocess(img, &t))?
        }
    };
    let spec = SplitSpec {
        subject_exclusive: config.subject_exclusive,
        ..SplitSpec::default()
    };
    let (train, val, test) = split(&loaded, &spec, config.seed)?;
    Ok(Splits { train, val, test })
}
