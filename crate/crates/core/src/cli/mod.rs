//! Experiment runner plumbing behind the `smartaug` binary.

mod commands;
mod config;
mod datasets;

pub use commands::{
    cmd_dump_aug, cmd_export_curves, cmd_gen_synthetic, cmd_train, curves_svg, default_augmenter_checkpoint, grid_configs,
    load_augmenter, run_dir, RunManifest, CONFIG_FILE, MANIFEST_FILE, METRICS_FILE,
};
pub use config::{DatasetSource, ExperimentConfig, NetB, DEFAULT_LR_MULTI, DEFAULT_LR_SINGLE};
pub use datasets::{load_splits, synthetic_spec};
