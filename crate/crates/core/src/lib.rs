//! Smart Augmentation: joint training of an augmenter network and a target
//! classifier, on a small reverse-mode autodiff engine.

pub mod augment;
pub mod cli;
pub mod engine;
pub mod data;
pub mod error;
pub mod models;
pub mod trainer;

pub use error::{Error, Result};
