//! Concrete network compositions: the augmenter (Network A) and the small
//! classifier (Network B1).

mod graph;
mod networks;

pub use graph::{GraphBuilder, ImageShape, Layer, LayerGraph};
pub use networks::{build_network_a, build_network_b1, AugmenterArch, ClassifierArch, NetworkA, NetworkB1};
