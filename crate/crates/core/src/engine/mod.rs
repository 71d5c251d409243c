//! Reverse-mode automatic differentiation over `f64` tensors, with the layer
//! operations and optimizer the augmenter and classifier networks use.

pub mod checkpoint;
mod conv;
mod linalg;
mod norm;
mod optim;
mod params;
mod tape;
mod tensor;

pub use conv::Padding;
pub use norm::ChannelStats;
pub use optim::SgdNesterov;
pub use params::{Param, ParamId, ParamStore};
pub use tape::{Gradients, Mode, Tape, Var};
pub use tensor::Tensor;

/// Batch-norm epsilon used throughout.
pub const BN_EPSILON: f64 = 1e-5;
/// Weight of the current batch in the running-statistics moving average.
pub const BN_MOMENTUM: f64 = 0.1;
