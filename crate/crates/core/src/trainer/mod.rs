//! Joint training of the augmenter(s) and the classifier, the baseline
//! loop, validation and best-checkpoint selection.

mod loss;
mod metrics;
mod run;
mod step;

pub use loss::{combined_loss, combined_loss_value, CombinedLossParams, LossSchedule};
pub use metrics::{metrics_csv, parse_metrics_csv, BestTracker, MetricsRecord, CSV_HEADER};
pub use run::{augmenter_name, run_training, Splits, TrainState, NETWORK_B_NAME};
pub use step::{baseline_step, joint_losses, joint_step, multi_a_step, validate, Evaluation, StepLosses};
