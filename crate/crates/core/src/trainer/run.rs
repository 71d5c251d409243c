use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::metrics::{BestTracker, MetricsRecord};
use super::step::{baseline_step, joint_step, multi_a_step, validate, StepLosses};
use crate::augment::{traditional_expand, AugmentBatch, TraditionalAugConfig};
use crate::cli::{ExperimentConfig, NetB};
use crate::data::Dataset;
use crate::engine::checkpoint::NamedTensor;
use crate::engine::{ParamStore, SgdNesterov};
use crate::error::{Error, Result};
use crate::models::{build_network_a, build_network_b1, NetworkA, NetworkB1};

/// Training, validation and test sets of one experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct Splits {
    pub train: Dataset,
    pub val: Dataset,
    pub test: Dataset,
}

/// Everything a finished run produces.
#[derive(Clone, Debug)]
pub struct TrainState {
    /// Epochs completed.
    pub epoch: usize,
    pub best_validation_loss: f64,
    pub best_epoch: Option<usize>,
    /// Network B state (parameters and running statistics) at `best_epoch`.
    pub best_checkpoint: Vec<NamedTensor>,
    /// Best validation loss after each epoch.
    pub best_loss_history: Vec<f64>,
    pub metrics: Vec<MetricsRecord>,
    pub test_accuracy: f64,
    pub test_loss: f64,
    /// Network A forward passes made while validating and testing.
    pub eval_a_forward_passes: usize,
    pub store: ParamStore,
    /// Restored to the best checkpoint.
    pub network_b: NetworkB1,
    /// Final augmenters; kept only so they can be exported, never used for testing.
    pub augmenters: Vec<NetworkA>,
}

enum Augmenters {
    None,
    Shared(NetworkA),
    PerClass(BTreeMap<usize, NetworkA>),
}

impl Augmenters {
    fn forward_passes(&self) -> usize {
        match self {
            Augmenters::None => 0,
            Augmenters::Shared(a) => a.forward_passes(),
            Augmenters::PerClass(m) => m.values().map(NetworkA::forward_passes).sum(),
        }
    }

    fn into_vec(self) -> Vec<NetworkA> {
        match self {
            Augmenters::None => Vec::new(),
            Augmenters::Shared(a) => vec![a],
            Augmenters::PerClass(m) => m.into_values().collect(),
        }
    }
}

/// Parameter-name prefix of the `i`-th augmenter in a run with `count` of them.
pub fn augmenter_name(i: usize, count: usize) -> String {
    if count == 1 {
        "network_a".into()
    } else {
        format!("network_a{i}")
    }
}

pub const NETWORK_B_NAME: &str = "network_b";

fn check_inputs(config: &ExperimentConfig, splits: &Splits) -> Result<()> {
    config.validate()?;
    if config.net_b == NetB::B2 {
        return Err(Error::config("net_b", "only b1 can be trained"));
    }
    let shape = splits.train.shape();
    for (name, d) in [("validation", &splits.val), ("test", &splits.test)] {
        if d.shape() != shape {
            return Err(Error::Data(format!(
                "{name} images are {:?}, training images {:?}",
                d.shape().dims(),
                shape.dims()
            )));
        }
        if d.num_classes() != splits.train.num_classes() {
            return Err(Error::Data(format!("{name} set has a different class list")));
        }
    }
    if config.smart() {
        let k = config.a_channels;
        for (class, members) in splits.train.indices_by_class().iter().enumerate() {
            if !members.is_empty() && members.len() < k + 1 {
                return Err(Error::Data(format!(
                    "class {} (`{}`) has {} training samples but a_channels = {k} needs at least {}",
                    class,
                    splits.train.class_names()[class],
                    members.len(),
                    k + 1
                )));
            }
        }
        if config.num_net_a >= 2 && config.num_net_a != splits.train.num_classes() {
            return Err(Error::config(
                "num_net_a",
                format!(
                    "per-class mode needs one augmenter per class ({} classes)",
                    splits.train.num_classes()
                ),
            ));
        }
    }
    Ok(())
}

/// Runs one experiment: trains for `config.epochs`, validates Network B alone
/// after every epoch, keeps the lowest-validation-loss state of B, then
/// restores it and measures test accuracy without any augmenter.
///
/// `on_epoch` sees every record as soon as its epoch finishes.
pub fn run_training(
    config: &ExperimentConfig,
    splits: &Splits,
    on_epoch: &mut dyn FnMut(&MetricsRecord),
) -> Result<TrainState> {
    check_inputs(config, splits)?;
    let expanded;
    let train = if config.traditional_aug {
        expanded = traditional_expand(&splits.train, &TraditionalAugConfig::standard_grid())?;
        &expanded
    } else {
        &splits.train
    };

    let shape = train.shape();
    let spatial = (shape.height, shape.width);
    let mut init_rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1);

    let mut store = ParamStore::new();
    let mut net_b = build_network_b1(
        &mut store,
        NETWORK_B_NAME,
        shape.channels,
        train.num_classes(),
        spatial,
        config.classifier_arch(),
        &mut init_rng,
    )?;
    let k = config.a_channels;
    let mut build_a = |store: &mut ParamStore, name: &str| {
        build_network_a(store, name, k * shape.channels, shape.channels, spatial, config.augmenter_arch(), &mut init_rng)
    };
    let mut augmenters = match config.num_net_a {
        0 => Augmenters::None,
        1 => Augmenters::Shared(build_a(&mut store, &augmenter_name(0, 1))?),
        n => {
            let mut m = BTreeMap::new();
            for c in 0..n {
                m.insert(c, build_a(&mut store, &augmenter_name(c, n))?);
            }
            Augmenters::PerClass(m)
        }
    };

    let mut opt = SgdNesterov::new(config.learning_rate, config.momentum)?;
    let schedule = config.loss_schedule();
    let by_class = train.indices_by_class();
    let labels = train.labels();
    let mut best = BestTracker::new(net_b.graph.state(&store));
    let mut metrics = Vec::with_capacity(config.epochs);
    let mut eval_a_forward_passes = 0;

    for epoch in 1..=config.epochs {
        let (mut sum_total, mut sum_a, mut sum_b, mut weight) = (0.0, 0.0, 0.0, 0.0);
        let mut add = |l: StepLosses, w: usize| {
            let w = w as f64;
            sum_total += l.total * w;
            sum_a += l.loss_a.unwrap_or(0.0) * w;
            sum_b += l.loss_b * w;
            weight += w;
        };
        match &mut augmenters {
            Augmenters::None => {
                let mut order: Vec<usize> = (0..train.len()).collect();
                order.shuffle(&mut rng);
                for chunk in order.chunks(config.batch_size) {
                    let (images, y) = train.batch(chunk)?;
                    let loss = baseline_step(&mut store, &mut net_b, &images, &y, &mut opt, &mut rng)?;
                    add(
                        StepLosses {
                            loss_a: None,
                            loss_b: loss,
                            total: loss,
                        },
                        chunk.len(),
                    );
                }
            }
            augs => {
                let params = schedule.at(epoch, config.epochs);
                let mut classes = labels.clone();
                classes.shuffle(&mut rng);
                classes.truncate(train.len().div_ceil(2));
                for chunk in classes.chunks((config.batch_size / 2).max(1)) {
                    let batch = AugmentBatch::assemble(train, &by_class, chunk, k, &mut rng)?;
                    let l = match augs {
                        Augmenters::Shared(a) => {
                            joint_step(&mut store, a, &mut net_b, &batch, &params, &mut opt, &mut rng)?
                        }
                        Augmenters::PerClass(m) => {
                            multi_a_step(&mut store, m, &mut net_b, &batch, &params, &mut opt, &mut rng)?
                        }
                        Augmenters::None => unreachable!(),
                    };
                    add(l, 2 * chunk.len());
                }
            }
        }

        let before = augmenters.forward_passes();
        let val = validate(&store, &mut net_b, &splits.val)?;
        eval_a_forward_passes += augmenters.forward_passes() - before;
        best.observe(epoch, val.loss, || net_b.graph.state(&store));

        let record = MetricsRecord {
            epoch,
            train_loss_total: sum_total / weight,
            train_loss_a: config.smart().then_some(sum_a / weight),
            train_loss_b: sum_b / weight,
            val_loss_b: val.loss,
            val_accuracy: val.accuracy,
            test_accuracy_at_best: None,
        };
        on_epoch(&record);
        metrics.push(record);
    }

    let (best_validation_loss, best_epoch, best_checkpoint, best_loss_history) = best.into_parts();
    net_b.graph.load_state(&mut store, &best_checkpoint)?;
    let before = augmenters.forward_passes();
    let test = validate(&store, &mut net_b, &splits.test)?;
    eval_a_forward_passes += augmenters.forward_passes() - before;
    if let Some(e) = best_epoch {
        metrics[e - 1].test_accuracy_at_best = Some(test.accuracy);
    }

    Ok(TrainState {
        epoch: config.epochs,
        best_validation_loss,
        best_epoch,
        best_checkpoint,
        best_loss_history,
        metrics,
        test_accuracy: test.accuracy,
        test_loss: test.loss,
        eval_a_forward_passes,
        store,
        network_b: net_b,
        augmenters: augmenters.into_vec(),
    })
}
