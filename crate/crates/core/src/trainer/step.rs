use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::loss::{combined_loss, CombinedLossParams};
use crate::augment::{route_by_class, AugmentBatch};
use crate::data::Dataset;
use crate::engine::{Gradients, Mode, ParamId, ParamStore, SgdNesterov, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::models::{NetworkA, NetworkB1};

/// Losses of one training step, measured before the update.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepLosses {
    /// Absent for baseline steps.
    pub loss_a: Option<f64>,
    pub loss_b: f64,
    pub total: f64,
}

/// Loss and accuracy of Network B over a dataset.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Evaluation {
    pub loss: f64,
    pub accuracy: f64,
}

struct SmartVars {
    loss_a: Var,
    loss_b: Var,
    total: Var,
}

/// A(s) on each part, MSE against the targets, then B on every output and
/// every target as independent samples. Parts are `(network, sub-batch)`.
fn smart_forward<R: Rng + ?Sized>(
    tape: &mut Tape<'_>,
    parts: &mut [(&mut NetworkA, &AugmentBatch)],
    net_b: &mut NetworkB1,
    params: &CombinedLossParams,
    rng: &mut R,
) -> Result<SmartVars> {
    let n: usize = parts.iter().map(|(_, b)| b.len()).sum();
    if n == 0 {
        return Err(Error::InvalidArgument("empty augment batch".into()));
    }
    let mut outs = Vec::with_capacity(parts.len());
    let mut targets = Vec::with_capacity(parts.len());
    let mut labels_out = Vec::with_capacity(n);
    let mut loss_a: Option<Var> = None;
    for (net_a, batch) in parts.iter_mut() {
        let x = tape.input(batch.packed_input.clone());
        let out = net_a.forward(tape, x, Mode::Train, rng)?;
        let t = tape.input(batch.target_image.clone());
        let mse = tape.mse(out, t)?;
        let weighted = tape.scale(mse, batch.len() as f64 / n as f64)?;
        loss_a = Some(match loss_a {
            None => weighted,
            Some(acc) => tape.add(acc, weighted)?,
        });
        outs.push(out);
        targets.push(t);
        labels_out.extend_from_slice(&batch.class_labels);
    }
    let loss_a = loss_a.expect("at least one part");
    let mut labels = labels_out.clone();
    labels.extend_from_slice(&labels_out);
    let all: Vec<Var> = outs.into_iter().chain(targets).collect();
    let xb = tape.concat(&all)?;
    let logits = net_b.forward(tape, xb, Mode::Train, rng)?;
    let loss_b = tape.softmax_cross_entropy(logits, &labels)?;
    let total = combined_loss(tape, loss_a, loss_b, params)?;
    Ok(SmartVars { loss_a, loss_b, total })
}

fn apply(store: &mut ParamStore, grads: Gradients, opt: &mut SgdNesterov, ids: &[ParamId]) -> Result<()> {
    grads.accumulate_into(store);
    let result = opt.step(store, ids);
    store.zero_grads();
    result
}

fn smart_step<R: Rng + ?Sized>(
    store: &mut ParamStore,
    parts: &mut [(&mut NetworkA, &AugmentBatch)],
    extra_ids: Vec<ParamId>,
    net_b: &mut NetworkB1,
    params: &CombinedLossParams,
    opt: &mut SgdNesterov,
    rng: &mut R,
) -> Result<StepLosses> {
    let (losses, grads) = {
        let mut tape = Tape::new(store);
        let v = smart_forward(&mut tape, parts, net_b, params, rng)?;
        let losses = StepLosses {
            loss_a: Some(tape.value(v.loss_a).item()?),
            loss_b: tape.value(v.loss_b).item()?,
            total: tape.value(v.total).item()?,
        };
        (losses, tape.backward(v.total)?)
    };
    let mut ids = net_b.graph.param_ids();
    ids.extend(extra_ids);
    apply(store, grads, opt, &ids)?;
    Ok(losses)
}

/// One joint update of a single Network A and Network B from the combined loss.
pub fn joint_step<R: Rng + ?Sized>(
    store: &mut ParamStore,
    net_a: &mut NetworkA,
    net_b: &mut NetworkB1,
    batch: &AugmentBatch,
    params: &CombinedLossParams,
    opt: &mut SgdNesterov,
    rng: &mut R,
) -> Result<StepLosses> {
    let ids = net_a.graph.param_ids();
    smart_step(store, &mut [(net_a, batch)], ids, net_b, params, opt, rng)
}

/// Joint update with one Network A per class. Each class's samples go through
/// its own augmenter; `loss_a` is the sample-weighted mean of the per-class MSEs.
pub fn multi_a_step<R: Rng + ?Sized>(
    store: &mut ParamStore,
    augmenters: &mut BTreeMap<usize, NetworkA>,
    net_b: &mut NetworkB1,
    batch: &AugmentBatch,
    params: &CombinedLossParams,
    opt: &mut SgdNesterov,
    rng: &mut R,
) -> Result<StepLosses> {
    let partitions = route_by_class(batch, augmenters)?;
    let ids: Vec<ParamId> = augmenters.values().flat_map(|a| a.graph.param_ids()).collect();
    let mut parts: Vec<(&mut NetworkA, &AugmentBatch)> = Vec::with_capacity(partitions.len());
    let mut remaining: Vec<(&usize, &mut NetworkA)> = augmenters.iter_mut().collect();
    for p in &partitions {
        let pos = remaining
            .iter()
            .position(|(c, _)| **c == p.class_label)
            .expect("route_by_class checked every class");
        let (_, net) = remaining.swap_remove(pos);
        parts.push((net, &p.batch));
    }
    smart_step(store, &mut parts, ids, net_b, params, opt, rng)
}

/// Losses of a joint forward pass without any update.
pub fn joint_losses<R: Rng + ?Sized>(
    store: &ParamStore,
    net_a: &mut NetworkA,
    net_b: &mut NetworkB1,
    batch: &AugmentBatch,
    params: &CombinedLossParams,
    rng: &mut R,
) -> Result<StepLosses> {
    let mut tape = Tape::new(store);
    let v = smart_forward(&mut tape, &mut [(net_a, batch)], net_b, params, rng)?;
    Ok(StepLosses {
        loss_a: Some(tape.value(v.loss_a).item()?),
        loss_b: tape.value(v.loss_b).item()?,
        total: tape.value(v.total).item()?,
    })
}

/// Plain supervised update of Network B.
pub fn baseline_step<R: Rng + ?Sized>(
    store: &mut ParamStore,
    net_b: &mut NetworkB1,
    images: &Tensor,
    labels: &[usize],
    opt: &mut SgdNesterov,
    rng: &mut R,
) -> Result<f64> {
    let (loss, grads) = {
        let mut tape = Tape::new(store);
        let x = tape.input(images.clone());
        let logits = net_b.forward(&mut tape, x, Mode::Train, rng)?;
        let loss = tape.softmax_cross_entropy(logits, labels)?;
        (tape.value(loss).item()?, tape.backward(loss)?)
    };
    apply(store, grads, opt, &net_b.graph.param_ids())?;
    Ok(loss)
}

const EVAL_BATCH: usize = 100;

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in row.iter().enumerate() {
        if *v > row[best] {
            best = i;
        }
    }
    best
}

/// Cross-entropy and accuracy of Network B in inference mode. Network A is
/// not involved.
pub fn validate(store: &ParamStore, net_b: &mut NetworkB1, dataset: &Dataset) -> Result<Evaluation> {
    if dataset.is_empty() {
        return Err(Error::Data("cannot evaluate on an empty dataset".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let k = net_b.num_classes();
    let (mut loss_sum, mut correct) = (0.0, 0usize);
    let indices: Vec<usize> = (0..dataset.len()).collect();
    for chunk in indices.chunks(EVAL_BATCH) {
        let (images, labels) = dataset.batch(chunk)?;
        let mut tape = Tape::new(store);
        let x = tape.input(images);
        let logits = net_b.forward(&mut tape, x, Mode::Infer, &mut rng)?;
        let loss = tape.softmax_cross_entropy(logits, &labels)?;
        loss_sum += tape.value(loss).item()? * chunk.len() as f64;
        correct += tape
            .value(logits)
            .data()
            .chunks(k)
            .zip(&labels)
            .filter(|(row, &l)| argmax(row) == l)
            .count();
    }
    Ok(Evaluation {
        loss: loss_sum / dataset.len() as f64,
        accuracy: correct as f64 / dataset.len() as f64,
    })
}
