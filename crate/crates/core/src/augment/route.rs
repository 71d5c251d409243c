use std::collections::BTreeMap;

use super::batch::AugmentBatch;
use crate::error::{Error, Result};

/// The samples of one class within a routed batch.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassPartition {
    pub class_label: usize,
    /// Positions of these samples in the original batch, ascending.
    pub positions: Vec<usize>,
    pub batch: AugmentBatch,
}

/// Splits a batch by class label so each class goes through its own augmenter.
/// Partitions come out in ascending class order; order within a class is kept.
pub fn route_by_class<T>(batch: &AugmentBatch, augmenters: &BTreeMap<usize, T>) -> Result<Vec<ClassPartition>> {
    let mut positions: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (pos, &label) in batch.class_labels.iter().enumerate() {
        positions.entry(label).or_default().push(pos);
    }
    if let Some(missing) = positions.keys().find(|c| !augmenters.contains_key(c)) {
        return Err(Error::InvalidArgument(format!("no augmenter network for class {missing}")));
    }
    positions
        .into_iter()
        .map(|(class_label, positions)| {
            Ok(ClassPartition {
                class_label,
                batch: batch.select(&positions)?,
                positions,
            })
        })
        .collect()
}
