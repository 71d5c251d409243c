use rand::Rng;

use crate::data::Dataset;
use crate::engine::Tensor;
use crate::error::{Error, Result};

/// Picks `k` source indices and one distinct target index, uniformly and
/// without replacement, from the members of a class.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Selection {
    pub sources: Vec<usize>,
    pub target: usize,
}

impl Selection {
    /// The `k + 1` dataset indices, target last.
    pub fn indices(&self) -> Vec<usize> {
        let mut all = self.sources.clone();
        all.push(self.target);
        all
    }
}

/// `members` are the dataset indices of class `class_label`.
pub fn select_samples<R: Rng + ?Sized>(members: &[usize], class_label: usize, k: usize, rng: &mut R) -> Result<Selection> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    if members.len() < k + 1 {
        return Err(Error::Data(format!(
            "class {class_label} has {} samples but k = {k} needs at least {}",
            members.len(),
            k + 1
        )));
    }
    let picked = rand::seq::index::sample(rng, members.len(), k + 1);
    let mut chosen: Vec<usize> = picked.iter().map(|i| members[i]).collect();
    let target = chosen.pop().expect("k + 1 >= 2 entries");
    Ok(Selection {
        sources: chosen,
        target,
    })
}

/// Stacks `k` images of shape `[c, h, w]` into one `[k·c, h, w]` tensor;
/// channels `i·c .. (i+1)·c` hold source `i`.
pub fn pack_channels(sources: &[&Tensor]) -> Result<Tensor> {
    let first = sources.first().ok_or_else(|| Error::shape("pack_channels", "no sources"))?;
    let s = first.shape();
    if s.len() != 3 {
        return Err(Error::shape("pack_channels", format!("sources must be [c,h,w], got {s:?}")));
    }
    let mut data = Vec::with_capacity(first.numel() * sources.len());
    for (i, src) in sources.iter().enumerate() {
        if src.shape() != s {
            return Err(Error::shape(
                "pack_channels",
                format!("source {i} is {:?}, source 0 is {s:?}", src.shape()),
            ));
        }
        data.extend_from_slice(src.data());
    }
    Tensor::new(vec![s[0] * sources.len(), s[1], s[2]], data)
}

/// Inverse of [`pack_channels`].
pub fn unpack_channels(packed: &Tensor, k: usize) -> Result<Vec<Tensor>> {
    let s = packed.shape();
    if s.len() != 3 || k == 0 || s[0] % k != 0 {
        return Err(Error::shape("unpack_channels", format!("{s:?} is not {k} equal channel blocks")));
    }
    let c = s[0] / k;
    let block = c * s[1] * s[2];
    packed
        .data()
        .chunks(block)
        .map(|chunk| Tensor::new(vec![c, s[1], s[2]], chunk.to_vec()))
        .collect()
}

/// Network A inputs for a batch: packed sources, held-out targets and labels.
#[derive(Clone, Debug, PartialEq)]
pub struct AugmentBatch {
    /// `[n, k·c, h, w]`
    pub packed_input: Tensor,
    /// `[n, c, h, w]`
    pub target_image: Tensor,
    pub class_labels: Vec<usize>,
    /// Per sample, the `k` source indices followed by the target index.
    pub source_indices: Vec<Vec<usize>>,
}

impl AugmentBatch {
    /// One sample per entry of `classes`, each drawn by [`select_samples`].
    pub fn assemble<R: Rng + ?Sized>(dataset: &Dataset, by_class: &[Vec<usize>], classes: &[usize], k: usize, rng: &mut R) -> Result<Self> {
        let mut packed = Vec::with_capacity(classes.len());
        let mut targets = Vec::with_capacity(classes.len());
        let mut source_indices = Vec::with_capacity(classes.len());
        for &class in classes {
            let members = by_class
                .get(class)
                .ok_or_else(|| Error::Data(format!("class {class} not present in dataset")))?;
            let sel = select_samples(members, class, k, rng)?;
            let imgs: Vec<&Tensor> = sel.sources.iter().map(|&i| &dataset.sample(i).image).collect();
            packed.push(pack_channels(&imgs)?);
            targets.push(dataset.sample(sel.target).image.clone());
            source_indices.push(sel.indices());
        }
        Ok(Self {
            packed_input: Tensor::stack(&packed)?,
            target_image: Tensor::stack(&targets)?,
            class_labels: classes.to_vec(),
            source_indices,
        })
    }

    pub fn len(&self) -> usize {
        self.class_labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.class_labels.is_empty()
    }

    /// Number of packed sources per sample.
    pub fn k(&self) -> usize {
        self.source_indices.first().map_or(0, |s| s.len() - 1)
    }

    /// Sub-batch holding the given positions, in that order.
    pub fn select(&self, positions: &[usize]) -> Result<AugmentBatch> {
        let take = |t: &Tensor| -> Result<Tensor> {
            let parts = positions.iter().map(|&p| t.sample(p)).collect::<Result<Vec<_>>>()?;
            Tensor::stack(&parts)
        };
        Ok(AugmentBatch {
            packed_input: take(&self.packed_input)?,
            target_image: take(&self.target_image)?,
            class_labels: positions.iter().map(|&p| self.class_labels[p]).collect(),
            source_indices: positions.iter().map(|&p| self.source_indices[p].clone()).collect(),
        })
    }
}
