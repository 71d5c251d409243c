use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::dataset::Dataset;
use crate::error::{Error, Result};

/// Train/validation/test fractions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitSpec {
    pub train_frac: f64,
    pub val_frac: f64,
    pub test_frac: f64,
    pub subject_exclusive: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_frac: 0.7,
            val_frac: 0.2,
            test_frac: 0.1,
            subject_exclusive: false,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        let fracs = [self.train_frac, self.val_frac, self.test_frac];
        if fracs.iter().any(|f| !(0.0..=1.0).contains(f)) {
            return Err(Error::InvalidArgument(format!("split fractions {fracs:?} must lie in [0, 1]")));
        }
        if (fracs.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!("split fractions {fracs:?} must sum to 1")));
        }
        Ok(())
    }

    /// Counts for `units` items: validation and test get `floor(frac · units)`
    /// (at least one each), training gets the remainder.
    fn allocate(&self, units: usize) -> Option<[usize; 3]> {
        let floor = |f: f64| ((f * units as f64) + 1e-9).floor() as usize;
        let val = floor(self.val_frac).max(1);
        let test = floor(self.test_frac).max(1);
        let train = units.checked_sub(val + test)?;
        (train >= 1).then_some([train, val, test])
    }
}

/// Shuffles by `seed` and partitions into (train, validation, test).
///
/// With `subject_exclusive`, whole subjects are allocated so that no subject
/// appears in more than one split.
pub fn split(dataset: &Dataset, spec: &SplitSpec, seed: u64) -> Result<(Dataset, Dataset, Dataset)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let parts: [Vec<usize>; 3] = if spec.subject_exclusive {
        let mut by_subject: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (i, s) in dataset.samples().iter().enumerate() {
            let subject = s
                .subject
                .as_deref()
                .ok_or_else(|| Error::Data(format!("sample {i} has no subject id; subject-exclusive split impossible")))?;
            by_subject.entry(subject).or_default().push(i);
        }
        let mut subjects: Vec<Vec<usize>> = by_subject.into_values().collect();
        subjects.shuffle(&mut rng);
        let counts = spec.allocate(subjects.len()).ok_or_else(|| {
            Error::Data(format!("{} subjects cannot populate train, validation and test", subjects.len()))
        })?;
        let mut it = subjects.into_iter();
        counts.map(|k| it.by_ref().take(k).flatten().collect())
    } else {
        let mut idx: Vec<usize> = (0..dataset.len()).collect();
        idx.shuffle(&mut rng);
        let counts = spec
            .allocate(idx.len())
            .ok_or_else(|| Error::Data(format!("{} samples cannot populate three splits", idx.len())))?;
        let mut it = idx.into_iter();
        counts.map(|k| it.by_ref().take(k).collect())
    };
    let [train, val, test] = parts;
    Ok((dataset.subset(&train)?, dataset.subset(&val)?, dataset.subset(&test)?))
}
