//! Labeled/unlabeled pool partition and the simulated labeling oracle.
//!
//! The pool owns sample identity and the acquisition/deletion bookkeeping.
//! All mutations happen on one control thread; snapshots are plain values
//! that can be cloned and shared read-only with scoring workers.

use std::collections::BTreeSet;
use std::fmt;

use rand::seq::index::sample as index_sample;

use crate::datasets::Dataset;
use crate::error::{Error, Result};
use crate::seed::{rng_for, STREAM_POOL_INIT};

/// Stable index of a sample within its dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
#[serde(transparent)]
pub struct SampleId(pub usize);

impl fmt::Display for SampleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// A label revealed by the oracle for one sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabelRecord {
    pub sample: SampleId,
    pub value: crate::datasets::LabelValue,
}

/// One deletion event, kept for the origin analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DeletionRecord {
    /// Iteration at which the sample was deleted.
    pub iteration: u32,
    pub sample: SampleId,
    /// Iteration at which the deleted sample had been added.
    pub added_at: u32,
}

/// Partition of a dataset into labeled and unlabeled sample ids.
#[derive(Debug, Clone, PartialEq)]
pub struct PoolState {
    /// `added_at[id] = Some(t)` iff the sample is labeled, added at iteration t.
    added_at: Vec<Option<u32>>,
    /// Labeled ids in insertion order.
    labeled_order: Vec<SampleId>,
    iteration: u32,
    deletions: Vec<DeletionRecord>,
}

impl PoolState {
    /// Fully unlabeled pool at iteration 0.
    pub fn empty(dataset_size: usize) -> Self {
        Self {
            added_at: vec![None; dataset_size],
            labeled_order: Vec::new(),
            iteration: 0,
            deletions: Vec::new(),
        }
    }

    /// Label `m0` uniformly-random ids (added at iteration 0), deterministic
    /// per seed.
    pub fn init(dataset_size: usize, m0: usize, rng_seed: u64) -> Result<Self> {
        if m0 == 0 {
            return Err(Error::InvalidConfig(
                "m0 must be >= 1: cold start requires a nonempty first batch".into(),
            ));
        }
        if m0 > dataset_size {
            return Err(Error::InvalidConfig(format!(
                "m0 = {m0} exceeds dataset size {dataset_size}"
            )));
        }
        let mut rng = rng_for(rng_seed, STREAM_POOL_INIT, 0);
        let mut chosen: Vec<usize> = index_sample(&mut rng, dataset_size, m0).into_vec();
        chosen.sort_unstable();

        let mut pool = Self::empty(dataset_size);
        for id in chosen {
            pool.added_at[id] = Some(0);
            pool.labeled_order.push(SampleId(id));
        }
        Ok(pool)
    }

    pub fn size(&self) -> usize {
        self.added_at.len()
    }

    pub fn iteration(&self) -> u32 {
        self.iteration
    }

    /// Bump the iteration counter; subsequent additions are stamped with the
    /// new value.
    pub fn advance_iteration(&mut self) -> u32 {
        self.iteration += 1;
        self.iteration
    }

    pub fn labeled_len(&self) -> usize {
        self.labeled_order.len()
    }

    pub fn unlabeled_len(&self) -> usize {
        self.size() - self.labeled_len()
    }

    pub fn is_labeled(&self, id: SampleId) -> bool {
        self.added_at.get(id.0).is_some_and(|e| e.is_some())
    }

    /// Iteration at which a labeled sample was (most recently) added.
    pub fn added_at(&self, id: SampleId) -> Option<u32> {
        self.added_at.get(id.0).copied().flatten()
    }

    /// Labeled ids in ascending order.
    pub fn labeled_ids(&self) -> Vec<SampleId> {
        let mut ids: Vec<SampleId> = self.labeled_order.clone();
        ids.sort_unstable();
        ids
    }

    /// Labeled entries `(id, added_at)` in insertion order.
    pub fn labeled_in_order(&self) -> Vec<(SampleId, u32)> {
        self.labeled_order
            .iter()
            .map(|&id| (id, self.added_at[id.0].expect("labeled id has added_at")))
            .collect()
    }

    /// Unlabeled ids in ascending order.
    pub fn unlabeled_ids(&self) -> Vec<SampleId> {
        self.added_at
            .iter()
            .enumerate()
            .filter(|(_, e)| e.is_none())
            .map(|(id, _)| SampleId(id))
            .collect()
    }

    pub fn deletions(&self) -> &[DeletionRecord] {
        &self.deletions
    }

    /// Move a batch from unlabeled to labeled, stamped with the current
    /// iteration. The whole batch is validated before any mutation.
    pub fn add_batch(&mut self, batch: &BTreeSet<SampleId>) -> Result<()> {
        for &id in batch {
            if id.0 >= self.size() {
                return Err(Error::UnknownSample(id));
            }
            if self.added_at[id.0].is_some() {
                return Err(Error::Precondition(format!(
                    "sample {id} is already labeled"
                )));
            }
        }
        for &id in batch {
            self.added_at[id.0] = Some(self.iteration);
            self.labeled_order.push(id);
        }
        Ok(())
    }

    /// Return a batch of labeled samples to the unlabeled pool, recording
    /// each deletion event. Deleted ids become eligible for re-addition.
    pub fn delete_batch(&mut self, batch: &BTreeSet<SampleId>) -> Result<()> {
        for &id in batch {
            if id.0 >= self.size() {
                return Err(Error::UnknownSample(id));
            }
            if self.added_at[id.0].is_none() {
                return Err(Error::Precondition(format!("sample {id} is not labeled")));
            }
        }
        for &id in batch {
            let added = self.added_at[id.0].take().expect("checked above");
            self.deletions.push(DeletionRecord {
                iteration: self.iteration,
                sample: id,
                added_at: added,
            });
        }
        self.labeled_order.retain(|id| !batch.contains(id));
        Ok(())
    }

    /// Line-oriented snapshot: header `# iteration=<t>`, then one
    /// `sample_id<TAB>added_at_iteration` line per labeled sample in
    /// insertion order.
    pub fn snapshot(&self) -> String {
        let mut out = format!("# iteration={}\n", self.iteration);
        for (id, added) in self.labeled_in_order() {
            out.push_str(&format!("{}\t{}\n", id, added));
        }
        out
    }
}

/// Reveal ground-truth labels for a batch; pure lookup, no pool side effects.
/// Records are returned in ascending id order.
pub fn query_labels(dataset: &Dataset, batch: &BTreeSet<SampleId>) -> Result<Vec<LabelRecord>> {
    batch
        .iter()
        .map(|&id| {
            Ok(LabelRecord {
                sample: id,
                value: dataset.label(id.0)?,
            })
        })
        .collect()
}
