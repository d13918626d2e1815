//! Property tests for the pool partition: invariants hold under arbitrary
//! valid op sequences, checked against an independent set-based model.

use std::collections::BTreeSet;

use proptest::prelude::*;

use aal_core::pool::{PoolState, SampleId};
use aal_core::seed::{mix_seed, rng_for};
use rand::seq::index::sample as index_sample;

#[derive(Debug, Clone)]
enum Op {
    Add { seed: u64, count: usize },
    Delete { seed: u64, count: usize },
    Advance,
}

fn op_strategy() -> impl Strategy<Value = Op> {
    prop_oneof![
        (any::<u64>(), 0usize..12).prop_map(|(seed, count)| Op::Add { seed, count }),
        (any::<u64>(), 0usize..12).prop_map(|(seed, count)| Op::Delete { seed, count }),
        Just(Op::Advance),
    ]
}

/// Pick `count` ids uniformly from a set, deterministically per seed.
fn pick(from: &[SampleId], count: usize, seed: u64) -> BTreeSet<SampleId> {
    let count = count.min(from.len());
    if count == 0 {
        return BTreeSet::new();
    }
    let mut rng = rng_for(seed, 99, 0);
    index_sample(&mut rng, from.len(), count)
        .into_iter()
        .map(|i| from[i])
        .collect()
}

/// Independent model: two plain sets.
#[derive(Debug, Clone)]
struct Model {
    labeled: BTreeSet<SampleId>,
    unlabeled: BTreeSet<SampleId>,
}

fn check_against_model(pool: &PoolState, model: &Model, size: usize) {
    let labeled: BTreeSet<SampleId> = pool.labeled_ids().into_iter().collect();
    let unlabeled: BTreeSet<SampleId> = pool.unlabeled_ids().into_iter().collect();
    assert_eq!(labeled, model.labeled);
    assert_eq!(unlabeled, model.unlabeled);
    // disjoint and covering
    assert!(labeled.is_disjoint(&unlabeled));
    assert_eq!(labeled.len() + unlabeled.len(), size);
    // no duplicates in the ordered view
    assert_eq!(pool.labeled_ids().len(), labeled.len());
    // timestamps never exceed the current iteration
    for id in &labeled {
        assert!(pool.added_at(*id).unwrap() <= pool.iteration());
    }
}

proptest! {
    #[test]
    fn invariants_hold_over_random_op_sequences(
        size in 1usize..60,
        m0_frac in 0.0f64..1.0,
        init_seed in any::<u64>(),
        ops in proptest::collection::vec(op_strategy(), 0..40),
    ) {
        let m0 = ((size as f64 * m0_frac) as usize).clamp(1, size);
        let mut pool = PoolState::init(size, m0, init_seed).unwrap();
        let mut model = Model {
            labeled: pool.labeled_ids().into_iter().collect(),
            unlabeled: pool.unlabeled_ids().into_iter().collect(),
        };
        prop_assert_eq!(model.labeled.len(), m0);
        check_against_model(&pool, &model, size);

        for op in ops {
            match op {
                Op::Add { seed, count } => {
                    let from: Vec<SampleId> = model.unlabeled.iter().copied().collect();
                    let batch = pick(&from, count, seed);
                    pool.add_batch(&batch).unwrap();
                    for id in &batch {
                        model.unlabeled.remove(id);
                        model.labeled.insert(*id);
                    }
                }
                Op::Delete { seed, count } => {
                    let from: Vec<SampleId> = model.labeled.iter().copied().collect();
                    let batch = pick(&from, count, seed);
                    pool.delete_batch(&batch).unwrap();
                    for id in &batch {
                        model.labeled.remove(id);
                        model.unlabeled.insert(*id);
                    }
                }
                Op::Advance => {
                    pool.advance_iteration();
                }
            }
            check_against_model(&pool, &model, size);
        }
    }

    #[test]
    fn add_then_delete_same_batch_is_identity_on_partition(
        size in 2usize..50,
        m0_frac in 0.0f64..1.0,
        seed in any::<u64>(),
        count in 1usize..10,
    ) {
        let m0 = ((size as f64 * m0_frac) as usize).clamp(1, size);
        let mut pool = PoolState::init(size, m0, seed).unwrap();
        let before_labeled = pool.labeled_ids();
        let before_unlabeled = pool.unlabeled_ids();

        let batch = pick(&before_unlabeled, count, mix_seed(seed, 1, 0));
        if batch.is_empty() {
            return Ok(());
        }
        pool.advance_iteration();
        pool.add_batch(&batch).unwrap();
        pool.delete_batch(&batch).unwrap();

        prop_assert_eq!(pool.labeled_ids(), before_labeled);
        prop_assert_eq!(pool.unlabeled_ids(), before_unlabeled);
    }

    #[test]
    fn pool_size_law(
        size in 20usize..200,
        m0 in 1usize..10,
        n_add in 1usize..8,
        n_del_frac in 0.0f64..1.0,
        seed in any::<u64>(),
    ) {
        // engine-shaped alternation: add n_add, delete n_del each iteration
        let n_del = ((n_add as f64 - 1.0) * n_del_frac) as usize;
        let mut pool = PoolState::init(size, m0, seed).unwrap();
        for t in 1..=12u32 {
            if pool.unlabeled_len() < n_add {
                break;
            }
            pool.advance_iteration();
            let unlabeled = pool.unlabeled_ids();
            let add = pick(&unlabeled, n_add, mix_seed(seed, 2, t as u64));
            pool.add_batch(&add).unwrap();
            if n_del > 0 && n_del < pool.labeled_len() {
                let labeled = pool.labeled_ids();
                let del = pick(&labeled, n_del, mix_seed(seed, 3, t as u64));
                pool.delete_batch(&del).unwrap();
            }
            let expected = m0 + t as usize * (n_add - n_del);
            prop_assert_eq!(pool.labeled_len(), expected);
        }
    }
}

#[test]
fn snapshot_round_trip_shape() {
    let pool = PoolState::init(30, 7, 123).unwrap();
    let snapshot = pool.snapshot();
    let mut lines = snapshot.lines();
    assert_eq!(lines.next(), Some("# iteration=0"));
    let mut seen = 0;
    for line in lines {
        let (id, added) = line.split_once('\t').expect("tab-separated");
        let id: usize = id.parse().unwrap();
        let added: u32 = added.parse().unwrap();
        assert!(id < 30);
        assert_eq!(added, 0);
        seen += 1;
    }
    assert_eq!(seen, 7);
}
