//! Adaptive active learning at desk scale.
//!
//! The crate implements an iterative add/delete acquisition loop over a
//! labeled/unlabeled sample pool: each round a committee of small models is
//! retrained on the labeled pool, every unlabeled candidate is scored by a
//! configurable policy, the top batch is labeled by a simulated oracle, and
//! the worst-scoring labeled samples are returned to the pool. Trajectory
//! logs feed coverage/accuracy metrics and post-hoc analyses (ranked
//! exploration grids, deletion-origin graphs, label-distribution shift).
//!
//! Everything is deterministic per seed: runs with equal configuration
//! reproduce their logs exactly.

pub mod analysis;
pub mod datasets;
pub mod engine;
pub mod error;
pub mod learners;
pub mod metrics;
pub mod policies;
pub mod pool;
pub mod seed;

pub use error::{Error, Result};
