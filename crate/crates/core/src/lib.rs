//! A desk-scale laboratory for batch-construction augmentation.
//!
//! Training batches are built in three stages: *pairing* sorts the current
//! batch by per-sample L2 error and matches the easiest sample with the
//! hardest; *mixing* forms convex combinations of each pair (features and
//! soft labels alike); *feeding* carries the mixed half into the next
//! iteration and tops it up with fresh dataset samples at ratio γ. Mixed
//! samples therefore persist across iterations with geometrically decaying
//! weight, which the [`pipeline`] module makes observable through per-sample
//! lineage tracking.
//!
//! The crate ships everything needed to compare that construction against
//! plain batches, mixup and SamplePairing under identical conditions:
//!
//! - [`dataset`]: IDX parsing (Fashion-MNIST files, optionally gzipped), a
//!   deterministic synthetic blob corpus, stratified subsetting, and
//!   epoch-shuffled sample streams.
//! - [`pipeline`]: pairing, mixing, feeding, and the SamplePairing baseline.
//! - [`model`]: a two-layer MLP with hand-written backpropagation,
//!   soft-label cross-entropy, and SGD with momentum and weight decay.
//! - [`harness`]: the experiment runner behind the `batchboost` CLI, with
//!   CSV metrics, PGM grid dumps of mixed batches, and multi-seed method
//!   comparisons.
//!
//! Every run is a pure function of its config: RNG streams are derived from
//! the experiment seed per role, so repeated runs produce byte-identical
//! metrics files.

pub mod dataset;
pub mod distr;
pub mod harness;
pub mod matrix;
pub mod model;
pub mod pipeline;

pub use dataset::{DatasetView, EpochSampler, RawDataset, Split};
pub use harness::{
    compare, run_experiment, Comparison, DatasetKind, ExperimentConfig, HarnessError, Method,
    MethodSummary, MetricsRow, RunReport,
};
pub use matrix::Matrix;
pub use model::{Gradients, MlpParams, OptimizerState};
pub use pipeline::{FeederState, LambdaMode, Lineage, Pair, PairingStrategy, Sample};
