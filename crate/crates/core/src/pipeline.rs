//! The batch-construction core: per-sample errors, easiest-with-hardest
//! pairing, convex mixing, and the feed-batch state machine that carries
//! mixed samples from one iteration into the next.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::dataset::{DatasetView, EpochSampler};
use crate::distr::beta;
use crate::matrix::Matrix;

/// Origin-id → convex weight. Traces a mixed sample back to the fresh
/// dataset samples it is composed of; a `BTreeMap` so iteration order (and
/// therefore every downstream byte) is deterministic.
pub type Lineage = BTreeMap<usize, f64>;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("too many pairs: requested {requested}, but at most {max} fit in {n} samples")]
    TooManyPairs {
        requested: usize,
        max: usize,
        n: usize,
    },
    #[error("lambda {0} outside [0, 1]")]
    LambdaOutOfRange(f64),
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("feeder is not bootstrapped")]
    NotBootstrapped,
    #[error("feeder is already bootstrapped")]
    AlreadyBootstrapped,
    #[error("size mismatch: {0}")]
    SizeMismatch(String),
}

/// One training sample: features, a soft label on the simplex, and the
/// bookkeeping that makes information decay across generations observable.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub features: Vec<f64>,
    pub label: Vec<f64>,
    /// Generations since all-fresh ancestry; 0 means straight from the dataset.
    pub age: u32,
    /// Convex weights over fresh origins. Empty when tracking is disabled.
    pub lineage: Lineage,
}

impl Sample {
    /// A fresh dataset sample: age 0, lineage `{origin: 1.0}`.
    pub fn fresh(origin: usize, features: Vec<f64>, label: Vec<f64>) -> Self {
        let mut lineage = Lineage::new();
        lineage.insert(origin, 1.0);
        Sample {
            features,
            label,
            age: 0,
            lineage,
        }
    }

    /// The sole origin of a fresh sample, `None` once mixed.
    pub fn origin(&self) -> Option<usize> {
        if self.age == 0 && self.lineage.len() == 1 {
            self.lineage.keys().next().copied()
        } else {
            None
        }
    }

    pub fn max_lineage_weight(&self) -> f64 {
        self.lineage.values().fold(0.0, |m, &w| m.max(w))
    }
}

/// How pairs are chosen for mixing.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PairingStrategy {
    /// Sort by per-sample error (ties by index) and fold the ends together:
    /// easiest with hardest, second-easiest with second-hardest, and so on.
    ErrorSorted,
    /// Disjoint pairs from a uniform random permutation.
    Random,
}

/// Whether one mixing coefficient is drawn per constructed batch or one per
/// pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LambdaMode {
    PerBatch,
    PerPair,
}

impl std::str::FromStr for LambdaMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "per-batch" => Ok(LambdaMode::PerBatch),
            "per-pair" => Ok(LambdaMode::PerPair),
            other => Err(format!("unknown lambda mode `{other}` (per-batch|per-pair)")),
        }
    }
}

impl std::fmt::Display for LambdaMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LambdaMode::PerBatch => write!(f, "per-batch"),
            LambdaMode::PerPair => write!(f, "per-pair"),
        }
    }
}

/// An index pair selected for mixing, with its coefficient.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pair {
    pub i: usize,
    pub j: usize,
    pub lambda: f64,
}

/// Euclidean distance between each label row and the matching prediction
/// row. For rows on the simplex every value lands in `[0, sqrt(2)]`.
pub fn per_sample_error(
    predictions: &Matrix,
    labels: &Matrix,
) -> Result<Vec<f64>, PipelineError> {
    if predictions.rows() != labels.rows() || predictions.cols() != labels.cols() {
        return Err(PipelineError::ShapeMismatch(format!(
            "predictions {}x{} vs labels {}x{}",
            predictions.rows(),
            predictions.cols(),
            labels.rows(),
            labels.cols()
        )));
    }
    Ok((0..predictions.rows())
        .map(|n| {
            labels
                .row(n)
                .iter()
                .zip(predictions.row(n))
                .map(|(y, p)| (y - p) * (y - p))
                .sum::<f64>()
                .sqrt()
        })
        .collect())
}

/// Select `k` disjoint index pairs over `errors.len()` samples.
///
/// `ErrorSorted` sorts indices by ascending error (ties by ascending index)
/// and returns `(s[t], s[N-1-t])`, so each pair is (easier, harder).
pub fn pair_by_error<R: Rng + ?Sized>(
    errors: &[f64],
    strategy: PairingStrategy,
    rng: &mut R,
    k: usize,
) -> Result<Vec<(usize, usize)>, PipelineError> {
    let n = errors.len();
    if k > n / 2 {
        return Err(PipelineError::TooManyPairs {
            requested: k,
            max: n / 2,
            n,
        });
    }
    match strategy {
        PairingStrategy::ErrorSorted => {
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_unstable_by(|&a, &b| errors[a].total_cmp(&errors[b]).then(a.cmp(&b)));
            Ok((0..k).map(|t| (order[t], order[n - 1 - t])).collect())
        }
        PairingStrategy::Random => {
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(rng);
            Ok((0..k).map(|t| (perm[2 * t], perm[2 * t + 1])).collect())
        }
    }
}

/// Draw a mixing coefficient from Beta(alpha, alpha).
pub fn sample_lambda<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> Result<f64, PipelineError> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(PipelineError::InvalidParam(format!(
            "alpha {alpha} must be finite and > 0"
        )));
    }
    Ok(beta(alpha, alpha, rng))
}

/// Convex combination of two samples: features, labels and lineage all mixed
/// with the same coefficient, age bumped past the older parent.
pub fn mix_pair(a: &Sample, b: &Sample, lambda: f64) -> Result<Sample, PipelineError> {
    if a.features.len() != b.features.len() || a.label.len() != b.label.len() {
        return Err(PipelineError::ShapeMismatch(format!(
            "features {} vs {}, labels {} vs {}",
            a.features.len(),
            b.features.len(),
            a.label.len(),
            b.label.len()
        )));
    }
    if !(0.0..=1.0).contains(&lambda) {
        return Err(PipelineError::LambdaOutOfRange(lambda));
    }
    let mu = 1.0 - lambda;
    let features = a
        .features
        .iter()
        .zip(&b.features)
        .map(|(x, y)| lambda * x + mu * y)
        .collect();
    let label = a
        .label
        .iter()
        .zip(&b.label)
        .map(|(x, y)| lambda * x + mu * y)
        .collect();
    let mut lineage = Lineage::new();
    for (&o, &w) in &a.lineage {
        let w = lambda * w;
        if w > 0.0 {
            lineage.insert(o, w);
        }
    }
    for (&o, &w) in &b.lineage {
        let w = mu * w;
        if w > 0.0 {
            *lineage.entry(o).or_insert(0.0) += w;
        }
    }
    Ok(Sample {
        features,
        label,
        age: 1 + a.age.max(b.age),
        lineage,
    })
}

/// The cross-iteration state of the feeding stage: the carried feed-batch,
/// the batch geometry, and the RNG all λ draws and random pairings come from.
#[derive(Clone, Debug)]
pub struct FeederState {
    feed_batch: Vec<Sample>,
    batch_size: usize,
    gamma: f64,
    alpha: f64,
    lambda_mode: LambdaMode,
    lambda_override: Option<f64>,
    track_lineage: bool,
    rng: ChaCha8Rng,
    bootstrapped: bool,
}

impl FeederState {
    pub fn new(
        batch_size: usize,
        gamma: f64,
        alpha: f64,
        lambda_mode: LambdaMode,
        seed: u64,
    ) -> Result<Self, PipelineError> {
        if batch_size < 2 || !batch_size.is_multiple_of(2) {
            return Err(PipelineError::InvalidParam(format!(
                "batch_size {batch_size} must be even and >= 2"
            )));
        }
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(PipelineError::InvalidParam(format!(
                "gamma {gamma} must be finite and > 0"
            )));
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(PipelineError::InvalidParam(format!(
                "alpha {alpha} must be finite and > 0"
            )));
        }
        Ok(FeederState {
            feed_batch: Vec::new(),
            batch_size,
            gamma,
            alpha,
            lambda_mode,
            lambda_override: None,
            track_lineage: true,
            rng: ChaCha8Rng::seed_from_u64(seed),
            bootstrapped: false,
        })
    }

    /// Pin λ to a constant instead of drawing from Beta(alpha, alpha).
    pub fn set_lambda_override(&mut self, lambda: Option<f64>) -> Result<(), PipelineError> {
        if let Some(l) = lambda {
            if !(0.0..=1.0).contains(&l) {
                return Err(PipelineError::LambdaOutOfRange(l));
            }
        }
        self.lambda_override = lambda;
        Ok(())
    }

    /// Lineage tracking is observational; disabling it must not change any
    /// produced feature or label.
    pub fn set_track_lineage(&mut self, on: bool) {
        self.track_lineage = on;
    }

    pub fn batch_size(&self) -> usize {
        self.batch_size
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn is_bootstrapped(&self) -> bool {
        self.bootstrapped
    }

    /// The feed half carried into the next batch; empty before bootstrap.
    pub fn feed_batch(&self) -> &[Sample] {
        &self.feed_batch
    }

    /// Fresh samples per constructed batch: `round(B·γ / (1 + γ))`,
    /// round-half-up. With γ=1 this is exactly B/2.
    pub fn half_count(&self) -> usize {
        (self.batch_size as f64 * self.gamma / (1.0 + self.gamma)).round() as usize
    }

    /// Mixed samples per constructed batch: `B − half_count`.
    pub fn feed_count(&self) -> usize {
        self.batch_size - self.half_count()
    }

    fn draw_lambda(&mut self) -> Result<f64, PipelineError> {
        match self.lambda_override {
            Some(l) => Ok(l),
            None => sample_lambda(self.alpha, &mut self.rng),
        }
    }

    /// Iteration zero: an all-fresh batch of size B.
    pub fn bootstrap(
        &mut self,
        sampler: &mut EpochSampler,
        view: &DatasetView,
    ) -> Result<Vec<Sample>, PipelineError> {
        if self.bootstrapped {
            return Err(PipelineError::AlreadyBootstrapped);
        }
        self.bootstrapped = true;
        self.feed_batch.clear();
        Ok(sampler.next_fresh(view, self.batch_size))
    }

    /// Construct the next training batch from the current one: pair by
    /// error, mix the pairs into the new feed-batch, top up with fresh
    /// samples. Output order is fixed: feed-batch first, then half-batch.
    pub fn next_batch(
        &mut self,
        current: &[Sample],
        errors: &[f64],
        strategy: PairingStrategy,
        sampler: &mut EpochSampler,
        view: &DatasetView,
    ) -> Result<Vec<Sample>, PipelineError> {
        if !self.bootstrapped {
            return Err(PipelineError::NotBootstrapped);
        }
        if current.len() != self.batch_size {
            return Err(PipelineError::SizeMismatch(format!(
                "current batch has {} samples, feeder expects {}",
                current.len(),
                self.batch_size
            )));
        }
        if errors.len() != self.batch_size {
            return Err(PipelineError::SizeMismatch(format!(
                "{} errors for {} samples",
                errors.len(),
                self.batch_size
            )));
        }

        let k = self.feed_count();
        let batch_lambda = match self.lambda_mode {
            LambdaMode::PerBatch => Some(self.draw_lambda()?),
            LambdaMode::PerPair => None,
        };
        let mut pairs = Vec::with_capacity(k);
        for (i, j) in pair_by_error(errors, strategy, &mut self.rng, k)? {
            let lambda = match batch_lambda {
                Some(l) => l,
                None => self.draw_lambda()?,
            };
            pairs.push(Pair { i, j, lambda });
        }

        let mut feed = Vec::with_capacity(k);
        for p in &pairs {
            let mut mixed = mix_pair(&current[p.i], &current[p.j], p.lambda)?;
            if !self.track_lineage {
                mixed.lineage.clear();
            }
            feed.push(mixed);
        }

        let fresh = sampler.next_fresh(view, self.half_count());
        self.feed_batch = feed.clone();
        feed.extend(fresh);
        Ok(feed)
    }
}

/// One SamplePairing batch: B fresh samples, each averaged 50/50 with a
/// uniformly chosen partner from the dataset, keeping the first sample's
/// one-hot label.
pub fn samplepairing_batch<R: Rng + ?Sized>(
    sampler: &mut EpochSampler,
    view: &DatasetView,
    batch_size: usize,
    rng: &mut R,
) -> Result<Vec<Sample>, PipelineError> {
    if batch_size < 2 {
        return Err(PipelineError::InvalidParam(format!(
            "batch_size {batch_size} must be >= 2"
        )));
    }
    let fresh = sampler.next_fresh(view, batch_size);
    fresh
        .into_iter()
        .map(|a| {
            let p = rng.random_range(0..view.len());
            let partner = Sample::fresh(
                p,
                view.features().row(p).to_vec(),
                view.labels().row(p).to_vec(),
            );
            let mut mixed = mix_pair(&a, &partner, 0.5)?;
            mixed.label = a.label;
            Ok(mixed)
        })
        .collect()
}
