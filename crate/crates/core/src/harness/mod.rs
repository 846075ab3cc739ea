//! Experiment runner: wires dataset + pipeline + model for the four batch
//! construction methods, records per-epoch metrics, and aggregates
//! multi-seed comparisons.

mod grid;
mod metrics;

pub use grid::{dump_mixed_grid, parse_manifest, ManifestEntry};
pub use metrics::{
    format_sig, metrics_to_csv, parse_metrics_csv, read_metrics_csv, write_metrics_csv,
    MetricsRow, METRICS_HEADER,
};

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::dataset::{
    load_fashion_mnist, synth_blobs, DatasetError, DatasetView, EpochSampler, Split,
};
use crate::matrix::Matrix;
use crate::model::{
    accuracy, backward, forward, init_params, predict, sgd_step, soft_ce_loss, MlpParams,
    ModelError, OptimizerState,
};
use crate::pipeline::{
    mix_pair, per_sample_error, sample_lambda, samplepairing_batch, FeederState, LambdaMode,
    PairingStrategy, PipelineError, Sample,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
    #[error("malformed file: {0}")]
    MalformedCsv(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Batch construction method under test.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    Baseline,
    Mixup,
    SamplePairing,
    Batchboost,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::Baseline,
        Method::Mixup,
        Method::SamplePairing,
        Method::Batchboost,
    ];
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "baseline" => Ok(Method::Baseline),
            "mixup" => Ok(Method::Mixup),
            "samplepairing" => Ok(Method::SamplePairing),
            "batchboost" => Ok(Method::Batchboost),
            other => Err(format!(
                "unknown method `{other}` (baseline|mixup|samplepairing|batchboost)"
            )),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Method::Baseline => write!(f, "baseline"),
            Method::Mixup => write!(f, "mixup"),
            Method::SamplePairing => write!(f, "samplepairing"),
            Method::Batchboost => write!(f, "batchboost"),
        }
    }
}

/// Which corpus to train on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DatasetKind {
    FashionMnist,
    Blobs,
}

impl std::str::FromStr for DatasetKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fashion-mnist" => Ok(DatasetKind::FashionMnist),
            "blobs" => Ok(DatasetKind::Blobs),
            other => Err(format!("unknown dataset `{other}` (fashion-mnist|blobs)")),
        }
    }
}

impl std::fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DatasetKind::FashionMnist => write!(f, "fashion-mnist"),
            DatasetKind::Blobs => write!(f, "blobs"),
        }
    }
}

/// Synthetic-corpus constants; small enough that a full comparison runs in
/// seconds.
pub const BLOBS_CLASSES: usize = 3;
pub const BLOBS_PER_CLASS: usize = 200;
pub const BLOBS_DIM: usize = 16;
pub const BLOBS_SPREAD: f64 = 0.1;

const HIDDEN_FASHION: usize = 128;
const HIDDEN_BLOBS: usize = 32;

/// Everything a run depends on. `(config, seed)` fully determines the
/// metrics bytes a run produces.
#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub method: Method,
    pub dataset: DatasetKind,
    pub data_dir: PathBuf,
    /// Class-stratified limit on the train split.
    pub limit: Option<usize>,
    pub batch_size: usize,
    pub epochs: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub momentum: f64,
    /// Beta concentration for λ draws.
    pub alpha: f64,
    /// Half-batch to feed-batch ratio; only 1 is a supported regime.
    pub gamma: f64,
    /// Hidden width; `None` picks the per-dataset default (128 / 32).
    pub hidden: Option<usize>,
    pub lambda_mode: LambdaMode,
    pub seed: u64,
    pub metrics_out: Option<PathBuf>,
    pub grid_out: Option<PathBuf>,
    /// Allow γ ≠ 1 (untested regime).
    pub experimental_gamma: bool,
    /// Pin λ to a constant; ablation/testing knob.
    pub fixed_lambda: Option<f64>,
    pub track_lineage: bool,
    /// Record real per-epoch wall time in the CSV. Off by default because it
    /// breaks byte-level reproducibility of the metrics file; timings are
    /// always available in the run report.
    pub wall_clock: bool,
}

impl ExperimentConfig {
    pub fn new(method: Method, dataset: DatasetKind) -> Self {
        ExperimentConfig {
            method,
            dataset,
            data_dir: PathBuf::from("data"),
            limit: None,
            batch_size: 64,
            epochs: 30,
            lr: 0.1,
            weight_decay: 1e-4,
            momentum: 0.9,
            alpha: 0.2,
            gamma: 1.0,
            hidden: None,
            lambda_mode: LambdaMode::PerBatch,
            seed: 0,
            metrics_out: None,
            grid_out: None,
            experimental_gamma: false,
            fixed_lambda: None,
            track_lineage: true,
            wall_clock: false,
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |msg: String| Err(HarnessError::InvalidConfig(msg));
        if self.batch_size < 2 || !self.batch_size.is_multiple_of(2) {
            return bad(format!("batch_size {} must be even and >= 2", self.batch_size));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return bad(format!("gamma {} must be finite and > 0", self.gamma));
        }
        if self.gamma != 1.0 && !self.experimental_gamma {
            return bad(format!(
                "gamma {} is outside the supported regime; pass --experimental-gamma to override",
                self.gamma
            ));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad(format!("alpha {} must be finite and > 0", self.alpha));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return bad(format!("lr {} must be finite and >= 0", self.lr));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad(format!(
                "weight_decay {} must be finite and >= 0",
                self.weight_decay
            ));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad(format!("momentum {} must lie in [0, 1)", self.momentum));
        }
        if let Some(l) = self.fixed_lambda {
            if !(0.0..=1.0).contains(&l) {
                return bad(format!("fixed lambda {l} must lie in [0, 1]"));
            }
        }
        if self.limit == Some(0) {
            return bad("limit must be >= 1 when set".into());
        }
        if self.hidden == Some(0) {
            return bad("hidden width must be >= 1 when set".into());
        }
        Ok(())
    }

    fn hidden_width(&self) -> usize {
        self.hidden.unwrap_or(match self.dataset {
            DatasetKind::FashionMnist => HIDDEN_FASHION,
            DatasetKind::Blobs => HIDDEN_BLOBS,
        })
    }

    /// Every field that must agree for runs to be comparable; method, seed
    /// and output paths are excluded.
    fn shared_key(&self) -> String {
        format!(
            "{}|{}|{:?}|{}|{}|{}|{}|{}|{}|{}|{:?}|{}|{:?}|{}|{}|{}",
            self.dataset,
            self.data_dir.display(),
            self.limit,
            self.batch_size,
            self.epochs,
            self.lr,
            self.weight_decay,
            self.momentum,
            self.alpha,
            self.gamma,
            self.hidden,
            self.lambda_mode,
            self.fixed_lambda,
            self.experimental_gamma,
            self.track_lineage,
            self.wall_clock,
        )
    }
}

/// Summary of one finished run.
#[derive(Clone, Debug)]
pub struct RunReport {
    pub config: ExperimentConfig,
    pub epochs_run: usize,
    pub final_test_accuracy: f64,
    pub best_test_accuracy: f64,
    /// True iff any non-finite train/test loss was observed.
    pub diverged: bool,
    /// Fresh dataset samples drawn from the epoch stream (audit counter).
    pub fresh_samples_drawn: u64,
    /// Real elapsed time; informational, never part of the metrics bytes
    /// unless `wall_clock` is set.
    pub total_wall_ms: u64,
}

impl std::fmt::Display for RunReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "method={} dataset={} seed={} epochs_run={} final_acc={} best_acc={} \
             diverged={} fresh_drawn={} wall_ms={}",
            self.config.method,
            self.config.dataset,
            self.config.seed,
            self.epochs_run,
            format_sig(self.final_test_accuracy, 6),
            format_sig(self.best_test_accuracy, 6),
            self.diverged,
            self.fresh_samples_drawn,
            self.total_wall_ms
        )
    }
}

/// Role tags for deriving independent sub-streams from one experiment seed.
/// Data, parameter and sampler streams deliberately do not depend on the
/// method, so method reductions (e.g. mixup with λ≡1 vs baseline) see
/// identical data.
mod seed_role {
    pub const DATA: u64 = 1;
    pub const PARAMS: u64 = 2;
    pub const SAMPLER: u64 = 3;
    pub const FEEDER: u64 = 4;
    pub const METHOD: u64 = 5;
    pub const LIMIT: u64 = 6;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive the sub-seed for one RNG role from the experiment seed.
pub fn derive_seed(seed: u64, role: u64) -> u64 {
    splitmix64(seed ^ splitmix64(role))
}

fn load_views(config: &ExperimentConfig) -> Result<(DatasetView, DatasetView), HarnessError> {
    match config.dataset {
        DatasetKind::Blobs => {
            let (mut train, test) = synth_blobs(
                BLOBS_CLASSES,
                BLOBS_PER_CLASS,
                BLOBS_DIM,
                BLOBS_SPREAD,
                derive_seed(config.seed, seed_role::DATA),
            )?;
            if let Some(limit) = config.limit {
                train = train.stratified_subset(limit, derive_seed(config.seed, seed_role::LIMIT))?;
            }
            Ok((train, test))
        }
        DatasetKind::FashionMnist => {
            let train = load_fashion_mnist(
                &config.data_dir,
                Split::Train,
                config.limit,
                derive_seed(config.seed, seed_role::LIMIT),
            )?;
            let test = load_fashion_mnist(&config.data_dir, Split::Test, None, 0)?;
            Ok((train, test))
        }
    }
}

fn batch_matrices(batch: &[Sample]) -> (Matrix, Matrix) {
    let n = batch.len();
    let d = batch[0].features.len();
    let c = batch[0].label.len();
    let mut x = Vec::with_capacity(n * d);
    let mut y = Vec::with_capacity(n * c);
    for s in batch {
        x.extend_from_slice(&s.features);
        y.extend_from_slice(&s.label);
    }
    (Matrix::from_vec(n, d, x), Matrix::from_vec(n, c, y))
}

fn evaluate(params: &MlpParams, view: &DatasetView) -> Result<(f64, f64), HarnessError> {
    let probs = predict(params, view.features())?;
    let loss = soft_ce_loss(&probs, view.labels())?;
    let acc = accuracy(&probs, view.hard_labels())?;
    Ok((loss, acc))
}

/// Shared model update: forward, soft-label loss, backward, SGD. Returns the
/// loss and the forward probabilities (batchboost pairs on them).
fn train_on_batch(
    params: &mut MlpParams,
    opt: &mut OptimizerState,
    x: &Matrix,
    y: &Matrix,
) -> Result<(f64, Matrix), HarnessError> {
    let (probs, cache) = forward(params, x)?;
    let loss = soft_ce_loss(&probs, y)?;
    let grads = backward(params, &cache, y)?;
    sgd_step(params, &grads, opt)?;
    Ok((loss, probs))
}

/// Run one experiment to completion. Deterministic given the config; see
/// [`ExperimentConfig::wall_clock`] for the one opt-out.
pub fn run_experiment(
    config: &ExperimentConfig,
) -> Result<(Vec<MetricsRow>, RunReport), HarnessError> {
    config.validate()?;
    let run_start = Instant::now();
    let (train, test) = load_views(config)?;

    let mut params = init_params(
        train.dim(),
        config.hidden_width(),
        train.num_classes(),
        derive_seed(config.seed, seed_role::PARAMS),
    )?;
    let mut opt = OptimizerState::new(&params, config.lr, config.weight_decay, config.momentum)?;
    let mut sampler = EpochSampler::new(train.len(), derive_seed(config.seed, seed_role::SAMPLER));
    let mut method_rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, seed_role::METHOD));

    // Batchboost keeps a current batch alive across steps; everything else
    // builds each batch from scratch.
    let mut feeder_state: Option<(FeederState, Vec<Sample>)> = match config.method {
        Method::Batchboost => {
            let mut feeder = FeederState::new(
                config.batch_size,
                config.gamma,
                config.alpha,
                config.lambda_mode,
                derive_seed(config.seed, seed_role::FEEDER),
            )?;
            feeder.set_lambda_override(config.fixed_lambda)?;
            feeder.set_track_lineage(config.track_lineage);
            let current = feeder.bootstrap(&mut sampler, &train)?;
            Some((feeder, current))
        }
        _ => None,
    };

    // Epochs are defined by fresh-sample consumption so every method sees
    // the same amount of new data per epoch.
    let consumption = match &feeder_state {
        Some((feeder, _)) => feeder.half_count(),
        None => config.batch_size,
    };
    if consumption == 0 {
        return Err(HarnessError::InvalidConfig(
            "gamma leaves no fresh samples per step".into(),
        ));
    }
    let steps_per_epoch = train.len().div_ceil(consumption);

    let mut rows: Vec<MetricsRow> = Vec::with_capacity(config.epochs);
    let mut last_batch: Vec<Sample> = Vec::new();
    let mut best_acc = f64::NAN;
    let mut diverged = false;
    let mut consecutive_bad = 0u32;

    for epoch in 1..=config.epochs {
        let epoch_start = Instant::now();
        let mut loss_sum = 0.0;

        for _ in 0..steps_per_epoch {
            let loss = match (&config.method, &mut feeder_state) {
                (Method::Batchboost, Some((feeder, current))) => {
                    let (x, y) = batch_matrices(current);
                    let (loss, probs) = train_on_batch(&mut params, &mut opt, &x, &y)?;
                    let errors = per_sample_error(&probs, &y)?;
                    *current = feeder.next_batch(
                        current,
                        &errors,
                        PairingStrategy::ErrorSorted,
                        &mut sampler,
                        &train,
                    )?;
                    loss
                }
                (Method::Baseline, _) => {
                    let batch = sampler.next_fresh(&train, config.batch_size);
                    let (x, y) = batch_matrices(&batch);
                    last_batch = batch;
                    train_on_batch(&mut params, &mut opt, &x, &y)?.0
                }
                (Method::Mixup, _) => {
                    let fresh = sampler.next_fresh(&train, config.batch_size);
                    let lambda = match config.fixed_lambda {
                        Some(l) => l,
                        None => sample_lambda(config.alpha, &mut method_rng)?,
                    };
                    let mut perm: Vec<usize> = (0..config.batch_size).collect();
                    perm.shuffle(&mut method_rng);
                    let batch: Vec<Sample> = perm
                        .iter()
                        .enumerate()
                        .map(|(i, &j)| mix_pair(&fresh[i], &fresh[j], lambda))
                        .collect::<Result<_, _>>()?;
                    let (x, y) = batch_matrices(&batch);
                    last_batch = batch;
                    train_on_batch(&mut params, &mut opt, &x, &y)?.0
                }
                (Method::SamplePairing, _) => {
                    let batch = samplepairing_batch(
                        &mut sampler,
                        &train,
                        config.batch_size,
                        &mut method_rng,
                    )?;
                    let (x, y) = batch_matrices(&batch);
                    last_batch = batch;
                    train_on_batch(&mut params, &mut opt, &x, &y)?.0
                }
                (Method::Batchboost, None) => unreachable!("feeder initialized above"),
            };
            loss_sum += loss;
        }

        let train_loss = loss_sum / steps_per_epoch as f64;
        let (test_loss, test_accuracy) = evaluate(&params, &test)?;
        if best_acc.is_nan() || test_accuracy > best_acc {
            best_acc = test_accuracy;
        }
        rows.push(MetricsRow {
            epoch,
            train_loss,
            test_loss,
            test_accuracy,
            wall_ms: if config.wall_clock {
                epoch_start.elapsed().as_millis() as u64
            } else {
                0
            },
        });

        // Divergence is a measured outcome, not a crash: keep training
        // unless the loss stays non-finite for three epochs straight.
        if !train_loss.is_finite() || !test_loss.is_finite() {
            diverged = true;
            consecutive_bad += 1;
            if consecutive_bad >= 3 {
                break;
            }
        } else {
            consecutive_bad = 0;
        }
    }

    if let Some(path) = &config.grid_out {
        let batch = match &feeder_state {
            Some((_, current)) => current.as_slice(),
            None => last_batch.as_slice(),
        };
        if !batch.is_empty() {
            let (h, w) = grid_tile_dims(train.dim());
            let cols = (batch.len() as f64).sqrt().ceil() as usize;
            dump_mixed_grid(batch, h, w, cols, path)?;
        }
    }
    if let Some(path) = &config.metrics_out {
        write_metrics_csv(&rows, path)?;
    }

    let report = RunReport {
        config: config.clone(),
        epochs_run: rows.len(),
        final_test_accuracy: rows.last().map_or(f64::NAN, |r| r.test_accuracy),
        best_test_accuracy: best_acc,
        diverged,
        fresh_samples_drawn: sampler.drawn(),
        total_wall_ms: run_start.elapsed().as_millis() as u64,
    };
    Ok((rows, report))
}

/// Tile geometry for feature vectors: the most square factorization of `d`
/// (784 → 28×28, 16 → 4×4, primes fall back to one row).
fn grid_tile_dims(d: usize) -> (usize, usize) {
    let mut h = (d as f64).sqrt().floor() as usize;
    while h > 1 && !d.is_multiple_of(h) {
        h -= 1;
    }
    (h.max(1), d / h.max(1))
}

/// One method's aggregate over seeds.
#[derive(Clone, Debug)]
pub struct MethodSummary {
    pub method: Method,
    pub runs: usize,
    pub median_final_accuracy: f64,
    pub iqr_final_accuracy: f64,
    pub min_final_accuracy: f64,
    pub max_final_accuracy: f64,
    pub diverged_runs: usize,
}

/// Aggregated comparison across methods and seeds.
#[derive(Clone, Debug)]
pub struct Comparison {
    pub summaries: Vec<MethodSummary>,
    pub csv_path: PathBuf,
    pub summary_path: PathBuf,
}

impl Comparison {
    pub fn summary_for(&self, method: Method) -> Option<&MethodSummary> {
        self.summaries.iter().find(|s| s.method == method)
    }
}

/// Type-7 (linear interpolation) quantile of an ascending slice.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        n => {
            let pos = q * (n - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
        }
    }
}

/// Run every (config, seed) pair and aggregate per-method medians and IQRs
/// of final test accuracy. Configs must differ only in method. Per-run
/// metrics, `comparison.csv` and `summary.txt` land in `out_dir`.
///
/// Runs execute concurrently; each owns its model, feeder and sampler, so
/// results are independent of scheduling.
pub fn compare(
    configs: &[ExperimentConfig],
    seeds: &[u64],
    out_dir: &Path,
) -> Result<Comparison, HarnessError> {
    if configs.is_empty() || seeds.is_empty() {
        return Err(HarnessError::InvalidConfig(
            "compare needs at least one config and one seed".into(),
        ));
    }
    let key = configs[0].shared_key();
    for c in configs {
        c.validate()?;
        if c.shared_key() != key {
            return Err(HarnessError::InvalidConfig(
                "compare configs must differ only in method".into(),
            ));
        }
    }
    fs::create_dir_all(out_dir)?;

    let jobs: Vec<ExperimentConfig> = configs
        .iter()
        .flat_map(|cfg| {
            seeds.iter().map(|&seed| {
                let mut job = cfg.clone();
                job.seed = seed;
                job.metrics_out =
                    Some(out_dir.join(format!("metrics_{}_{}.csv", cfg.method, seed)));
                job.grid_out = None;
                job
            })
        })
        .collect();

    let reports = run_jobs(&jobs)?;

    let mut summaries = Vec::with_capacity(configs.len());
    for (c, chunk) in configs.iter().zip(reports.chunks(seeds.len())) {
        let mut finals: Vec<f64> = chunk.iter().map(|r| r.final_test_accuracy).collect();
        finals.sort_by(f64::total_cmp);
        summaries.push(MethodSummary {
            method: c.method,
            runs: chunk.len(),
            median_final_accuracy: quantile(&finals, 0.5),
            iqr_final_accuracy: quantile(&finals, 0.75) - quantile(&finals, 0.25),
            min_final_accuracy: finals[0],
            max_final_accuracy: finals[finals.len() - 1],
            diverged_runs: chunk.iter().filter(|r| r.diverged).count(),
        });
    }

    let csv_path = out_dir.join("comparison.csv");
    fs::write(&csv_path, comparison_csv(&summaries))?;
    let summary_path = out_dir.join("summary.txt");
    fs::write(&summary_path, comparison_text(&summaries, seeds))?;

    Ok(Comparison {
        summaries,
        csv_path,
        summary_path,
    })
}

fn run_jobs(jobs: &[ExperimentConfig]) -> Result<Vec<RunReport>, HarnessError> {
    let workers = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
        .min(jobs.len());
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<(usize, Result<RunReport, HarnessError>)>> =
        Mutex::new(Vec::with_capacity(jobs.len()));

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= jobs.len() {
                    break;
                }
                let outcome = run_experiment(&jobs[i]).map(|(_, report)| report);
                results.lock().unwrap().push((i, outcome));
            });
        }
    });

    let mut collected = results.into_inner().unwrap();
    collected.sort_by_key(|(i, _)| *i);
    collected.into_iter().map(|(_, r)| r).collect()
}

fn comparison_csv(summaries: &[MethodSummary]) -> String {
    let mut out = String::from(
        "method,runs,median_final_accuracy,iqr_final_accuracy,\
         min_final_accuracy,max_final_accuracy,diverged_runs\n",
    );
    for s in summaries {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            s.method,
            s.runs,
            format_sig(s.median_final_accuracy, 6),
            format_sig(s.iqr_final_accuracy, 6),
            format_sig(s.min_final_accuracy, 6),
            format_sig(s.max_final_accuracy, 6),
            s.diverged_runs
        ));
    }
    out
}

fn comparison_text(summaries: &[MethodSummary], seeds: &[u64]) -> String {
    let mut out = format!("final test accuracy over {} seeds\n\n", seeds.len());
    for s in summaries {
        out.push_str(&format!(
            "{:<14} median {}  iqr {}  range [{}, {}]  diverged {}/{}\n",
            s.method.to_string(),
            format_sig(s.median_final_accuracy, 6),
            format_sig(s.iqr_final_accuracy, 6),
            format_sig(s.min_final_accuracy, 6),
            format_sig(s.max_final_accuracy, 6),
            s.diverged_runs,
            s.runs
        ));
    }
    if let Some(bb) = summaries.iter().find(|s| s.method == Method::Batchboost) {
        out.push('\n');
        for s in summaries.iter().filter(|s| s.method != Method::Batchboost) {
            let delta_pp = (bb.median_final_accuracy - s.median_final_accuracy) * 100.0;
            out.push_str(&format!(
                "batchboost vs {:<14} {}{:.2} pp (median final accuracy)\n",
                s.method.to_string(),
                if delta_pp >= 0.0 { "+" } else { "" },
                delta_pp
            ));
        }
    }
    out
}
