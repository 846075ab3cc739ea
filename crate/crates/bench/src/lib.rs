//! Shared fixture builders for the criterion benches.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use batchboost::dataset::{synth_blobs, DatasetView, EpochSampler};
use batchboost::matrix::Matrix;
use batchboost::pipeline::Sample;

/// Deterministic error vector with duplicates, length `n`.
pub fn demo_errors(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| (rng.random::<f64>() * 16.0).floor() / 16.0).collect()
}

/// A batch of fresh samples with `dim` features each.
pub fn demo_batch(n: usize, dim: usize, classes: usize, seed: u64) -> Vec<Sample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let features = (0..dim).map(|_| rng.random::<f64>()).collect();
            let mut label = vec![0.0; classes];
            label[i % classes] = 1.0;
            Sample::fresh(i, features, label)
        })
        .collect()
}

/// Random feature matrix in `[0,1]`.
pub fn demo_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.random()).collect())
}

/// One-hot label matrix cycling through the classes.
pub fn demo_onehot(rows: usize, classes: usize) -> Matrix {
    let mut m = Matrix::zeros(rows, classes);
    for i in 0..rows {
        m.set(i, i % classes, 1.0);
    }
    m
}

/// Small blob corpus plus a sampler over its train split.
pub fn demo_view(seed: u64) -> (DatasetView, EpochSampler) {
    let (train, _) = synth_blobs(3, 64, 16, 0.1, seed).expect("valid blob params");
    let sampler = EpochSampler::new(train.len(), seed ^ 0xfeed);
    (train, sampler)
}
