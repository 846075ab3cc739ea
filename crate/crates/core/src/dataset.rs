//! IDX file parsing, Fashion-MNIST loading, a synthetic blob corpus, and the
//! epoch-shuffled stream that feeds fresh samples into training.

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::distr::standard_normal;
use crate::matrix::Matrix;
use crate::pipeline::Sample;

/// Magic number of an IDX3 (image) file.
pub const IDX_IMAGE_MAGIC: u32 = 0x0000_0803;
/// Magic number of an IDX1 (label) file.
pub const IDX_LABEL_MAGIC: u32 = 0x0000_0801;

const GZIP_MAGIC: [u8; 2] = [0x1f, 0x8b];
const FASHION_CLASSES: usize = 10;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("bad IDX magic: expected {expected:#010x}, got {got:#010x}")]
    BadMagic { expected: u32, got: u32 },
    #[error("truncated IDX data: need {need} bytes, have {have}")]
    Truncated { need: usize, have: usize },
    #[error("missing dataset file: looked for {0} (also with .gz suffix)")]
    MissingFile(PathBuf),
    #[error("image/label count mismatch: {images} images vs {labels} labels")]
    CountMismatch { images: usize, labels: usize },
    #[error("label {label} out of range for {num_classes} classes")]
    LabelOutOfRange { label: usize, num_classes: usize },
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Which half of a corpus a view represents.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl std::fmt::Display for Split {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Split::Train => write!(f, "train"),
            Split::Test => write!(f, "test"),
        }
    }
}

/// Raw byte-level corpus exactly as parsed from IDX files.
#[derive(Clone, Debug)]
pub struct RawDataset {
    images: Vec<u8>,
    labels: Vec<u8>,
    n: usize,
    height: usize,
    width: usize,
    num_classes: usize,
}

impl RawDataset {
    pub fn new(
        dims: [usize; 3],
        images: Vec<u8>,
        labels: Vec<u8>,
        num_classes: usize,
    ) -> Result<Self, DatasetError> {
        let [n, height, width] = dims;
        if n == 0 {
            return Err(DatasetError::InvalidParam("empty dataset".into()));
        }
        let volume = checked_volume(n, height, width)?;
        if images.len() != volume {
            return Err(DatasetError::Truncated {
                need: volume,
                have: images.len(),
            });
        }
        if labels.len() != n {
            return Err(DatasetError::CountMismatch {
                images: n,
                labels: labels.len(),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&l| (l as usize) >= num_classes) {
            return Err(DatasetError::LabelOutOfRange {
                label: bad as usize,
                num_classes,
            });
        }
        Ok(RawDataset {
            images,
            labels,
            n,
            height,
            width,
            num_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn image_dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    /// Keep only the given (sorted, de-duplicated) sample indices.
    fn select(&self, indices: &[usize]) -> RawDataset {
        let d = self.height * self.width;
        let mut images = Vec::with_capacity(indices.len() * d);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            images.extend_from_slice(&self.images[i * d..(i + 1) * d]);
            labels.push(self.labels[i]);
        }
        RawDataset {
            images,
            labels,
            n: indices.len(),
            height: self.height,
            width: self.width,
            num_classes: self.num_classes,
        }
    }

    /// Flatten to `[0,1]` features (intensity / 255) and one-hot labels.
    pub fn to_view(&self, split: Split) -> DatasetView {
        let d = self.height * self.width;
        let features: Vec<f64> = self.images.iter().map(|&b| b as f64 / 255.0).collect();
        let mut labels = Matrix::zeros(self.n, self.num_classes);
        let mut hard = Vec::with_capacity(self.n);
        for (i, &l) in self.labels.iter().enumerate() {
            labels.set(i, l as usize, 1.0);
            hard.push(l as usize);
        }
        DatasetView {
            features: Matrix::from_vec(self.n, d, features),
            labels,
            hard_labels: hard,
            split,
        }
    }
}

/// Normalized, flattened dataset ready for training: features in `[0,1]`,
/// one row-stochastic label row per sample. Read-only after construction.
#[derive(Clone, Debug)]
pub struct DatasetView {
    features: Matrix,
    labels: Matrix,
    hard_labels: Vec<usize>,
    split: Split,
}

impl DatasetView {
    pub fn new(features: Matrix, labels: Matrix, hard_labels: Vec<usize>, split: Split) -> Self {
        assert_eq!(features.rows(), labels.rows());
        assert_eq!(features.rows(), hard_labels.len());
        DatasetView {
            features,
            labels,
            hard_labels,
            split,
        }
    }

    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn num_classes(&self) -> usize {
        self.labels.cols()
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &Matrix {
        &self.labels
    }

    pub fn hard_labels(&self) -> &[usize] {
        &self.hard_labels
    }

    pub fn split(&self) -> Split {
        self.split
    }

    /// Count of samples per class, length `num_classes`.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.num_classes()];
        for &l in &self.hard_labels {
            counts[l] += 1;
        }
        counts
    }

    /// Class-stratified subset of exactly `limit` rows, seeded.
    pub fn stratified_subset(&self, limit: usize, seed: u64) -> Result<DatasetView, DatasetError> {
        let labels: Vec<u8> = self
            .hard_labels
            .iter()
            .map(|&l| u8::try_from(l).expect("more than 255 classes"))
            .collect();
        let indices = stratified_indices(&labels, self.num_classes(), limit, seed)?;
        let mut features = Matrix::zeros(indices.len(), self.dim());
        let mut label_rows = Matrix::zeros(indices.len(), self.num_classes());
        let mut hard = Vec::with_capacity(indices.len());
        for (row, &i) in indices.iter().enumerate() {
            features.row_mut(row).copy_from_slice(self.features.row(i));
            label_rows.row_mut(row).copy_from_slice(self.labels.row(i));
            hard.push(self.hard_labels[i]);
        }
        Ok(DatasetView::new(features, label_rows, hard, self.split))
    }
}

/// Parse an IDX3 image file: big-endian magic `0x00000803`, three big-endian
/// u32 dimensions, then `N*H*W` payload bytes.
pub fn parse_idx_images(bytes: &[u8]) -> Result<([usize; 3], Vec<u8>), DatasetError> {
    let magic = read_be_u32(bytes, 0)?;
    if magic != IDX_IMAGE_MAGIC {
        return Err(DatasetError::BadMagic {
            expected: IDX_IMAGE_MAGIC,
            got: magic,
        });
    }
    let n = read_be_u32(bytes, 4)? as usize;
    let h = read_be_u32(bytes, 8)? as usize;
    let w = read_be_u32(bytes, 12)? as usize;
    let payload = checked_volume(n, h, w)?;
    let need = 16 + payload;
    if bytes.len() < need {
        return Err(DatasetError::Truncated {
            need: payload,
            have: bytes.len() - 16,
        });
    }
    Ok(([n, h, w], bytes[16..need].to_vec()))
}

/// Parse an IDX1 label file: magic `0x00000801`, one big-endian u32 count,
/// then `N` label bytes.
pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>, DatasetError> {
    let magic = read_be_u32(bytes, 0)?;
    if magic != IDX_LABEL_MAGIC {
        return Err(DatasetError::BadMagic {
            expected: IDX_LABEL_MAGIC,
            got: magic,
        });
    }
    let n = read_be_u32(bytes, 4)? as usize;
    let need = 8 + n;
    if bytes.len() < need {
        return Err(DatasetError::Truncated {
            need: n,
            have: bytes.len() - 8,
        });
    }
    Ok(bytes[8..need].to_vec())
}

/// Inverse of [`parse_idx_images`]; used to build fixtures and subsets.
pub fn encode_idx_images(dims: [usize; 3], data: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + data.len());
    out.extend_from_slice(&IDX_IMAGE_MAGIC.to_be_bytes());
    for d in dims {
        out.extend_from_slice(&(d as u32).to_be_bytes());
    }
    out.extend_from_slice(data);
    out
}

/// Inverse of [`parse_idx_labels`].
pub fn encode_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&IDX_LABEL_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

fn checked_volume(n: usize, h: usize, w: usize) -> Result<usize, DatasetError> {
    n.checked_mul(h)
        .and_then(|p| p.checked_mul(w))
        .ok_or_else(|| {
            DatasetError::InvalidParam(format!("declared dimensions {n}x{h}x{w} overflow"))
        })
}

fn read_be_u32(bytes: &[u8], offset: usize) -> Result<u32, DatasetError> {
    if bytes.len() < offset + 4 {
        return Err(DatasetError::Truncated {
            need: offset + 4,
            have: bytes.len(),
        });
    }
    Ok(u32::from_be_bytes([
        bytes[offset],
        bytes[offset + 1],
        bytes[offset + 2],
        bytes[offset + 3],
    ]))
}

/// Read `dir/name` or `dir/name.gz`; gzip is detected by content (1F 8B
/// prefix), not extension, so mislabelled files still load.
fn read_maybe_gz(dir: &Path, name: &str) -> Result<Vec<u8>, DatasetError> {
    let plain = dir.join(name);
    let gz = dir.join(format!("{name}.gz"));
    let path = if plain.exists() {
        plain
    } else if gz.exists() {
        gz
    } else {
        return Err(DatasetError::MissingFile(plain));
    };
    let raw = fs::read(&path)?;
    if raw.len() >= 2 && raw[..2] == GZIP_MAGIC {
        let mut out = Vec::new();
        GzDecoder::new(&raw[..]).read_to_end(&mut out)?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

/// Standard Fashion-MNIST / MNIST file names for a split.
pub fn idx_file_names(split: Split) -> (&'static str, &'static str) {
    match split {
        Split::Train => ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
        Split::Test => ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
    }
}

/// Load one split of Fashion-MNIST from `dir`, optionally limiting it to a
/// class-stratified random subset of exactly `limit` samples.
pub fn load_fashion_mnist(
    dir: &Path,
    split: Split,
    limit: Option<usize>,
    limit_seed: u64,
) -> Result<DatasetView, DatasetError> {
    let (image_name, label_name) = idx_file_names(split);
    let (dims, data) = parse_idx_images(&read_maybe_gz(dir, image_name)?)?;
    let labels = parse_idx_labels(&read_maybe_gz(dir, label_name)?)?;
    if dims[0] != labels.len() {
        return Err(DatasetError::CountMismatch {
            images: dims[0],
            labels: labels.len(),
        });
    }
    let mut raw = RawDataset::new(dims, data, labels, FASHION_CLASSES)?;
    if let Some(limit) = limit {
        let indices = stratified_indices(raw.labels(), raw.num_classes, limit, limit_seed)?;
        raw = raw.select(&indices);
    }
    Ok(raw.to_view(split))
}

/// Pick `limit` indices stratified by class: per-class quotas differ by at
/// most one, and which classes receive the remainder is seeded.
pub fn stratified_indices(
    labels: &[u8],
    num_classes: usize,
    limit: usize,
    seed: u64,
) -> Result<Vec<usize>, DatasetError> {
    if limit == 0 || limit > labels.len() {
        return Err(DatasetError::InvalidParam(format!(
            "limit {limit} out of range 1..={}",
            labels.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); num_classes];
    for (i, &l) in labels.iter().enumerate() {
        by_class[l as usize].push(i);
    }

    let base = limit / num_classes;
    let extra = limit % num_classes;
    let mut class_order: Vec<usize> = (0..num_classes).collect();
    class_order.shuffle(&mut rng);

    let mut selected = Vec::with_capacity(limit);
    let mut leftovers = Vec::new();
    for (rank, &c) in class_order.iter().enumerate() {
        let quota = base + usize::from(rank < extra);
        let pool = &mut by_class[c];
        pool.shuffle(&mut rng);
        let take = quota.min(pool.len());
        selected.extend_from_slice(&pool[..take]);
        leftovers.extend_from_slice(&pool[take..]);
    }
    // Classes with too few members fall back to a seeded global top-up.
    if selected.len() < limit {
        leftovers.shuffle(&mut rng);
        let need = limit - selected.len();
        selected.extend_from_slice(&leftovers[..need]);
    }
    selected.sort_unstable();
    Ok(selected)
}

/// Generate a deterministic Gaussian-blob corpus: one unit-norm center per
/// class, per-coordinate noise with std `spread`, everything affinely
/// rescaled into `[0,1]`, split evenly into train and test.
pub fn synth_blobs(
    num_classes: usize,
    per_class: usize,
    dim: usize,
    spread: f64,
    seed: u64,
) -> Result<(DatasetView, DatasetView), DatasetError> {
    if num_classes < 2 {
        return Err(DatasetError::InvalidParam("need at least 2 classes".into()));
    }
    if dim < 2 {
        return Err(DatasetError::InvalidParam("need dim >= 2".into()));
    }
    if per_class == 0 {
        return Err(DatasetError::InvalidParam("need per_class >= 1".into()));
    }
    if !(spread >= 0.0 && spread.is_finite()) {
        return Err(DatasetError::InvalidParam(format!(
            "spread {spread} must be finite and >= 0"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers: Vec<Vec<f64>> = (0..num_classes)
        .map(|_| loop {
            let v: Vec<f64> = (0..dim).map(|_| standard_normal(&mut rng)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-12 {
                break v.into_iter().map(|x| x / norm).collect();
            }
        })
        .collect();

    let n_side = num_classes * per_class;
    let mut train = Vec::with_capacity(n_side * dim);
    let mut test = Vec::with_capacity(n_side * dim);
    for center in &centers {
        for half in [&mut train, &mut test] {
            for _ in 0..per_class {
                half.extend(center.iter().map(|&c| c + spread * standard_normal(&mut rng)));
            }
        }
    }

    // One global affine map so inter-class geometry is preserved.
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &v in train.iter().chain(test.iter()) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let scale = if hi > lo { hi - lo } else { 1.0 };
    let rescale = |buf: &mut Vec<f64>| {
        for v in buf.iter_mut() {
            *v = ((*v - lo) / scale).clamp(0.0, 1.0);
        }
    };
    rescale(&mut train);
    rescale(&mut test);

    let hard: Vec<usize> = (0..num_classes)
        .flat_map(|c| std::iter::repeat_n(c, per_class))
        .collect();
    let mut labels = Matrix::zeros(n_side, num_classes);
    for (i, &c) in hard.iter().enumerate() {
        labels.set(i, c, 1.0);
    }

    let make = |buf: Vec<f64>, split| {
        DatasetView::new(
            Matrix::from_vec(n_side, dim, buf),
            labels.clone(),
            hard.clone(),
            split,
        )
    };
    Ok((make(train, Split::Train), make(test, Split::Test)))
}

/// Epoch-shuffled index stream. Every window of `N` draws aligned to a
/// reshuffle boundary visits each index exactly once.
#[derive(Clone, Debug)]
pub struct EpochSampler {
    perm: Vec<usize>,
    cursor: usize,
    rng: ChaCha8Rng,
    drawn: u64,
}

impl EpochSampler {
    pub fn new(n: usize, seed: u64) -> Self {
        assert!(n >= 1, "sampler needs a non-empty dataset");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        EpochSampler {
            perm,
            cursor: 0,
            rng,
            drawn: 0,
        }
    }

    /// Total fresh draws made so far; the audit hook for epoch accounting.
    pub fn drawn(&self) -> u64 {
        self.drawn
    }

    fn next_index(&mut self) -> usize {
        if self.cursor == self.perm.len() {
            self.perm.shuffle(&mut self.rng);
            self.cursor = 0;
        }
        let idx = self.perm[self.cursor];
        self.cursor += 1;
        self.drawn += 1;
        idx
    }

    /// Draw `k` fresh samples (age 0, singleton lineage), reshuffling when an
    /// epoch boundary is crossed mid-draw.
    pub fn next_fresh(&mut self, view: &DatasetView, k: usize) -> Vec<Sample> {
        (0..k)
            .map(|_| {
                let i = self.next_index();
                Sample::fresh(
                    i,
                    view.features().row(i).to_vec(),
                    view.labels().row(i).to_vec(),
                )
            })
            .collect()
    }
}
