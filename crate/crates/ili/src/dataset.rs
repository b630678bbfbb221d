//! Datasets and how they are cut up.
//!
//! Loading (IDX image/label files, CSV), synthetic Gaussian blobs with a
//! Bayes-optimal oracle, seeded train/val/test splitting, and balanced
//! partitioning into the subsets the label-improvement variants consume.
//! All shuffling goes through one documented Fisher-Yates permutation driven
//! by ChaCha8 with a 64-bit seed, so index traces are reproducible anywhere.

use std::path::Path;

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::learner::PredictionResult;

const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

/// A labelled dataset: N samples of D real features plus class ids.
///
/// Invariants (checked at construction): the feature row count equals the
/// label count, every label is below `num_classes`, N > 0, D > 0, K >= 2.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub features: Array2<f64>,
    pub labels: Vec<usize>,
    pub num_classes: usize,
}

impl Dataset {
    pub fn new(features: Array2<f64>, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        if features.nrows() == 0 {
            return Err(Error::Data("dataset has no samples".into()));
        }
        if features.ncols() == 0 {
            return Err(Error::Data("dataset has no features".into()));
        }
        if labels.len() != features.nrows() {
            return Err(Error::Data(format!(
                "feature rows ({}) do not match label count ({})",
                features.nrows(),
                labels.len()
            )));
        }
        if num_classes < 2 {
            return Err(Error::Data(format!(
                "need at least 2 classes, got {num_classes}"
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(Error::Data(format!(
                "label {bad} out of range for {num_classes} classes"
            )));
        }
        Ok(Dataset { features, labels, num_classes })
    }

    /// Number of samples.
    pub fn len(&self) -> usize {
        self.features.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Feature dimensionality.
    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    /// Same features with a different label vector.
    pub fn with_labels(&self, labels: Vec<usize>) -> Result<Dataset> {
        Dataset::new(self.features.clone(), labels, self.num_classes)
    }

    /// Row subset in the given index order. The class count is preserved even
    /// if the subset misses some classes.
    pub fn select(&self, indices: &[usize]) -> Result<Dataset> {
        if indices.is_empty() {
            return Err(Error::Data("selection is empty".into()));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.len()) {
            return Err(Error::Data(format!(
                "selection index {bad} out of range for {} samples",
                self.len()
            )));
        }
        let features = self.features.select(Axis(0), indices);
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        Ok(Dataset { features, labels, num_classes: self.num_classes })
    }
}

/// Shuffle with `seed`, then cut into consecutive runs sized by `fractions`.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitPlan {
    /// Non-negative, summing to 1 within 1e-9.
    pub fractions: Vec<f64>,
    pub seed: u64,
}

/// Shuffle with `seed`, then deal into `n_partitions` balanced parts.
#[derive(Clone, Debug, PartialEq)]
pub struct PartitionPlan {
    /// At least 2.
    pub n_partitions: usize,
    pub seed: u64,
}

/// True generative parameters of a blob benchmark; classifies by posterior.
///
/// Classification is deterministic: argmax of the class posterior, ties going
/// to the lowest class id.
#[derive(Clone, Debug, PartialEq)]
pub struct BayesOracle {
    /// K x D matrix of component means.
    pub means: Array2<f64>,
    /// Shared isotropic variance.
    pub variance: f64,
    /// Class priors, summing to 1.
    pub priors: Vec<f64>,
}

impl BayesOracle {
    /// Log posterior up to a shared constant: -||x - mu_k||^2 / (2 sigma^2) + ln prior.
    fn log_posterior(&self, x: ArrayView1<f64>) -> Vec<f64> {
        self.means
            .rows()
            .into_iter()
            .zip(&self.priors)
            .map(|(mean, &prior)| {
                let sq: f64 = mean.iter().zip(x.iter()).map(|(m, v)| (v - m) * (v - m)).sum();
                -sq / (2.0 * self.variance) + prior.ln()
            })
            .collect()
    }

    /// Most probable class for one sample.
    pub fn classify(&self, x: ArrayView1<f64>) -> usize {
        let scores = self.log_posterior(x);
        argmax(&scores)
    }

    /// Posterior-based predictions for a whole feature matrix.
    pub fn predict(&self, x: ArrayView2<f64>) -> Result<PredictionResult> {
        if x.ncols() != self.means.ncols() {
            return Err(Error::Data(format!(
                "oracle expects {} features, got {}",
                self.means.ncols(),
                x.ncols()
            )));
        }
        let k = self.means.nrows();
        let mut proba = Array2::zeros((x.nrows(), k));
        let mut predicted = Vec::with_capacity(x.nrows());
        let mut confidence = Vec::with_capacity(x.nrows());
        for (i, row) in x.rows().into_iter().enumerate() {
            let logp = self.log_posterior(row);
            let m = logp.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut z: Vec<f64> = logp.iter().map(|v| (v - m).exp()).collect();
            let s: f64 = z.iter().sum();
            for v in &mut z {
                *v /= s;
            }
            let best = argmax(&z);
            predicted.push(best);
            confidence.push(z[best]);
            for (j, v) in z.iter().enumerate() {
                proba[[i, j]] = *v;
            }
        }
        Ok(PredictionResult { predicted, confidence, proba })
    }
}

/// First index of the maximum value; ties go to the lowest index.
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Fisher-Yates permutation of 0..n consuming the given RNG.
///
/// The algorithm is pinned so recorded index traces stay valid: walk i from
/// n-1 down to 1, draw j uniformly from 0..=i, swap positions i and j.
pub(crate) fn permutation_with_rng(n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        idx.swap(i, j);
    }
    idx
}

/// Seeded permutation of 0..n (ChaCha8 keyed by `seed`, Fisher-Yates).
pub fn seeded_permutation(n: usize, seed: u64) -> Vec<usize> {
    permutation_with_rng(n, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn be_u32(bytes: &[u8], offset: usize, path: &Path) -> Result<u32> {
    let end = offset + 4;
    if bytes.len() < end {
        return Err(Error::Data(format!(
            "{}: truncated header ({} bytes)",
            path.display(),
            bytes.len()
        )));
    }
    Ok(u32::from_be_bytes([bytes[offset], bytes[offset + 1], bytes[offset + 2], bytes[offset + 3]]))
}

/// Reads an IDX image file: magic 0x00000803, then big-endian count, rows,
/// cols, then count*rows*cols unsigned bytes.
pub fn read_idx_images(path: &Path) -> Result<(usize, usize, usize, Vec<u8>)> {
    let bytes = std::fs::read(path)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let magic = be_u32(&bytes, 0, path)?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::Data(format!(
            "{}: bad magic 0x{magic:08x}, expected 0x{IDX_IMAGES_MAGIC:08x} for images",
            path.display()
        )));
    }
    let count = be_u32(&bytes, 4, path)? as usize;
    let rows = be_u32(&bytes, 8, path)? as usize;
    let cols = be_u32(&bytes, 12, path)? as usize;
    let expected = 16 + count * rows * cols;
    if bytes.len() != expected {
        return Err(Error::Data(format!(
            "{}: truncated or oversized image data, have {} bytes, expected {expected}",
            path.display(),
            bytes.len()
        )));
    }
    Ok((count, rows, cols, bytes[16..].to_vec()))
}

/// Reads an IDX label file: magic 0x00000801, big-endian count, count bytes.
pub fn read_idx_labels(path: &Path) -> Result<Vec<usize>> {
    let bytes = std::fs::read(path)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let magic = be_u32(&bytes, 0, path)?;
    if magic != IDX_LABELS_MAGIC {
        return Err(Error::Data(format!(
            "{}: bad magic 0x{magic:08x}, expected 0x{IDX_LABELS_MAGIC:08x} for labels",
            path.display()
        )));
    }
    let count = be_u32(&bytes, 4, path)? as usize;
    let expected = 8 + count;
    if bytes.len() != expected {
        return Err(Error::Data(format!(
            "{}: truncated or oversized label data, have {} bytes, expected {expected}",
            path.display(),
            bytes.len()
        )));
    }
    Ok(bytes[8..].iter().map(|&b| b as usize).collect())
}

/// Writes features scaled back to bytes as an IDX image file.
///
/// Requires `rows * cols` to equal the feature dimension and every value to
/// round-trip (bytes written are `round(value * 255)`).
pub fn write_idx_images(features: ArrayView2<f64>, rows: usize, cols: usize, path: &Path) -> Result<()> {
    if rows * cols != features.ncols() {
        return Err(Error::Data(format!(
            "image shape {rows}x{cols} does not match feature dimension {}",
            features.ncols()
        )));
    }
    let count = features.nrows();
    let mut bytes = Vec::with_capacity(16 + count * rows * cols);
    bytes.extend_from_slice(&IDX_IMAGES_MAGIC.to_be_bytes());
    bytes.extend_from_slice(&(count as u32).to_be_bytes());
    bytes.extend_from_slice(&(rows as u32).to_be_bytes());
    bytes.extend_from_slice(&(cols as u32).to_be_bytes());
    for &v in features.iter() {
        let scaled = (v * 255.0).round();
        if !(0.0..=255.0).contains(&scaled) {
            return Err(Error::Data(format!("feature value {v} is not a scaled byte")));
        }
        bytes.push(scaled as u8);
    }
    std::fs::write(path, bytes)?;
    Ok(())
}

/// Writes class ids as an IDX label file. Labels must fit in a byte.
pub fn write_idx_labels(labels: &[usize], path: &Path) -> Result<()> {
    if let Some(&bad) = labels.iter().find(|&&l| l > 255) {
        return Err(Error::Data(format!("label {bad} does not fit in an IDX byte")));
    }
    let mut bytes = Vec::with_capacity(8 + labels.len());
    bytes.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
    bytes.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    bytes.extend(labels.iter().map(|&l| l as u8));
    std::fs::write(path, bytes)?;
    Ok(())
}

/// Loads an IDX image/label file pair into a dataset.
///
/// Pixels are scaled to [0,1] by dividing by 255; the class count is inferred
/// as the highest label plus one.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<Dataset> {
    let (count, rows, cols, pixels) = read_idx_images(images_path)?;
    let labels = read_idx_labels(labels_path)?;
    if labels.len() != count {
        return Err(Error::Data(format!(
            "image count ({count}) does not match label count ({})",
            labels.len()
        )));
    }
    let dim = rows * cols;
    let features = Array2::from_shape_vec(
        (count, dim),
        pixels.into_iter().map(|b| b as f64 / 255.0).collect(),
    )
    .map_err(|e| Error::Data(format!("image reshape failed: {e}")))?;
    let num_classes = labels.iter().max().map_or(0, |&m| m + 1);
    Dataset::new(features, labels, num_classes)
}

/// Samples `per_class` points per class from K isotropic unit-variance
/// Gaussians and returns the dataset together with its Bayes oracle.
///
/// Means sit at `separation * e_(k mod D)`, sign-flipped once the axes are
/// exhausted, so any two means are at least `separation` apart. Requires
/// K <= 2D. Samples are laid out class by class; labels are the generating
/// component, exactly `per_class` of each.
pub fn make_blobs(
    num_classes: usize,
    per_class: usize,
    dim: usize,
    separation: f64,
    seed: u64,
) -> Result<(Dataset, BayesOracle)> {
    if num_classes < 2 {
        return Err(Error::Config(format!("blobs need at least 2 classes, got {num_classes}")));
    }
    if per_class == 0 {
        return Err(Error::Config("blobs need at least 1 sample per class".into()));
    }
    if dim == 0 {
        return Err(Error::Config("blobs need at least 1 dimension".into()));
    }
    if !separation.is_finite() || separation <= 0.0 {
        return Err(Error::Config(format!("blob separation must be positive, got {separation}")));
    }
    if num_classes > 2 * dim {
        return Err(Error::Config(format!(
            "blobs support at most 2*dim distinct means ({} classes > 2*{dim})",
            num_classes
        )));
    }
    let mut means = Array2::zeros((num_classes, dim));
    for k in 0..num_classes {
        let sign = if k < dim { 1.0 } else { -1.0 };
        means[[k, k % dim]] = sign * separation;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = num_classes * per_class;
    let mut values = Vec::with_capacity(n * dim);
    let mut labels = Vec::with_capacity(n);
    for k in 0..num_classes {
        for _ in 0..per_class {
            for d in 0..dim {
                let noise: f64 = rng.sample(StandardNormal);
                values.push(means[[k, d]] + noise);
            }
            labels.push(k);
        }
    }
    let features = Array2::from_shape_vec((n, dim), values)
        .map_err(|e| Error::Data(format!("blob reshape failed: {e}")))?;
    let oracle = BayesOracle {
        means,
        variance: 1.0,
        priors: vec![1.0 / num_classes as f64; num_classes],
    };
    Ok((Dataset::new(features, labels, num_classes)?, oracle))
}

/// Splits index count `n` into consecutive run sizes: floor(fraction * n)
/// each, remainder distributed one per subset from the front.
fn split_sizes(n: usize, fractions: &[f64]) -> Vec<usize> {
    let mut sizes: Vec<usize> = fractions.iter().map(|f| (f * n as f64).floor() as usize).collect();
    let mut remainder = n - sizes.iter().sum::<usize>();
    for s in sizes.iter_mut() {
        if remainder == 0 {
            break;
        }
        *s += 1;
        remainder -= 1;
    }
    sizes
}

/// Splits a dataset into disjoint subsets covering it, shuffled by the plan
/// seed and sized by the plan fractions.
pub fn split(dataset: &Dataset, plan: &SplitPlan) -> Result<Vec<Dataset>> {
    if plan.fractions.is_empty() {
        return Err(Error::Config("split needs at least one fraction".into()));
    }
    if let Some(&bad) = plan.fractions.iter().find(|&&f| !(0.0..=1.0).contains(&f)) {
        return Err(Error::Config(format!("split fraction {bad} outside [0,1]")));
    }
    let sum: f64 = plan.fractions.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!("split fractions sum to {sum}, expected 1")));
    }
    let sizes = split_sizes(dataset.len(), &plan.fractions);
    if let Some(pos) = sizes.iter().position(|&s| s == 0) {
        return Err(Error::Config(format!(
            "split fraction {} yields an empty subset for {} samples",
            plan.fractions[pos],
            dataset.len()
        )));
    }
    let perm = seeded_permutation(dataset.len(), plan.seed);
    let mut out = Vec::with_capacity(sizes.len());
    let mut offset = 0;
    for size in sizes {
        out.push(dataset.select(&perm[offset..offset + size])?);
        offset += size;
    }
    Ok(out)
}

/// Partitions a dataset into `n_partitions` disjoint, jointly exhaustive
/// parts whose sizes differ by at most one; earlier parts take the remainder.
pub fn partition(dataset: &Dataset, plan: &PartitionPlan) -> Result<Vec<Dataset>> {
    if plan.n_partitions < 2 {
        return Err(Error::Config(format!(
            "partitioning needs at least 2 parts, got {}",
            plan.n_partitions
        )));
    }
    if plan.n_partitions > dataset.len() {
        return Err(Error::Config(format!(
            "cannot cut {} samples into {} partitions",
            dataset.len(),
            plan.n_partitions
        )));
    }
    let n = dataset.len();
    let base = n / plan.n_partitions;
    let remainder = n % plan.n_partitions;
    let perm = seeded_permutation(n, plan.seed);
    let mut out = Vec::with_capacity(plan.n_partitions);
    let mut offset = 0;
    for p in 0..plan.n_partitions {
        let size = base + usize::from(p < remainder);
        out.push(dataset.select(&perm[offset..offset + size])?);
        offset += size;
    }
    Ok(out)
}

/// Writes the dataset as CSV with header `feature_0..feature_{D-1},label`.
/// Feature values use the shortest round-trip decimal form.
pub fn write_csv(dataset: &Dataset, path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let mut header: Vec<String> = (0..dataset.dim()).map(|d| format!("feature_{d}")).collect();
    header.push("label".into());
    writer
        .write_record(&header)
        .and_then(|_| {
            for (row, &label) in dataset.features.rows().into_iter().zip(&dataset.labels) {
                let mut record: Vec<String> = row.iter().map(|v| v.to_string()).collect();
                record.push(label.to_string());
                writer.write_record(&record)?;
            }
            writer.flush().map_err(csv::Error::from)
        })
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

/// Reads a dataset written by [`write_csv`]; the class count is inferred as
/// the highest label plus one.
pub fn read_csv(path: &Path) -> Result<Dataset> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?
        .clone();
    if headers.len() < 2 || headers.iter().next_back() != Some("label") {
        return Err(Error::Data(format!(
            "{}: expected header feature_0..feature_D-1,label",
            path.display()
        )));
    }
    let dim = headers.len() - 1;
    for (d, name) in headers.iter().take(dim).enumerate() {
        if name != format!("feature_{d}") {
            return Err(Error::Data(format!(
                "{}: unexpected column {name}, expected feature_{d}",
                path.display()
            )));
        }
    }
    let mut values = Vec::new();
    let mut labels = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        if record.len() != dim + 1 {
            return Err(Error::Data(format!(
                "{}: row has {} fields, expected {}",
                path.display(),
                record.len(),
                dim + 1
            )));
        }
        for field in record.iter().take(dim) {
            values.push(field.parse::<f64>().map_err(|e| {
                Error::Data(format!("{}: bad feature value {field}: {e}", path.display()))
            })?);
        }
        let label_field = &record[dim];
        labels.push(label_field.parse::<usize>().map_err(|e| {
            Error::Data(format!("{}: bad label {label_field}: {e}", path.display()))
        })?);
    }
    let n = labels.len();
    let features = Array2::from_shape_vec((n, dim), values)
        .map_err(|e| Error::Data(format!("csv reshape failed: {e}")))?;
    let num_classes = labels.iter().max().map_or(0, |&m| m + 1);
    Dataset::new(features, labels, num_classes)
}
