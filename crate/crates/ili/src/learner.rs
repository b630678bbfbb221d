//! From-scratch classifiers with softmax outputs.
//!
//! Two architectures: multinomial logistic regression and a one-hidden-layer
//! tanh MLP. Both train by mini-batch gradient descent with momentum on
//! cross-entropy loss, in double precision, with softmax computed after max
//! subtraction. Weight initialization and batch shuffling are fully seeded;
//! identical spec, data, and seeds give bit-identical weights. Models are
//! meant to be rebuilt from scratch every improvement iteration, so nothing
//! carries over between fits except what the caller passes in.

use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{argmax, permutation_with_rng, BayesOracle};
use crate::error::{Error, Result};
use crate::noise::label_accuracy;

const CHECKPOINT_FORMAT: &str = "ili-model-v1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Architecture {
    Softmax,
    Mlp { hidden_units: usize },
}

/// Optional input transform applied to each training batch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Augmentation {
    None,
    /// Shift square images by up to `max_shift` pixels per axis, zero-filled.
    /// Requires the feature dimension to equal `image_side` squared.
    PixelShift { max_shift: usize, image_side: usize },
}

/// Everything needed to build and train a classifier, minus the data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearnerSpec {
    pub architecture: Architecture,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Momentum coefficient in [0, 1).
    pub momentum: f64,
    pub weight_init_seed: u64,
    pub augmentation: Augmentation,
}

impl Default for LearnerSpec {
    fn default() -> Self {
        LearnerSpec {
            architecture: Architecture::Softmax,
            epochs: 10,
            batch_size: 32,
            learning_rate: 0.1,
            momentum: 0.9,
            weight_init_seed: 0,
            augmentation: Augmentation::None,
        }
    }
}

impl LearnerSpec {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning_rate must be positive and finite, got {}",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config(format!("momentum {} outside [0,1)", self.momentum)));
        }
        if let Architecture::Mlp { hidden_units } = self.architecture {
            if hidden_units == 0 {
                return Err(Error::Config("hidden_units must be at least 1".into()));
            }
        }
        if let Augmentation::PixelShift { image_side, .. } = self.augmentation {
            if image_side == 0 {
                return Err(Error::Config("image_side must be at least 1".into()));
            }
        }
        Ok(())
    }
}

/// Weight tensors; also reused as the container for gradients and momentum
/// velocities, which share the shapes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
enum Weights {
    Softmax { w: Array2<f64>, b: Array1<f64> },
    Mlp { w1: Array2<f64>, b1: Array1<f64>, w2: Array2<f64>, b2: Array1<f64> },
}

impl Weights {
    fn zeros_like(&self) -> Weights {
        match self {
            Weights::Softmax { w, b } => Weights::Softmax {
                w: Array2::zeros(w.dim()),
                b: Array1::zeros(b.len()),
            },
            Weights::Mlp { w1, b1, w2, b2 } => Weights::Mlp {
                w1: Array2::zeros(w1.dim()),
                b1: Array1::zeros(b1.len()),
                w2: Array2::zeros(w2.dim()),
                b2: Array1::zeros(b2.len()),
            },
        }
    }
}

/// Argmax predictions with the softmax value of the winning class.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictionResult {
    pub predicted: Vec<usize>,
    /// Per-sample confidence: the maximum softmax probability, in (0, 1].
    pub confidence: Vec<f64>,
    /// N x K matrix of class probabilities; rows sum to 1 within 1e-6.
    pub proba: Array2<f64>,
}

impl PredictionResult {
    pub fn len(&self) -> usize {
        self.predicted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.predicted.is_empty()
    }

    pub fn mean_confidence(&self) -> f64 {
        if self.confidence.is_empty() {
            return 0.0;
        }
        self.confidence.iter().sum::<f64>() / self.confidence.len() as f64
    }
}

/// A classifier: spec plus trained (or freshly initialized) weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearnerModel {
    pub spec: LearnerSpec,
    input_dim: usize,
    num_classes: usize,
    weights: Weights,
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    model: LearnerModel,
}

impl LearnerModel {
    /// Fresh model with scaled-uniform weights (bounds sqrt(6/(fan_in+fan_out)))
    /// drawn from the spec's init seed, biases zero. Carries no state from any
    /// previously trained model.
    pub fn initialize(spec: &LearnerSpec, input_dim: usize, num_classes: usize) -> Result<Self> {
        spec.validate()?;
        if input_dim == 0 {
            return Err(Error::Config("input_dim must be at least 1".into()));
        }
        if num_classes < 2 {
            return Err(Error::Config(format!("need at least 2 classes, got {num_classes}")));
        }
        if let Augmentation::PixelShift { image_side, .. } = spec.augmentation {
            if image_side * image_side != input_dim {
                return Err(Error::Config(format!(
                    "pixel shift expects image_side^2 == input_dim, got {image_side}^2 != {input_dim}"
                )));
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(spec.weight_init_seed);
        let weights = match spec.architecture {
            Architecture::Softmax => Weights::Softmax {
                w: glorot(&mut rng, input_dim, num_classes),
                b: Array1::zeros(num_classes),
            },
            Architecture::Mlp { hidden_units } => Weights::Mlp {
                w1: glorot(&mut rng, input_dim, hidden_units),
                b1: Array1::zeros(hidden_units),
                w2: glorot(&mut rng, hidden_units, num_classes),
                b2: Array1::zeros(num_classes),
            },
        };
        Ok(LearnerModel { spec: spec.clone(), input_dim, num_classes, weights })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn parameter_count(&self) -> usize {
        match &self.weights {
            Weights::Softmax { w, b } => w.len() + b.len(),
            Weights::Mlp { w1, b1, w2, b2 } => w1.len() + b1.len() + w2.len() + b2.len(),
        }
    }

    /// Runs `epochs` passes of mini-batch SGD with momentum on cross-entropy.
    /// Batch order reshuffles every epoch from `training_seed`; augmentation
    /// draws come from the same stream. Consumes and returns the model.
    pub fn fit(mut self, x: ArrayView2<f64>, y: &[usize], training_seed: u64) -> Result<Self> {
        self.check_features(x)?;
        if x.nrows() == 0 {
            return Err(Error::Data("training set is empty".into()));
        }
        if x.nrows() != y.len() {
            return Err(Error::Data(format!(
                "feature rows ({}) do not match label count ({})",
                x.nrows(),
                y.len()
            )));
        }
        if let Some(&bad) = y.iter().find(|&&l| l >= self.num_classes) {
            return Err(Error::Data(format!(
                "label {bad} out of range for {} classes",
                self.num_classes
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(training_seed);
        let mut velocity = self.weights.zeros_like();
        let n = x.nrows();
        for epoch in 0..self.spec.epochs {
            let order = permutation_with_rng(n, &mut rng);
            for (batch_index, chunk) in order.chunks(self.spec.batch_size).enumerate() {
                let mut xb = x.select(Axis(0), chunk);
                let yb: Vec<usize> = chunk.iter().map(|&i| y[i]).collect();
                if let Augmentation::PixelShift { max_shift, image_side } = self.spec.augmentation {
                    xb = shift_batch(&xb, image_side, max_shift, &mut rng);
                }
                let (loss, grad) = self.loss_and_grad(&xb.view(), &yb);
                if !loss.is_finite() {
                    return Err(Error::NonFiniteLoss { epoch, batch: batch_index });
                }
                self.apply_update(&grad, &mut velocity);
            }
        }
        Ok(self)
    }

    /// Deterministic forward pass: probabilities, argmax labels, confidences.
    pub fn predict_proba(&self, x: ArrayView2<f64>) -> Result<PredictionResult> {
        self.check_features(x)?;
        let logits = self.forward_logits(&x);
        let proba = softmax_rows(&logits);
        let mut predicted = Vec::with_capacity(proba.nrows());
        let mut confidence = Vec::with_capacity(proba.nrows());
        for row in proba.rows() {
            let slice = row.as_slice().expect("probability rows are contiguous");
            let best = argmax(slice);
            predicted.push(best);
            confidence.push(slice[best]);
        }
        Ok(PredictionResult { predicted, confidence, proba })
    }

    /// Accuracy against true labels.
    pub fn evaluate(&self, x: ArrayView2<f64>, y_true: &[usize]) -> Result<f64> {
        if x.nrows() == 0 {
            return Err(Error::Data("evaluation set is empty".into()));
        }
        if x.nrows() != y_true.len() {
            return Err(Error::Data(format!(
                "feature rows ({}) do not match label count ({})",
                x.nrows(),
                y_true.len()
            )));
        }
        let pred = self.predict_proba(x)?;
        label_accuracy(&pred.predicted, y_true)
    }

    /// Accuracy restricted to samples whose true label is `class_id`.
    pub fn per_class_accuracy(
        &self,
        x: ArrayView2<f64>,
        y_true: &[usize],
        class_id: usize,
    ) -> Result<f64> {
        if x.nrows() != y_true.len() {
            return Err(Error::Data(format!(
                "feature rows ({}) do not match label count ({})",
                x.nrows(),
                y_true.len()
            )));
        }
        let indices: Vec<usize> = y_true
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == class_id)
            .map(|(i, _)| i)
            .collect();
        if indices.is_empty() {
            return Err(Error::Data(format!(
                "no samples of class {class_id} in the evaluation set"
            )));
        }
        let subset = x.select(Axis(0), &indices);
        let pred = self.predict_proba(subset.view())?;
        let hits = pred.predicted.iter().filter(|&&p| p == class_id).count();
        Ok(hits as f64 / indices.len() as f64)
    }

    /// Mean cross-entropy loss on a labelled set.
    pub fn loss_on(&self, x: ArrayView2<f64>, y: &[usize]) -> Result<f64> {
        self.check_features(x)?;
        if x.nrows() == 0 || x.nrows() != y.len() {
            return Err(Error::Data("loss needs a non-empty matched set".into()));
        }
        let (loss, _) = self.loss_and_grad(&x, y);
        Ok(loss)
    }

    /// Loss and its gradient, flattened in the documented parameter order.
    /// Exposed so external checks can compare against finite differences.
    pub fn loss_and_grad_flat(&self, x: ArrayView2<f64>, y: &[usize]) -> Result<(f64, Vec<f64>)> {
        self.check_features(x)?;
        if x.nrows() == 0 || x.nrows() != y.len() {
            return Err(Error::Data("gradient needs a non-empty matched set".into()));
        }
        let (loss, grad) = self.loss_and_grad(&x, y);
        Ok((loss, flatten(&grad)))
    }

    /// Parameters flattened as: softmax w (row-major), b; MLP w1, b1, w2, b2.
    pub fn flat_params(&self) -> Vec<f64> {
        flatten(&self.weights)
    }

    /// Inverse of [`flat_params`](Self::flat_params).
    pub fn set_flat_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.parameter_count() {
            return Err(Error::Data(format!(
                "expected {} parameters, got {}",
                self.parameter_count(),
                params.len()
            )));
        }
        let mut offset = 0;
        let mut take = |dst: &mut [f64]| {
            dst.copy_from_slice(&params[offset..offset + dst.len()]);
            offset += dst.len();
        };
        match &mut self.weights {
            Weights::Softmax { w, b } => {
                take(w.as_slice_mut().expect("weights are contiguous"));
                take(b.as_slice_mut().expect("biases are contiguous"));
            }
            Weights::Mlp { w1, b1, w2, b2 } => {
                take(w1.as_slice_mut().expect("weights are contiguous"));
                take(b1.as_slice_mut().expect("biases are contiguous"));
                take(w2.as_slice_mut().expect("weights are contiguous"));
                take(b2.as_slice_mut().expect("biases are contiguous"));
            }
        }
        Ok(())
    }

    /// Writes spec and weights as versioned JSON; doubles round-trip exactly.
    pub fn save_checkpoint(&self, path: &Path) -> Result<()> {
        let checkpoint = Checkpoint { format: CHECKPOINT_FORMAT.into(), model: self.clone() };
        let file = std::fs::File::create(path)
            .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        serde_json::to_writer(std::io::BufWriter::new(file), &checkpoint)
            .map_err(|e| Error::Data(format!("{}: {e}", path.display())))
    }

    pub fn load_checkpoint(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)
            .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        let checkpoint: Checkpoint = serde_json::from_reader(std::io::BufReader::new(file))
            .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        if checkpoint.format != CHECKPOINT_FORMAT {
            return Err(Error::Data(format!(
                "checkpoint format {} is not {CHECKPOINT_FORMAT}",
                checkpoint.format
            )));
        }
        Ok(checkpoint.model)
    }

    fn check_features(&self, x: ArrayView2<f64>) -> Result<()> {
        if x.ncols() != self.input_dim {
            return Err(Error::Data(format!(
                "model expects {} features, got {}",
                self.input_dim,
                x.ncols()
            )));
        }
        Ok(())
    }

    fn forward_logits(&self, x: &ArrayView2<f64>) -> Array2<f64> {
        match &self.weights {
            Weights::Softmax { w, b } => x.dot(w) + b,
            Weights::Mlp { w1, b1, w2, b2 } => {
                let hidden = (x.dot(w1) + b1).mapv(f64::tanh);
                hidden.dot(w2) + b2
            }
        }
    }

    /// Mean cross-entropy and its gradient over one batch.
    fn loss_and_grad(&self, x: &ArrayView2<f64>, y: &[usize]) -> (f64, Weights) {
        let batch = x.nrows() as f64;
        match &self.weights {
            Weights::Softmax { w, b } => {
                let logits = x.dot(w) + b;
                let (loss, mut dz) = softmax_loss_grad(&logits, y);
                dz /= batch;
                let gw = x.t().dot(&dz);
                let gb = dz.sum_axis(Axis(0));
                (loss, Weights::Softmax { w: gw, b: gb })
            }
            Weights::Mlp { w1, b1, w2, b2 } => {
                let hidden = (x.dot(w1) + b1).mapv(f64::tanh);
                let logits = hidden.dot(w2) + b2;
                let (loss, mut dz) = softmax_loss_grad(&logits, y);
                dz /= batch;
                let gw2 = hidden.t().dot(&dz);
                let gb2 = dz.sum_axis(Axis(0));
                // tanh'(a) = 1 - tanh(a)^2
                let dhidden = dz.dot(&w2.t()) * (1.0 - &hidden * &hidden);
                let gw1 = x.t().dot(&dhidden);
                let gb1 = dhidden.sum_axis(Axis(0));
                (loss, Weights::Mlp { w1: gw1, b1: gb1, w2: gw2, b2: gb2 })
            }
        }
    }

    /// Heavy-ball update: v = momentum * v + g; theta -= learning_rate * v.
    fn apply_update(&mut self, grad: &Weights, velocity: &mut Weights) {
        let mu = self.spec.momentum;
        let lr = self.spec.learning_rate;
        match (&mut self.weights, grad, velocity) {
            (
                Weights::Softmax { w, b },
                Weights::Softmax { w: gw, b: gb },
                Weights::Softmax { w: vw, b: vb },
            ) => {
                vw.zip_mut_with(gw, |v, &g| *v = mu * *v + g);
                vb.zip_mut_with(gb, |v, &g| *v = mu * *v + g);
                w.zip_mut_with(vw, |p, &v| *p -= lr * v);
                b.zip_mut_with(vb, |p, &v| *p -= lr * v);
            }
            (
                Weights::Mlp { w1, b1, w2, b2 },
                Weights::Mlp { w1: gw1, b1: gb1, w2: gw2, b2: gb2 },
                Weights::Mlp { w1: vw1, b1: vb1, w2: vw2, b2: vb2 },
            ) => {
                vw1.zip_mut_with(gw1, |v, &g| *v = mu * *v + g);
                vb1.zip_mut_with(gb1, |v, &g| *v = mu * *v + g);
                vw2.zip_mut_with(gw2, |v, &g| *v = mu * *v + g);
                vb2.zip_mut_with(gb2, |v, &g| *v = mu * *v + g);
                w1.zip_mut_with(vw1, |p, &v| *p -= lr * v);
                b1.zip_mut_with(vb1, |p, &v| *p -= lr * v);
                w2.zip_mut_with(vw2, |p, &v| *p -= lr * v);
                b2.zip_mut_with(vb2, |p, &v| *p -= lr * v);
            }
            _ => unreachable!("gradient and velocity shapes always match the weights"),
        }
    }
}

fn glorot(rng: &mut ChaCha8Rng, fan_in: usize, fan_out: usize) -> Array2<f64> {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let mut w = Array2::zeros((fan_in, fan_out));
    for v in w.iter_mut() {
        *v = rng.gen_range(-bound..bound);
    }
    w
}

fn flatten(weights: &Weights) -> Vec<f64> {
    let mut out = Vec::new();
    match weights {
        Weights::Softmax { w, b } => {
            out.extend(w.iter());
            out.extend(b.iter());
        }
        Weights::Mlp { w1, b1, w2, b2 } => {
            out.extend(w1.iter());
            out.extend(b1.iter());
            out.extend(w2.iter());
            out.extend(b2.iter());
        }
    }
    out
}

/// Row-wise softmax with max subtraction.
fn softmax_rows(logits: &Array2<f64>) -> Array2<f64> {
    let mut out = logits.clone();
    for mut row in out.rows_mut() {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

/// Mean cross-entropy via log-softmax, plus the un-normalized logit gradient
/// (softmax probabilities minus the one-hot targets).
fn softmax_loss_grad(logits: &Array2<f64>, y: &[usize]) -> (f64, Array2<f64>) {
    let mut dz = logits.clone();
    let mut loss = 0.0;
    for (mut row, &label) in dz.rows_mut().into_iter().zip(y) {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let log_sum = row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        loss -= row[label] - max - log_sum;
        for v in row.iter_mut() {
            *v = (*v - max - log_sum).exp();
        }
        row[label] -= 1.0;
    }
    (loss / y.len() as f64, dz)
}

/// Shifts each row's square image by per-sample offsets drawn from `rng`
/// (dx then dy, each uniform in [-max_shift, max_shift]), zero-filling.
fn shift_batch(
    batch: &Array2<f64>,
    image_side: usize,
    max_shift: usize,
    rng: &mut ChaCha8Rng,
) -> Array2<f64> {
    let mut out = Array2::zeros(batch.dim());
    let shift = max_shift as i64;
    for (row_in, mut row_out) in batch.rows().into_iter().zip(out.rows_mut()) {
        let dx = rng.gen_range(-shift..=shift);
        let dy = rng.gen_range(-shift..=shift);
        shift_image(
            row_in.as_slice().expect("batch rows are contiguous"),
            row_out.as_slice_mut().expect("batch rows are contiguous"),
            image_side,
            dx,
            dy,
        );
    }
    out
}

/// out[y][x] = in[y-dy][x-dx] where in range, else 0.
pub(crate) fn shift_image(input: &[f64], output: &mut [f64], side: usize, dx: i64, dy: i64) {
    for y in 0..side as i64 {
        for x in 0..side as i64 {
            let sy = y - dy;
            let sx = x - dx;
            let v = if (0..side as i64).contains(&sy) && (0..side as i64).contains(&sx) {
                input[(sy * side as i64 + sx) as usize]
            } else {
                0.0
            };
            output[(y * side as i64 + x) as usize] = v;
        }
    }
}

/// Anything the improvement engine can train from scratch and ask for
/// predictions. `init_seed` replaces any seed inside the learner so every
/// iteration starts from fresh, reproducible weights.
pub trait Learner {
    type Model;

    fn train(
        &self,
        x: ArrayView2<f64>,
        y: &[usize],
        num_classes: usize,
        init_seed: u64,
        fit_seed: u64,
    ) -> Result<Self::Model>;

    fn predict(&self, model: &Self::Model, x: ArrayView2<f64>) -> Result<PredictionResult>;
}

/// The default learner: builds a fresh [`LearnerModel`] per call.
#[derive(Clone, Debug)]
pub struct SgdLearner {
    pub spec: LearnerSpec,
}

impl SgdLearner {
    pub fn new(spec: LearnerSpec) -> Self {
        SgdLearner { spec }
    }
}

impl Learner for SgdLearner {
    type Model = LearnerModel;

    fn train(
        &self,
        x: ArrayView2<f64>,
        y: &[usize],
        num_classes: usize,
        init_seed: u64,
        fit_seed: u64,
    ) -> Result<LearnerModel> {
        let mut spec = self.spec.clone();
        spec.weight_init_seed = init_seed;
        LearnerModel::initialize(&spec, x.ncols(), num_classes)?.fit(x, y, fit_seed)
    }

    fn predict(&self, model: &LearnerModel, x: ArrayView2<f64>) -> Result<PredictionResult> {
        model.predict_proba(x)
    }
}

// The blob oracle doubles as a perfect learner: training ignores the labels
// and returns the generative classifier. Useful for isolating engine
// behavior from model error.
impl Learner for BayesOracle {
    type Model = BayesOracle;

    fn train(
        &self,
        x: ArrayView2<f64>,
        _y: &[usize],
        num_classes: usize,
        _init_seed: u64,
        _fit_seed: u64,
    ) -> Result<BayesOracle> {
        if num_classes != self.means.nrows() {
            return Err(Error::Data(format!(
                "oracle covers {} classes, asked for {num_classes}",
                self.means.nrows()
            )));
        }
        if x.ncols() != self.means.ncols() {
            return Err(Error::Data(format!(
                "oracle expects {} features, got {}",
                self.means.ncols(),
                x.ncols()
            )));
        }
        Ok(self.clone())
    }

    fn predict(&self, model: &BayesOracle, x: ArrayView2<f64>) -> Result<PredictionResult> {
        model.predict(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::make_blobs;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use proptest::prelude::*;
    use rand::Rng;

    fn softmax_spec() -> LearnerSpec {
        LearnerSpec { epochs: 50, batch_size: 16, learning_rate: 0.2, ..LearnerSpec::default() }
    }

    #[test]
    fn initialize_is_seed_deterministic() {
        let spec = LearnerSpec { weight_init_seed: 9, ..softmax_spec() };
        let a = LearnerModel::initialize(&spec, 4, 3).unwrap();
        let b = LearnerModel::initialize(&spec, 4, 3).unwrap();
        assert_eq!(a, b);
        let c = LearnerModel::initialize(
            &LearnerSpec { weight_init_seed: 10, ..spec },
            4,
            3,
        )
        .unwrap();
        assert_ne!(a.flat_params(), c.flat_params());
    }

    #[test]
    fn softmax_parameter_shapes() {
        let model = LearnerModel::initialize(&softmax_spec(), 784, 10).unwrap();
        assert_eq!(model.parameter_count(), 784 * 10 + 10);
    }

    #[test]
    fn mlp_parameter_count_is_101770_for_mnist_shapes() {
        let spec = LearnerSpec {
            architecture: Architecture::Mlp { hidden_units: 128 },
            ..LearnerSpec::default()
        };
        let model = LearnerModel::initialize(&spec, 784, 10).unwrap();
        assert_eq!(model.parameter_count(), 101_770);
        assert_eq!(model.parameter_count(), 784 * 128 + 128 + 128 * 10 + 10);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let spec = LearnerSpec { epochs: 0, ..LearnerSpec::default() };
        assert!(LearnerModel::initialize(&spec, 4, 2).is_err());
        let spec = LearnerSpec { batch_size: 0, ..LearnerSpec::default() };
        assert!(LearnerModel::initialize(&spec, 4, 2).is_err());
        let spec = LearnerSpec { learning_rate: 0.0, ..LearnerSpec::default() };
        assert!(LearnerModel::initialize(&spec, 4, 2).is_err());
        let spec = LearnerSpec { momentum: 1.0, ..LearnerSpec::default() };
        assert!(LearnerModel::initialize(&spec, 4, 2).is_err());
        let spec = LearnerSpec {
            augmentation: Augmentation::PixelShift { max_shift: 1, image_side: 3 },
            ..LearnerSpec::default()
        };
        assert!(LearnerModel::initialize(&spec, 8, 2).is_err());
        assert!(LearnerModel::initialize(&LearnerSpec::default(), 0, 2).is_err());
        assert!(LearnerModel::initialize(&LearnerSpec::default(), 4, 1).is_err());
    }

    #[test]
    fn zero_weight_softmax_predicts_uniformly() {
        let mut model = LearnerModel::initialize(&softmax_spec(), 3, 4).unwrap();
        model.set_flat_params(&vec![0.0; model.parameter_count()]).unwrap();
        let x = array![[0.3, -1.0, 2.0], [5.0, 5.0, 5.0]];
        let pred = model.predict_proba(x.view()).unwrap();
        for row in pred.proba.rows() {
            for &p in row {
                assert_eq!(p, 0.25);
            }
        }
        assert_eq!(pred.confidence, vec![0.25, 0.25]);
    }

    // Hand-set 2x2 weights: W = [[0.5, -0.25], [1.0, 2.0]], b = [0.1, -0.1].
    // For x = [2, 1]: logits (2.1, 1.4); for x = [0, 0]: logits (0.1, -0.1).
    // Probabilities below were computed independently from those logits.
    #[test]
    fn softmax_probabilities_match_hand_computation() {
        let mut model = LearnerModel::initialize(&softmax_spec(), 2, 2).unwrap();
        model
            .set_flat_params(&[0.5, -0.25, 1.0, 2.0, 0.1, -0.1])
            .unwrap();
        let x = array![[2.0, 1.0], [0.0, 0.0]];
        let pred = model.predict_proba(x.view()).unwrap();
        assert_abs_diff_eq!(pred.proba[[0, 0]], 0.668_187_772_168_166_2, epsilon = 1e-14);
        assert_abs_diff_eq!(pred.proba[[0, 1]], 0.33181222783183384, epsilon = 1e-14);
        assert_abs_diff_eq!(pred.proba[[1, 0]], 0.549_833_997_312_478, epsilon = 1e-14);
        assert_abs_diff_eq!(pred.proba[[1, 1]], 0.450_166_002_687_522_1, epsilon = 1e-14);
        assert_eq!(pred.predicted, vec![0, 0]);
    }

    #[test]
    fn separable_blobs_reach_high_training_accuracy() {
        let (ds, _) = make_blobs(2, 60, 2, 6.0, 3).unwrap();
        let model = LearnerModel::initialize(&softmax_spec(), 2, 2)
            .unwrap()
            .fit(ds.features.view(), &ds.labels, 7)
            .unwrap();
        assert!(model.evaluate(ds.features.view(), &ds.labels).unwrap() >= 0.99);
    }

    #[test]
    fn training_reduces_the_loss_on_separable_data() {
        let (ds, _) = make_blobs(3, 40, 2, 5.0, 11).unwrap();
        let fresh = LearnerModel::initialize(&softmax_spec(), 2, 3).unwrap();
        let initial = fresh.loss_on(ds.features.view(), &ds.labels).unwrap();
        let trained = fresh.clone().fit(ds.features.view(), &ds.labels, 5).unwrap();
        let after = trained.loss_on(ds.features.view(), &ds.labels).unwrap();
        assert!(after < initial, "loss went {initial} -> {after}");
    }

    #[test]
    fn fit_is_bit_deterministic() {
        let (ds, _) = make_blobs(3, 30, 2, 4.0, 2).unwrap();
        let spec = LearnerSpec {
            architecture: Architecture::Mlp { hidden_units: 8 },
            epochs: 5,
            ..LearnerSpec::default()
        };
        let run = || {
            LearnerModel::initialize(&spec, 2, 3)
                .unwrap()
                .fit(ds.features.view(), &ds.labels, 77)
                .unwrap()
        };
        assert_eq!(run().flat_params(), run().flat_params());
        let other = LearnerModel::initialize(&spec, 2, 3)
            .unwrap()
            .fit(ds.features.view(), &ds.labels, 78)
            .unwrap();
        assert_ne!(run().flat_params(), other.flat_params());
    }

    #[test]
    fn divergent_training_reports_epoch_and_batch() {
        let (ds, _) = make_blobs(2, 40, 2, 4.0, 6).unwrap();
        // overflowed weights make the logits infinite and the loss NaN on
        // the very first batch
        let mut model = LearnerModel::initialize(&LearnerSpec::default(), 2, 2).unwrap();
        model.set_flat_params(&[f64::MAX, f64::MAX, f64::MAX, f64::MAX, 0.0, 0.0]).unwrap();
        let err = model.fit(ds.features.view(), &ds.labels, 1).unwrap_err();
        match err {
            Error::NonFiniteLoss { epoch, batch } => {
                assert_eq!((epoch, batch), (0, 0));
            }
            other => panic!("expected NonFiniteLoss, got {other:?}"),
        }
        assert!(Error::NonFiniteLoss { epoch: 0, batch: 0 }.to_string().contains("epoch 0"));
    }

    #[test]
    fn dimension_mismatches_are_reported() {
        let model = LearnerModel::initialize(&softmax_spec(), 3, 2).unwrap();
        let x = array![[1.0, 2.0]];
        assert!(model.predict_proba(x.view()).is_err());
        let x3 = array![[1.0, 2.0, 3.0]];
        assert!(model.clone().fit(x3.view(), &[0, 1], 0).is_err());
        assert!(model.clone().fit(x3.view(), &[5], 0).is_err());
    }

    #[test]
    fn gradient_matches_finite_differences_on_a_tiny_mlp() {
        let spec = LearnerSpec {
            architecture: Architecture::Mlp { hidden_units: 2 },
            weight_init_seed: 3,
            ..LearnerSpec::default()
        };
        let mut model = LearnerModel::initialize(&spec, 3, 2).unwrap();
        let x = array![[0.5, -1.0, 2.0], [1.5, 0.3, -0.7], [-0.2, 0.8, 0.1]];
        let y = vec![0, 1, 0];
        let (_, grad) = model.loss_and_grad_flat(x.view(), &y).unwrap();
        let params = model.flat_params();
        let h = 1e-5;
        for (i, analytic) in grad.iter().enumerate() {
            let mut plus = params.clone();
            plus[i] += h;
            model.set_flat_params(&plus).unwrap();
            let up = model.loss_on(x.view(), &y).unwrap();
            let mut minus = params.clone();
            minus[i] -= h;
            model.set_flat_params(&minus).unwrap();
            let down = model.loss_on(x.view(), &y).unwrap();
            let numeric = (up - down) / (2.0 * h);
            let rel = (numeric - analytic).abs() / (numeric.abs() + analytic.abs()).max(1e-8);
            assert!(rel < 1e-4, "param {i}: analytic {analytic}, numeric {numeric}");
        }
    }

    #[test]
    fn checkpoints_round_trip_exactly() {
        let (ds, _) = make_blobs(3, 20, 2, 4.0, 8).unwrap();
        let spec = LearnerSpec {
            architecture: Architecture::Mlp { hidden_units: 5 },
            epochs: 3,
            ..LearnerSpec::default()
        };
        let model = LearnerModel::initialize(&spec, 2, 3)
            .unwrap()
            .fit(ds.features.view(), &ds.labels, 4)
            .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        model.save_checkpoint(&path).unwrap();
        let restored = LearnerModel::load_checkpoint(&path).unwrap();
        assert_eq!(model, restored);

        // version field is enforced
        let text = std::fs::read_to_string(&path).unwrap();
        let tampered = text.replace(CHECKPOINT_FORMAT, "ili-model-v0");
        std::fs::write(&path, tampered).unwrap();
        assert!(LearnerModel::load_checkpoint(&path).is_err());
    }

    #[test]
    fn pixel_shift_moves_pixels_and_zero_fills() {
        let input: Vec<f64> = (1..=9).map(|v| v as f64).collect();
        let mut output = vec![0.0; 9];
        // shift right by one: each row's leftmost pixel becomes zero
        shift_image(&input, &mut output, 3, 1, 0);
        assert_eq!(output, vec![0.0, 1.0, 2.0, 0.0, 4.0, 5.0, 0.0, 7.0, 8.0]);
        // shift down by one
        shift_image(&input, &mut output, 3, 0, 1);
        assert_eq!(output, vec![0.0, 0.0, 0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        // zero shift is the identity
        shift_image(&input, &mut output, 3, 0, 0);
        assert_eq!(output, input);
    }

    #[test]
    fn augmented_fit_is_deterministic_and_shape_safe() {
        let (ds, _) = make_blobs(2, 30, 9, 4.0, 5).unwrap();
        let spec = LearnerSpec {
            epochs: 3,
            augmentation: Augmentation::PixelShift { max_shift: 1, image_side: 3 },
            ..LearnerSpec::default()
        };
        let run = || {
            LearnerModel::initialize(&spec, 9, 2)
                .unwrap()
                .fit(ds.features.view(), &ds.labels, 21)
                .unwrap()
        };
        assert_eq!(run().flat_params(), run().flat_params());
    }

    #[test]
    fn per_class_accuracy_restricts_to_the_class() {
        let (ds, _) = make_blobs(3, 50, 2, 8.0, 4).unwrap();
        let model = LearnerModel::initialize(&softmax_spec(), 2, 3)
            .unwrap()
            .fit(ds.features.view(), &ds.labels, 3)
            .unwrap();
        for class in 0..3 {
            let acc = model.per_class_accuracy(ds.features.view(), &ds.labels, class).unwrap();
            assert!(acc > 0.9, "class {class}: {acc}");
        }
        assert!(model.per_class_accuracy(ds.features.view(), &ds.labels, 7).is_err());
    }

    #[test]
    fn oracle_acts_as_a_perfect_learner() {
        let (ds, oracle) = make_blobs(3, 40, 2, 8.0, 13).unwrap();
        let model = oracle.train(ds.features.view(), &ds.labels, 3, 1, 2).unwrap();
        let pred = Learner::predict(&oracle, &model, ds.features.view()).unwrap();
        let agree = pred.predicted.iter().zip(&ds.labels).filter(|(a, b)| a == b).count();
        assert!(agree as f64 / ds.len() as f64 > 0.999);
        assert!(oracle.train(ds.features.view(), &ds.labels, 5, 1, 2).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn probability_rows_sum_to_one(seed in 0u64..200, rows in 1usize..8) {
            let spec = LearnerSpec {
                architecture: Architecture::Mlp { hidden_units: 4 },
                weight_init_seed: seed,
                ..LearnerSpec::default()
            };
            let model = LearnerModel::initialize(&spec, 5, 3).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xABCD);
            let x = Array2::from_shape_fn((rows, 5), |_| rng.gen_range(-3.0..3.0));
            let pred = model.predict_proba(x.view()).unwrap();
            for (i, row) in pred.proba.rows().into_iter().enumerate() {
                let sum: f64 = row.sum();
                prop_assert!((sum - 1.0).abs() < 1e-6);
                prop_assert!(pred.confidence[i] > 0.0 && pred.confidence[i] <= 1.0);
                prop_assert_eq!(pred.predicted[i], argmax(row.as_slice().unwrap()));
            }
        }
    }
}
