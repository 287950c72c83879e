//! Fully connected entanglement classifier.
//!
//! Layers `2304 → 1024 → 128 → 64 → 3` with ReLU hidden activations,
//! inverted dropout during training and sigmoid outputs. Trained with Adam on
//! the mean binary cross-entropy of the three labels.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{CvError, Result};
use crate::homodyne::{CorrelationPattern, CHANNEL_LEN, PATTERN_LEN};
use crate::seeding::rng_for;
use crate::witness::LabelVector;

pub const LAYER_DIMS: [usize; 5] = [PATTERN_LEN, 1024, 128, 64, 3];
pub const FEATURE_DIM: usize = 64;
pub const OUTPUTS: usize = 3;
pub const PROB_CLIP: f64 = 1e-7;
pub const DECISION_THRESHOLD: f64 = 0.5;

/// Patterns are multiplied by this before the first layer, so that a
/// uniformly spread channel has unit mean entries.
pub const INPUT_SCALE: f64 = CHANNEL_LEN as f64;

const STREAM_INIT: u64 = 1;
const STREAM_SPLIT: u64 = 2;
const STREAM_SHUFFLE: u64 = 3;
const STREAM_DROPOUT: u64 = 4;

#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    /// `out × in`.
    pub weights: DMatrix<f64>,
    pub bias: DVector<f64>,
}

impl Layer {
    pub fn in_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.nrows()
    }

    fn zeros_like(&self) -> Layer {
        Layer {
            weights: DMatrix::zeros(self.out_dim(), self.in_dim()),
            bias: DVector::zeros(self.out_dim()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Vec<Layer>,
    pub v: Vec<Layer>,
    pub step: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MlpModel {
    pub layers: Vec<Layer>,
    pub adam: AdamState,
}

/// He-normal weights, zero biases and zero Adam moments.
pub fn init_model(seed: u64) -> MlpModel {
    MlpModel::with_dims(&LAYER_DIMS, seed).expect("fixed layer dims are valid")
}

impl MlpModel {
    pub fn with_dims(dims: &[usize], seed: u64) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(CvError::InvalidParameter(format!("bad layer dims {dims:?}")));
        }
        let mut rng = rng_for(seed, &[STREAM_INIT]);
        let layers = dims
            .windows(2)
            .map(|w| {
                let std = (2.0 / w[0] as f64).sqrt();
                let weights = DMatrix::from_fn(w[1], w[0], |_, _| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    z * std
                });
                Layer {
                    weights,
                    bias: DVector::zeros(w[1]),
                }
            })
            .collect();
        Ok(Self::from_layers(layers))
    }

    /// Wraps parameters with fresh optimizer state.
    pub fn from_layers(layers: Vec<Layer>) -> Self {
        let zeros: Vec<Layer> = layers.iter().map(Layer::zeros_like).collect();
        MlpModel {
            adam: AdamState {
                m: zeros.clone(),
                v: zeros,
                step: 0,
            },
            layers,
        }
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut dims = vec![self.layers[0].in_dim()];
        dims.extend(self.layers.iter().map(Layer::out_dim));
        dims
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }

    /// Flat parameter access in layer order, weights (column-major) before biases.
    pub fn parameter(&self, index: usize) -> f64 {
        let (l, k) = self.locate(index);
        let layer = &self.layers[l];
        if k < layer.weights.len() {
            layer.weights[k]
        } else {
            layer.bias[k - layer.weights.len()]
        }
    }

    pub fn set_parameter(&mut self, index: usize, value: f64) {
        let (l, k) = self.locate(index);
        let layer = &mut self.layers[l];
        if k < layer.weights.len() {
            layer.weights[k] = value;
        } else {
            let n = layer.weights.len();
            layer.bias[k - n] = value;
        }
    }

    fn locate(&self, mut index: usize) -> (usize, usize) {
        for (l, layer) in self.layers.iter().enumerate() {
            let n = layer.weights.len() + layer.bias.len();
            if index < n {
                return (l, index);
            }
            index -= n;
        }
        panic!("parameter index out of range");
    }
}

/// Pattern as a network input row.
pub fn input_vector(pattern: &CorrelationPattern) -> Vec<f64> {
    pattern.values().iter().map(|v| v * INPUT_SCALE).collect()
}

fn input_matrix(patterns: &[&CorrelationPattern]) -> DMatrix<f64> {
    let mut x = DMatrix::zeros(patterns.len(), PATTERN_LEN);
    for (r, p) in patterns.iter().enumerate() {
        for (c, v) in p.values().iter().enumerate() {
            x[(r, c)] = v * INPUT_SCALE;
        }
    }
    x
}

fn label_matrix(labels: &[LabelVector]) -> DMatrix<f64> {
    DMatrix::from_fn(labels.len(), OUTPUTS, |r, c| labels[r].as_f64()[c])
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Activations of one batch pass, rows are samples.
struct Pass {
    /// Input to each layer (post-ReLU, post-dropout for hidden layers).
    inputs: Vec<DMatrix<f64>>,
    /// Dropout scale per hidden unit, `None` when inactive.
    masks: Vec<Option<DMatrix<f64>>>,
    /// Pre-activations of the hidden layers.
    pre: Vec<DMatrix<f64>>,
    /// Post-ReLU output of the last hidden layer before dropout.
    features: DMatrix<f64>,
    probs: DMatrix<f64>,
}

fn affine(x: &DMatrix<f64>, layer: &Layer) -> DMatrix<f64> {
    let mut z = x * layer.weights.transpose();
    for mut row in z.row_iter_mut() {
        row += layer.bias.transpose();
    }
    z
}

fn run<R: Rng + ?Sized>(model: &MlpModel, x: DMatrix<f64>, dropout: f64, mut rng: Option<&mut R>) -> Pass {
    let depth = model.layers.len();
    let mut inputs = Vec::with_capacity(depth);
    let mut masks = Vec::with_capacity(depth - 1);
    let mut pre = Vec::with_capacity(depth - 1);
    let mut features = DMatrix::zeros(0, 0);
    let mut current = x;
    for (l, layer) in model.layers.iter().enumerate() {
        let z = affine(&current, layer);
        inputs.push(current);
        if l + 1 == depth {
            let probs = z.map(sigmoid);
            return Pass {
                inputs,
                masks,
                pre,
                features,
                probs,
            };
        }
        let mut a = z.map(|v| v.max(0.0));
        if l + 2 == depth {
            features = a.clone();
        }
        let mask = match rng.as_deref_mut() {
            Some(r) if dropout > 0.0 => {
                let keep = 1.0 / (1.0 - dropout);
                let m = DMatrix::from_fn(a.nrows(), a.ncols(), |_, _| {
                    if r.random::<f64>() < dropout {
                        0.0
                    } else {
                        keep
                    }
                });
                a.component_mul_assign(&m);
                Some(m)
            }
            _ => None,
        };
        masks.push(mask);
        pre.push(z);
        current = a;
    }
    unreachable!("model has at least one layer")
}

fn infer(model: &MlpModel, x: DMatrix<f64>) -> Pass {
    run::<crate::seeding::CvRng>(model, x, 0.0, None)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ForwardOutput {
    pub probs: [f64; OUTPUTS],
    pub features: Vec<f64>,
}

/// Single-pattern forward pass. `rng` drives dropout and is only used in
/// training mode.
pub fn forward<R: Rng + ?Sized>(
    model: &MlpModel,
    pattern: &CorrelationPattern,
    train_mode: bool,
    dropout_rate: f64,
    rng: &mut R,
) -> Result<ForwardOutput> {
    let x = input_matrix(&[pattern]);
    let pass = if train_mode {
        run(model, x, dropout_rate, Some(rng))
    } else {
        infer(model, x)
    };
    let probs = [pass.probs[(0, 0)], pass.probs[(0, 1)], pass.probs[(0, 2)]];
    if probs.iter().any(|p| !p.is_finite()) {
        return Err(CvError::Divergence("non-finite network output".into()));
    }
    Ok(ForwardOutput {
        probs,
        features: pass.features.row(0).iter().copied().collect(),
    })
}

/// Inference-mode outputs and last-hidden-layer features for many patterns.
pub fn forward_batch(model: &MlpModel, patterns: &[&CorrelationPattern]) -> (DMatrix<f64>, DMatrix<f64>) {
    let pass = infer(model, input_matrix(patterns));
    (pass.probs, pass.features)
}

/// Mean binary cross-entropy over the three labels.
pub fn bce_loss(probs: &[f64; OUTPUTS], labels: LabelVector) -> f64 {
    let y = labels.as_f64();
    probs
        .iter()
        .zip(y)
        .map(|(&p, y)| {
            let p = p.clamp(PROB_CLIP, 1.0 - PROB_CLIP);
            -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
        })
        .sum::<f64>()
        / OUTPUTS as f64
}

fn batch_loss(probs: &DMatrix<f64>, y: &DMatrix<f64>) -> f64 {
    let mut acc = 0.0;
    for (p, y) in probs.iter().zip(y.iter()) {
        let p = p.clamp(PROB_CLIP, 1.0 - PROB_CLIP);
        acc -= y * p.ln() + (1.0 - y) * (1.0 - p).ln();
    }
    acc / probs.len() as f64
}

/// Gradient of the batch-mean loss.
fn backward(model: &MlpModel, pass: &Pass, y: &DMatrix<f64>) -> Vec<Layer> {
    let depth = model.layers.len();
    let n = pass.probs.len() as f64;
    let mut delta = (&pass.probs - y) / n;
    let mut grads: Vec<Layer> = Vec::with_capacity(depth);
    for l in (0..depth).rev() {
        let input = &pass.inputs[l];
        let weights = delta.transpose() * input;
        let bias = DVector::from_iterator(delta.ncols(), delta.column_iter().map(|c| c.sum()));
        if l > 0 {
            let mut upstream = &delta * &model.layers[l].weights;
            if let Some(mask) = &pass.masks[l - 1] {
                upstream.component_mul_assign(mask);
            }
            upstream.zip_apply(&pass.pre[l - 1], |g, z| {
                if z <= 0.0 {
                    *g = 0.0
                }
            });
            delta = upstream;
        }
        grads.push(Layer { weights, bias });
    }
    grads.reverse();
    grads
}

/// Loss and parameter gradients of a batch with optional dropout.
pub fn loss_and_gradient<R: Rng + ?Sized>(
    model: &MlpModel,
    patterns: &[&CorrelationPattern],
    labels: &[LabelVector],
    dropout_rate: f64,
    rng: Option<&mut R>,
) -> (f64, Vec<Layer>) {
    let pass = run(model, input_matrix(patterns), dropout_rate, rng);
    let y = label_matrix(labels);
    (batch_loss(&pass.probs, &y), backward(model, &pass, &y))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

pub fn adam_step(model: &mut MlpModel, grads: &[Layer], cfg: &AdamConfig) {
    model.adam.step += 1;
    let t = model.adam.step as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    let (b1, b2, lr, eps) = (cfg.beta1, cfg.beta2, cfg.learning_rate, cfg.epsilon);
    let update = |theta: &mut [f64], m: &mut [f64], v: &mut [f64], g: &[f64]| {
        for (((t, m), v), &g) in theta.iter_mut().zip(m).zip(v).zip(g) {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            *t -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
        }
    };
    let MlpModel { layers, adam } = model;
    for (l, g) in grads.iter().enumerate() {
        let (layer, m, v) = (&mut layers[l], &mut adam.m[l], &mut adam.v[l]);
        update(
            layer.weights.as_mut_slice(),
            m.weights.as_mut_slice(),
            v.weights.as_mut_slice(),
            g.weights.as_slice(),
        );
        update(
            layer.bias.as_mut_slice(),
            m.bias.as_mut_slice(),
            v.bias.as_mut_slice(),
            g.bias.as_slice(),
        );
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub dropout_rate: f64,
    pub train_fraction: f64,
    pub seed: u64,
    pub adam: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 3000,
            batch_size: 64,
            dropout_rate: 0.2,
            train_fraction: 0.7,
            seed: 0,
            adam: AdamConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(CvError::Config("batch_size must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(CvError::Config("dropout_rate must lie in [0, 1)".into()));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(CvError::Config("train_fraction must lie in (0, 1)".into()));
        }
        if !(self.adam.learning_rate > 0.0) {
            return Err(CvError::Config("learning_rate must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_accuracy: [f64; OUTPUTS],
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub final_model: MlpModel,
    pub best_model: MlpModel,
    pub best_epoch: usize,
    pub history: Vec<EpochRecord>,
    pub train_indices: Vec<usize>,
    pub val_indices: Vec<usize>,
}

/// Shuffled train/validation index split.
pub fn split_indices(n: usize, train_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng_for(seed, &[STREAM_SPLIT]));
    let n_train = ((n as f64) * train_fraction).round() as usize;
    let n_train = n_train.clamp(1.min(n), n.saturating_sub(1).max(1.min(n)));
    let val = idx.split_off(n_train);
    (idx, val)
}

pub type Example = (CorrelationPattern, LabelVector);

/// Minibatch Adam with per-epoch validation and best-validation checkpointing.
pub fn train(model: MlpModel, dataset: &[Example], config: &TrainConfig) -> Result<TrainOutcome> {
    train_with(model, dataset, config, |_| {})
}

/// As [`train`], calling `on_epoch` after each epoch.
pub fn train_with<F: FnMut(&EpochRecord)>(
    mut model: MlpModel,
    dataset: &[Example],
    config: &TrainConfig,
    mut on_epoch: F,
) -> Result<TrainOutcome> {
    config.validate()?;
    if dataset.len() < 2 {
        return Err(CvError::InvalidParameter("dataset needs at least two examples".into()));
    }
    let (train_idx, val_idx) = split_indices(dataset.len(), config.train_fraction, config.seed);
    let val_patterns: Vec<&CorrelationPattern> = val_idx.iter().map(|&i| &dataset[i].0).collect();
    let val_labels: Vec<LabelVector> = val_idx.iter().map(|&i| dataset[i].1).collect();
    let val_x = input_matrix(&val_patterns);
    let val_y = label_matrix(&val_labels);

    let mut shuffle_rng = rng_for(config.seed, &[STREAM_SHUFFLE]);
    let mut dropout_rng = rng_for(config.seed, &[STREAM_DROPOUT]);
    let mut order = train_idx.clone();
    let mut history = Vec::with_capacity(config.epochs);
    let mut best: Option<(f64, usize, MlpModel)> = None;

    for epoch in 1..=config.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        for batch in order.chunks(config.batch_size) {
            let patterns: Vec<&CorrelationPattern> = batch.iter().map(|&i| &dataset[i].0).collect();
            let labels: Vec<LabelVector> = batch.iter().map(|&i| dataset[i].1).collect();
            let (loss, grads) =
                loss_and_gradient(&model, &patterns, &labels, config.dropout_rate, Some(&mut dropout_rng));
            if !loss.is_finite() {
                return Err(CvError::Divergence(format!(
                    "non-finite training loss at epoch {epoch} (step {})",
                    model.adam.step
                )));
            }
            loss_sum += loss * batch.len() as f64;
            adam_step(&mut model, &grads, &config.adam);
        }
        let train_loss = loss_sum / order.len() as f64;

        let (val_loss, val_accuracy) = if val_idx.is_empty() {
            (f64::NAN, [f64::NAN; OUTPUTS])
        } else {
            let probs = infer(&model, val_x.clone()).probs;
            (batch_loss(&probs, &val_y), accuracy_of(&probs, &val_labels))
        };
        if !val_idx.is_empty() && !val_loss.is_finite() {
            return Err(CvError::Divergence(format!("non-finite validation loss at epoch {epoch}")));
        }
        let record = EpochRecord {
            epoch,
            train_loss,
            val_loss,
            val_accuracy,
        };
        on_epoch(&record);
        history.push(record);
        if best.as_ref().is_none_or(|(l, _, _)| val_loss < *l) {
            best = Some((val_loss, epoch, model.clone()));
        }
    }
    let (best_model, best_epoch) = match best {
        Some((_, e, m)) => (m, e),
        None => (model.clone(), 0),
    };
    Ok(TrainOutcome {
        final_model: model,
        best_model,
        best_epoch,
        history,
        train_indices: train_idx,
        val_indices: val_idx,
    })
}

pub fn threshold(probs: &[f64; OUTPUTS]) -> LabelVector {
    LabelVector::from_array(probs.map(|p| p >= DECISION_THRESHOLD))
}

pub fn predict_labels(model: &MlpModel, pattern: &CorrelationPattern) -> ([f64; OUTPUTS], LabelVector) {
    let probs = infer(model, input_matrix(&[pattern])).probs;
    let p = [probs[(0, 0)], probs[(0, 1)], probs[(0, 2)]];
    (p, threshold(&p))
}

/// Maps a probability to `[-1, 1]`.
pub fn signed_score(p: f64) -> f64 {
    2.0 * p - 1.0
}

fn accuracy_of(probs: &DMatrix<f64>, labels: &[LabelVector]) -> [f64; OUTPUTS] {
    let mut hits = [0usize; OUTPUTS];
    for (r, label) in labels.iter().enumerate() {
        let truth = label.as_array();
        for k in 0..OUTPUTS {
            if (probs[(r, k)] >= DECISION_THRESHOLD) == truth[k] {
                hits[k] += 1;
            }
        }
    }
    hits.map(|h| h as f64 / labels.len() as f64)
}

/// Fraction of exact matches per label.
pub fn label_accuracy(predicted: &[LabelVector], truth: &[LabelVector]) -> Result<[f64; OUTPUTS]> {
    if predicted.is_empty() || predicted.len() != truth.len() {
        return Err(CvError::DimensionMismatch {
            expected: truth.len(),
            got: predicted.len(),
        });
    }
    let mut hits = [0usize; OUTPUTS];
    for (p, t) in predicted.iter().zip(truth) {
        let (p, t) = (p.as_array(), t.as_array());
        for k in 0..OUTPUTS {
            hits[k] += (p[k] == t[k]) as usize;
        }
    }
    Ok(hits.map(|h| h as f64 / truth.len() as f64))
}

pub fn evaluate_accuracy(model: &MlpModel, testset: &[Example]) -> Result<[f64; OUTPUTS]> {
    if testset.is_empty() {
        return Err(CvError::EmptyDistribution("empty test set".into()));
    }
    let patterns: Vec<&CorrelationPattern> = testset.iter().map(|e| &e.0).collect();
    let labels: Vec<LabelVector> = testset.iter().map(|e| e.1).collect();
    let (probs, _) = forward_batch(model, &patterns);
    Ok(accuracy_of(&probs, &labels))
}
