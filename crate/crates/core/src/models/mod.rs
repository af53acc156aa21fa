//! Trainable predictors over feature vectors: the three-layer CNN plus
//! k-NN, logistic-regression and MLP baselines, trained from scratch with
//! analytic gradients.

mod knn;
mod loss;
pub(crate) mod network;

use std::path::Path;

use ndarray::{Array2, Axis};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::dataset::short_hash;

pub use knn::{knn_predict, knn_predict_batch, KnnMetric};
pub use loss::{cross_entropy_loss, mse_loss, softmax};
pub(crate) use loss::{cross_entropy_batch, mse_batch};
pub use network::{Gradients, LayerGrad};
use network::{Layer, Network};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pooling {
    GlobalAverage,
}

/// Output head: a regression value vector or class logits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Head {
    Regression(usize),
    Classification(usize),
}

impl Head {
    pub fn output_dim(&self) -> usize {
        match *self {
            Head::Regression(d) => d,
            Head::Classification(n) => n,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Head::Regression(d) if d >= 1 => Ok(()),
            Head::Classification(n) if n >= 2 => Ok(()),
            Head::Regression(_) => Err(Error::InvalidParameter(
                "regression head needs >= 1 output".into(),
            )),
            Head::Classification(_) => Err(Error::InvalidParameter(
                "classification head needs >= 2 classes".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvLayerSpec {
    pub channels: usize,
    pub kernel_size: usize,
    pub stride: usize,
}

/// Three conv layers, relu, global average pooling, one fully connected head.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CnnSpec {
    pub conv_layers: [ConvLayerSpec; 3],
    pub activation: Activation,
    pub head: Head,
    pub pooling: Pooling,
}

impl CnnSpec {
    /// Default trunk: channels (16, 32, 64), kernel 7, stride 2.
    pub fn new(head: Head) -> Self {
        let layer = |channels| ConvLayerSpec {
            channels,
            kernel_size: 7,
            stride: 2,
        };
        Self {
            conv_layers: [layer(16), layer(32), layer(64)],
            activation: Activation::Relu,
            head,
            pooling: Pooling::GlobalAverage,
        }
    }

    pub fn classifier(n_classes: usize) -> Self {
        Self::new(Head::Classification(n_classes))
    }

    pub fn regressor() -> Self {
        Self::new(Head::Regression(1))
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        for layer in &mut self.conv_layers {
            layer.stride = stride;
        }
        self
    }

    pub fn with_channels(mut self, channels: [usize; 3]) -> Self {
        for (layer, c) in self.conv_layers.iter_mut().zip(channels) {
            layer.channels = c;
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.head.validate()?;
        for layer in &self.conv_layers {
            if layer.kernel_size % 2 == 0 || layer.kernel_size == 0 {
                return Err(Error::InvalidParameter(
                    "conv kernel sizes must be odd".into(),
                ));
            }
            if layer.channels == 0 || layer.stride == 0 {
                return Err(Error::InvalidParameter(
                    "conv channels and stride must be >= 1".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Two relu hidden layers and a head.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub hidden: [usize; 2],
    pub head: Head,
}

impl MlpSpec {
    pub fn new(hidden: [usize; 2], head: Head) -> Self {
        Self { hidden, head }
    }

    pub fn classifier(n_classes: usize) -> Self {
        Self::new([64, 64], Head::Classification(n_classes))
    }

    pub fn validate(&self) -> Result<()> {
        self.head.validate()?;
        if self.hidden.iter().any(|&h| h == 0) {
            return Err(Error::InvalidParameter(
                "MLP hidden widths must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Multi-class logistic regression: one linear layer trained under softmax
/// cross-entropy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LrSpec {
    pub n_classes: usize,
}

impl LrSpec {
    pub fn validate(&self) -> Result<()> {
        Head::Classification(self.n_classes).validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    Cnn(CnnSpec),
    Mlp(MlpSpec),
    LogisticRegression(LrSpec),
}

impl ModelSpec {
    pub fn head(&self) -> Head {
        match self {
            ModelSpec::Cnn(s) => s.head,
            ModelSpec::Mlp(s) => s.head,
            ModelSpec::LogisticRegression(s) => Head::Classification(s.n_classes),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ModelSpec::Cnn(s) => s.validate(),
            ModelSpec::Mlp(s) => s.validate(),
            ModelSpec::LogisticRegression(s) => s.validate(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    Adam,
    Sgd,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub optimizer: Optimizer,
    pub weight_decay: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            epochs: 200,
            batch_size: 32,
            seed: 0,
            optimizer: Optimizer::Adam,
            weight_decay: 0.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::InvalidParameter("learning rate must be > 0".into()));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidParameter(
                "epochs and batch size must be >= 1".into(),
            ));
        }
        if self.weight_decay < 0.0 {
            return Err(Error::InvalidParameter(
                "weight decay must be >= 0".into(),
            ));
        }
        Ok(())
    }

    /// Shrinks the batch so the >= 2 batches precondition holds on small sets.
    pub fn fitted_to(&self, n_samples: usize) -> Self {
        let mut out = *self;
        out.batch_size = out.batch_size.min((n_samples / 2).max(1));
        out
    }
}

/// Standardization applied to regression targets (training-fold statistics).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetTransform {
    pub mean: f64,
    pub std: f64,
}

/// A trained model: spec, weights, and the target transform for regression.
#[derive(Debug, Clone)]
pub struct ModelParams {
    pub spec: ModelSpec,
    pub input_dim: usize,
    pub config_hash: String,
    pub output_transform: Option<TargetTransform>,
    pub(crate) network: Network,
}

impl ModelParams {
    /// Builds a model with seed-deterministic fan-in initialization.
    pub fn init(spec: &ModelSpec, input_dim: usize, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut network = build_network(spec, input_dim)?;
        network.init_weights(seed);
        Ok(Self {
            spec: *spec,
            input_dim,
            config_hash: String::new(),
            output_transform: None,
            network,
        })
    }

    /// Builds a model with all weights and biases zero.
    pub fn zeros(spec: &ModelSpec, input_dim: usize) -> Result<Self> {
        spec.validate()?;
        let network = build_network(spec, input_dim)?;
        Ok(Self {
            spec: *spec,
            input_dim,
            config_hash: String::new(),
            output_transform: None,
            network,
        })
    }

    pub fn param_count(&self) -> usize {
        self.network.param_count()
    }

    pub fn flat_params(&self) -> Vec<f64> {
        self.network.flat_params()
    }

    pub fn set_flat_params(&mut self, flat: &[f64]) -> Result<()> {
        self.network.set_flat_params(flat)
    }
}

fn build_network(spec: &ModelSpec, input_dim: usize) -> Result<Network> {
    if input_dim == 0 {
        return Err(Error::InvalidParameter("input dimension must be >= 1".into()));
    }
    let zero_conv = |in_ch: usize, s: &ConvLayerSpec| Layer::Conv1d {
        w: Array2::zeros((in_ch * s.kernel_size, s.channels)),
        b: ndarray::Array1::zeros(s.channels),
        in_ch,
        out_ch: s.channels,
        kernel: s.kernel_size,
        stride: s.stride,
    };
    let zero_dense = |input: usize, output: usize| Layer::Dense {
        w: Array2::zeros((input, output)),
        b: ndarray::Array1::zeros(output),
    };
    match spec {
        ModelSpec::Cnn(s) => {
            let mut layers = Vec::new();
            let mut in_ch = 1;
            let mut len = input_dim;
            for conv in &s.conv_layers {
                if len < conv.kernel_size {
                    return Err(Error::ShapeMismatch(format!(
                        "input of {input_dim} collapses below kernel {} in the conv stack",
                        conv.kernel_size
                    )));
                }
                layers.push(zero_conv(in_ch, conv));
                layers.push(Layer::Relu);
                len = (len - conv.kernel_size) / conv.stride + 1;
                in_ch = conv.channels;
            }
            layers.push(Layer::GlobalAvgPool);
            layers.push(zero_dense(in_ch, s.head.output_dim()));
            Ok(Network {
                layers,
                seq_input: true,
            })
        }
        ModelSpec::Mlp(s) => Ok(Network {
            layers: vec![
                zero_dense(input_dim, s.hidden[0]),
                Layer::Relu,
                zero_dense(s.hidden[0], s.hidden[1]),
                Layer::Relu,
                zero_dense(s.hidden[1], s.head.output_dim()),
            ],
            seq_input: false,
        }),
        ModelSpec::LogisticRegression(s) => Ok(Network {
            layers: vec![zero_dense(input_dim, s.n_classes)],
            seq_input: false,
        }),
    }
}

/// Raw model outputs (logits or standardized regression values) for a batch.
pub fn forward_batch(params: &ModelParams, features: &Array2<f64>) -> Result<Array2<f64>> {
    if features.ncols() != params.input_dim {
        return Err(Error::ShapeMismatch(format!(
            "model expects {} inputs, got {}",
            params.input_dim,
            features.ncols()
        )));
    }
    params.network.forward(features)
}

/// Raw outputs for a single feature vector.
pub fn forward(params: &ModelParams, input: &[f64]) -> Result<Vec<f64>> {
    let x = Array2::from_shape_vec((1, input.len()), input.to_vec())
        .map_err(|e| Error::ShapeMismatch(e.to_string()))?;
    Ok(forward_batch(params, &x)?.row(0).to_vec())
}

/// Class probabilities (softmax rows) for a classification model.
pub fn predict_proba(params: &ModelParams, features: &Array2<f64>) -> Result<Array2<f64>> {
    match params.spec.head() {
        Head::Classification(_) => {}
        _ => {
            return Err(Error::ShapeMismatch(
                "predict_proba requires a classification head".into(),
            ))
        }
    }
    let logits = forward_batch(params, features)?;
    let mut out = logits.clone();
    for (mut row, logit_row) in out.outer_iter_mut().zip(logits.outer_iter()) {
        let probs = softmax(logit_row.as_slice().unwrap());
        for (slot, p) in row.iter_mut().zip(probs) {
            *slot = p;
        }
    }
    Ok(out)
}

/// Argmax class predictions.
pub fn predict_classes(params: &ModelParams, features: &Array2<f64>) -> Result<Vec<usize>> {
    let logits = forward_batch(params, features)?;
    Ok(logits
        .outer_iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .map(|(i, _)| i)
                .unwrap_or(0)
        })
        .collect())
}

/// Regression predictions in target units (inverse-standardized).
pub fn predict_values(params: &ModelParams, features: &Array2<f64>) -> Result<Vec<f64>> {
    let raw = forward_batch(params, features)?;
    let transform = params.output_transform.unwrap_or(TargetTransform {
        mean: 0.0,
        std: 1.0,
    });
    Ok(raw
        .column(0)
        .iter()
        .map(|&v| v * transform.std + transform.mean)
        .collect())
}

/// Training target for a feature batch.
#[derive(Debug, Clone, Copy)]
pub enum BatchTarget<'a> {
    Classes(&'a [usize]),
    /// Values in the model's (standardized) output space.
    Values(&'a Array2<f64>),
}

/// Mean batch loss and exact analytic gradients w.r.t. every parameter.
pub fn backward(
    params: &ModelParams,
    features: &Array2<f64>,
    target: &BatchTarget,
) -> Result<(f64, Gradients)> {
    if features.nrows() == 0 {
        return Err(Error::InvalidParameter("empty batch".into()));
    }
    let (output, caches) = params.network.forward_cached(features)?;
    let (loss, dout) = match target {
        BatchTarget::Classes(classes) => cross_entropy_batch(&output, classes)?,
        BatchTarget::Values(values) => mse_batch(&output, values)?,
    };
    let grads = params.network.backward(&caches, dout)?;
    Ok((loss, grads))
}

enum OptimizerState {
    Sgd,
    Adam { m: Vec<f64>, v: Vec<f64>, t: usize },
}

impl OptimizerState {
    fn new(optimizer: Optimizer, n: usize) -> Self {
        match optimizer {
            Optimizer::Sgd => OptimizerState::Sgd,
            Optimizer::Adam => OptimizerState::Adam {
                m: vec![0.0; n],
                v: vec![0.0; n],
                t: 0,
            },
        }
    }

    fn apply(&mut self, network: &mut Network, grads: &Gradients, config: &TrainConfig) {
        let flat_grads = grads.flatten();
        match self {
            OptimizerState::Sgd => {
                network.for_each_param_mut(|i, w| {
                    let g = flat_grads[i] + config.weight_decay * *w;
                    *w -= config.learning_rate * g;
                });
            }
            OptimizerState::Adam { m, v, t } => {
                *t += 1;
                let b1: f64 = 0.9;
                let b2: f64 = 0.999;
                let eps = 1e-8;
                let bc1 = 1.0 - b1.powi(*t as i32);
                let bc2 = 1.0 - b2.powi(*t as i32);
                network.for_each_param_mut(|i, w| {
                    let g = flat_grads[i] + config.weight_decay * *w;
                    m[i] = b1 * m[i] + (1.0 - b1) * g;
                    v[i] = b2 * v[i] + (1.0 - b2) * g * g;
                    let m_hat = m[i] / bc1;
                    let v_hat = v[i] / bc2;
                    *w -= config.learning_rate * m_hat / (v_hat.sqrt() + eps);
                });
            }
        }
    }
}

fn shuffled_indices(n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }
    order
}

fn full_loss(params: &ModelParams, features: &Array2<f64>, target: &BatchTarget) -> Result<f64> {
    let output = params.network.forward(features)?;
    Ok(match target {
        BatchTarget::Classes(classes) => cross_entropy_batch(&output, classes)?.0,
        BatchTarget::Values(values) => mse_batch(&output, values)?.0,
    })
}

fn train_inner(
    features: &Array2<f64>,
    target: BatchTarget,
    spec: &ModelSpec,
    config: &TrainConfig,
    transform: Option<TargetTransform>,
) -> Result<ModelParams> {
    config.validate()?;
    let n = features.nrows();
    if n < 2 * config.batch_size {
        return Err(Error::InvalidParameter(format!(
            "training needs at least 2 * batch_size = {} samples, got {n}",
            2 * config.batch_size
        )));
    }

    let mut params = ModelParams::init(spec, features.ncols(), config.seed)?;
    params.output_transform = transform;
    params.config_hash = short_hash(&format!(
        "{}|{}",
        serde_json::to_string(spec)?,
        serde_json::to_string(config)?
    ));

    let initial_loss = full_loss(&params, features, &target)?;
    let initial_flat = params.flat_params();

    let mut optimizer = OptimizerState::new(config.optimizer, params.param_count());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5348_5546_464C_4521);

    for epoch in 0..config.epochs {
        let order = shuffled_indices(n, &mut rng);
        for chunk in order.chunks(config.batch_size) {
            let batch = features.select(Axis(0), chunk);
            let batch_target_classes;
            let batch_target_values;
            let batch_target = match target {
                BatchTarget::Classes(classes) => {
                    batch_target_classes =
                        chunk.iter().map(|&i| classes[i]).collect::<Vec<_>>();
                    BatchTarget::Classes(&batch_target_classes)
                }
                BatchTarget::Values(values) => {
                    batch_target_values = values.select(Axis(0), chunk);
                    BatchTarget::Values(&batch_target_values)
                }
            };
            let (loss, grads) = backward(&params, &batch, &batch_target)?;
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch, loss });
            }
            optimizer.apply(&mut params.network, &grads, config);
        }
    }

    // Contract: never return parameters that score worse than the
    // initialization on the training set.
    let final_loss = full_loss(&params, features, &target)?;
    if !final_loss.is_finite() {
        return Err(Error::Divergence {
            epoch: config.epochs,
            loss: final_loss,
        });
    }
    if final_loss > initial_loss {
        params.set_flat_params(&initial_flat)?;
    }
    Ok(params)
}

/// Trains a classifier on (features, class indices).
pub fn train_classifier(
    features: &Array2<f64>,
    classes: &[usize],
    spec: &ModelSpec,
    config: &TrainConfig,
) -> Result<ModelParams> {
    let n_classes = match spec.head() {
        Head::Classification(n) => n,
        _ => {
            return Err(Error::InvalidParameter(
                "train_classifier requires a classification head".into(),
            ))
        }
    };
    if classes.len() != features.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "{} feature rows vs {} labels",
            features.nrows(),
            classes.len()
        )));
    }
    if let Some(&bad) = classes.iter().find(|&&c| c >= n_classes) {
        return Err(Error::Label(format!(
            "class index {bad} out of range for {n_classes} classes"
        )));
    }
    train_inner(features, BatchTarget::Classes(classes), spec, config, None)
}

/// Trains a single-output regressor. Targets are standardized to zero mean
/// and unit variance with training statistics; predictions are mapped back.
pub fn train_regressor(
    features: &Array2<f64>,
    targets: &[f64],
    spec: &ModelSpec,
    config: &TrainConfig,
) -> Result<ModelParams> {
    match spec.head() {
        Head::Regression(1) => {}
        _ => {
            return Err(Error::InvalidParameter(
                "train_regressor requires a 1-output regression head".into(),
            ))
        }
    }
    if targets.len() != features.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "{} feature rows vs {} targets",
            features.nrows(),
            targets.len()
        )));
    }
    let n = targets.len() as f64;
    let mean = targets.iter().sum::<f64>() / n;
    let var = targets.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / n;
    let std = if var > 0.0 { var.sqrt() } else { 1.0 };
    let standardized = Array2::from_shape_vec(
        (targets.len(), 1),
        targets.iter().map(|t| (t - mean) / std).collect(),
    )
    .unwrap();
    train_inner(
        features,
        BatchTarget::Values(&standardized),
        spec,
        config,
        Some(TargetTransform { mean, std }),
    )
}

// ---------------------------------------------------------------------------
// Checkpoint format: magic + JSON header + little-endian f32 weight blob.
// ---------------------------------------------------------------------------

const CHECKPOINT_MAGIC: &[u8; 4] = b"JSCP";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct CheckpointHeader {
    version: u32,
    spec: ModelSpec,
    input_dim: usize,
    output_transform: Option<TargetTransform>,
    config_hash: String,
    weight_count: usize,
}

pub fn save_checkpoint(params: &ModelParams, path: &Path) -> Result<()> {
    let weights = params.flat_params();
    let header = CheckpointHeader {
        version: CHECKPOINT_VERSION,
        spec: params.spec,
        input_dim: params.input_dim,
        output_transform: params.output_transform,
        config_hash: params.config_hash.clone(),
        weight_count: weights.len(),
    };
    let header_json = serde_json::to_vec(&header)?;
    let mut bytes = Vec::with_capacity(8 + header_json.len() + weights.len() * 4);
    bytes.extend_from_slice(CHECKPOINT_MAGIC);
    bytes.extend_from_slice(&(header_json.len() as u32).to_le_bytes());
    bytes.extend_from_slice(&header_json);
    for w in weights {
        bytes.extend_from_slice(&(w as f32).to_le_bytes());
    }
    std::fs::write(path, bytes)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<ModelParams> {
    let bytes = std::fs::read(path)?;
    if bytes.len() < 8 || &bytes[0..4] != CHECKPOINT_MAGIC {
        return Err(Error::Format(format!(
            "{}: not a model checkpoint",
            path.display()
        )));
    }
    let header_len = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    if bytes.len() < 8 + header_len {
        return Err(Error::Format("truncated checkpoint header".into()));
    }
    let header: CheckpointHeader = serde_json::from_slice(&bytes[8..8 + header_len])?;
    if header.version != CHECKPOINT_VERSION {
        return Err(Error::Format(format!(
            "unsupported checkpoint version {}",
            header.version
        )));
    }
    let blob = &bytes[8 + header_len..];
    if blob.len() != header.weight_count * 4 {
        return Err(Error::Format(format!(
            "weight blob has {} bytes, expected {}",
            blob.len(),
            header.weight_count * 4
        )));
    }
    let weights: Vec<f64> = blob
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]])))
        .collect();
    let mut params = ModelParams::zeros(&header.spec, header.input_dim)?;
    params.set_flat_params(&weights)?;
    params.output_transform = header.output_transform;
    params.config_hash = header.config_hash;
    Ok(params)
}
