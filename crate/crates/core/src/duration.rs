//! A small trainable duration predictor.
//!
//! Maps each merged speech token, with convolutional context, to a repeat
//! count so merged sequences can be expanded again before synthesis. Counts
//! are predicted as a classification over buckets `1..=B`, the top bucket
//! standing for "B or more" and decoding to `B`.
//!
//! The network is an embedding table followed by two same-padded 1-D
//! convolutions with a tanh between them and a linear projection to bucket
//! logits. Parameters live in one flat `f64` vector, gradients are computed
//! analytically, and training is plain seeded SGD, so runs are bit
//! reproducible.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum DurationError {
    #[error("token {token} at position {position} is outside the vocabulary (size {vocab})")]
    TokenOutOfRange {
        token: u32,
        position: usize,
        vocab: u32,
    },
    #[error("count {count} at position {position} must be >= 1")]
    InvalidCount { count: u32, position: usize },
    #[error("example has {tokens} tokens but {counts} counts")]
    ShapeMismatch { tokens: usize, counts: usize },
    #[error("batch contains no positions")]
    EmptyBatch,
    #[error("training dataset is empty")]
    EmptyDataset,
    #[error("model config invalid: {0}")]
    InvalidConfig(String),
}

/// Architecture hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DurationModelConfig {
    pub vocab_size: u32,
    pub embedding_dim: usize,
    pub kernel_width: usize,
    pub channels: usize,
    /// Number of count buckets; bucket `B` means "repeat >= B".
    pub buckets: usize,
}

impl Default for DurationModelConfig {
    fn default() -> Self {
        DurationModelConfig {
            vocab_size: crate::codec::DEFAULT_VOCAB_SIZE,
            embedding_dim: 16,
            kernel_width: 3,
            channels: 32,
            buckets: 16,
        }
    }
}

impl DurationModelConfig {
    fn validate(&self) -> Result<(), DurationError> {
        if self.vocab_size == 0
            || self.embedding_dim == 0
            || self.kernel_width == 0
            || self.channels == 0
            || self.buckets == 0
        {
            return Err(DurationError::InvalidConfig(
                "all dimensions must be positive".into(),
            ));
        }
        if self.kernel_width.is_multiple_of(2) {
            return Err(DurationError::InvalidConfig(
                "kernel_width must be odd for same padding".into(),
            ));
        }
        Ok(())
    }

    fn param_count(&self) -> usize {
        let (v, d, k, c, b) = (
            self.vocab_size as usize,
            self.embedding_dim,
            self.kernel_width,
            self.channels,
            self.buckets,
        );
        v * d + c * d * k + c + c * c * k + c + b * c + b
    }
}

/// One training pair: merged run tokens and their true repeat counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DurationExample {
    pub tokens: Vec<u32>,
    pub counts: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DurationTrainingConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for DurationTrainingConfig {
    fn default() -> Self {
        DurationTrainingConfig {
            learning_rate: 0.5,
            epochs: 20,
            batch_size: 16,
            seed: 0,
        }
    }
}

/// Training summary: per-epoch mean loss plus final metrics on the training
/// set (exact bucket accuracy and mean absolute expanded-length error).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epoch_losses: Vec<f64>,
    pub final_accuracy: f64,
    pub mean_abs_length_error: f64,
}

/// Parameter layout inside the flat vector.
#[derive(Debug, Clone, Copy)]
struct Layout {
    emb: usize,
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
    wp: usize,
    bp: usize,
    total: usize,
}

impl Layout {
    fn of(cfg: &DurationModelConfig) -> Layout {
        let (v, d, k, c, b) = (
            cfg.vocab_size as usize,
            cfg.embedding_dim,
            cfg.kernel_width,
            cfg.channels,
            cfg.buckets,
        );
        let emb = 0;
        let w1 = emb + v * d;
        let b1 = w1 + c * d * k;
        let w2 = b1 + c;
        let b2 = w2 + c * c * k;
        let wp = b2 + c;
        let bp = wp + b * c;
        Layout {
            emb,
            w1,
            b1,
            w2,
            b2,
            wp,
            bp,
            total: bp + b,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DurationModel {
    pub config: DurationModelConfig,
    /// Flat parameters: embedding, conv1 (weight, bias), conv2 (weight,
    /// bias), projection (weight, bias), in that order.
    pub params: Vec<f64>,
}

/// Activations kept from the forward pass for the backward pass.
struct Activations {
    x: Vec<f64>,  // P x D embedded inputs
    a: Vec<f64>,  // P x C tanh(conv1)
    h2: Vec<f64>, // P x C conv2 output
    z: Vec<f64>,  // P x B logits
}

impl DurationModel {
    /// Zero-initialized model (uniform logits everywhere).
    pub fn zeroed(config: DurationModelConfig) -> Result<Self, DurationError> {
        config.validate()?;
        let total = config.param_count();
        Ok(DurationModel {
            config,
            params: vec![0.0; total],
        })
    }

    /// Random initialization, uniform in `[-scale, scale]`.
    pub fn init(config: DurationModelConfig, seed: u64, scale: f64) -> Result<Self, DurationError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let total = config.param_count();
        let params = (0..total).map(|_| rng.random_range(-scale..scale)).collect();
        Ok(DurationModel { config, params })
    }

    fn layout(&self) -> Layout {
        Layout::of(&self.config)
    }

    fn validate_tokens(&self, tokens: &[u32]) -> Result<(), DurationError> {
        for (position, &token) in tokens.iter().enumerate() {
            if token >= self.config.vocab_size {
                return Err(DurationError::TokenOutOfRange {
                    token,
                    position,
                    vocab: self.config.vocab_size,
                });
            }
        }
        Ok(())
    }

    fn forward(&self, tokens: &[u32]) -> Activations {
        let cfg = &self.config;
        let lay = self.layout();
        let p_len = tokens.len();
        let (d, k, c, b) = (cfg.embedding_dim, cfg.kernel_width, cfg.channels, cfg.buckets);
        let pad = k / 2;
        let pr = &self.params;

        let mut x = vec![0.0; p_len * d];
        for (p, &tok) in tokens.iter().enumerate() {
            let row = lay.emb + tok as usize * d;
            x[p * d..(p + 1) * d].copy_from_slice(&pr[row..row + d]);
        }

        let mut a = vec![0.0; p_len * c];
        for p in 0..p_len {
            for o in 0..c {
                let mut acc = pr[lay.b1 + o];
                for j in 0..k {
                    let q = p + j;
                    if q < pad || q - pad >= p_len {
                        continue;
                    }
                    let q = q - pad;
                    let w_row = lay.w1 + (o * d * k) + j;
                    for i in 0..d {
                        acc += pr[w_row + i * k] * x[q * d + i];
                    }
                }
                a[p * c + o] = acc.tanh();
            }
        }

        let mut h2 = vec![0.0; p_len * c];
        for p in 0..p_len {
            for o in 0..c {
                let mut acc = pr[lay.b2 + o];
                for j in 0..k {
                    let q = p + j;
                    if q < pad || q - pad >= p_len {
                        continue;
                    }
                    let q = q - pad;
                    let w_row = lay.w2 + (o * c * k) + j;
                    for i in 0..c {
                        acc += pr[w_row + i * k] * a[q * c + i];
                    }
                }
                h2[p * c + o] = acc;
            }
        }

        let mut z = vec![0.0; p_len * b];
        for p in 0..p_len {
            for bucket in 0..b {
                let mut acc = pr[lay.bp + bucket];
                let w_row = lay.wp + bucket * c;
                for i in 0..c {
                    acc += pr[w_row + i] * h2[p * c + i];
                }
                z[p * b + bucket] = acc;
            }
        }

        Activations { x, a, h2, z }
    }

    /// Predicts one repeat count per merged run token, each in
    /// `[1, buckets]`, by bucket argmax.
    pub fn predict_counts(&self, tokens: &[u32]) -> Result<Vec<u32>, DurationError> {
        self.validate_tokens(tokens)?;
        if tokens.is_empty() {
            return Ok(Vec::new());
        }
        let b = self.config.buckets;
        let acts = self.forward(tokens);
        let mut counts = Vec::with_capacity(tokens.len());
        for p in 0..tokens.len() {
            let row = &acts.z[p * b..(p + 1) * b];
            let mut best = 0usize;
            for (i, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = i;
                }
            }
            counts.push(best as u32 + 1);
        }
        Ok(counts)
    }

    /// Mean cross-entropy over count buckets plus the exact gradient of
    /// every parameter.
    pub fn loss_and_gradients(
        &self,
        batch: &[DurationExample],
    ) -> Result<(f64, Vec<f64>), DurationError> {
        let cfg = &self.config;
        let lay = self.layout();
        let (d, k, c, b) = (cfg.embedding_dim, cfg.kernel_width, cfg.channels, cfg.buckets);
        let pad = k / 2;
        let pr = &self.params;

        let mut total_positions = 0usize;
        for ex in batch {
            if ex.tokens.len() != ex.counts.len() {
                return Err(DurationError::ShapeMismatch {
                    tokens: ex.tokens.len(),
                    counts: ex.counts.len(),
                });
            }
            self.validate_tokens(&ex.tokens)?;
            for (position, &count) in ex.counts.iter().enumerate() {
                if count == 0 {
                    return Err(DurationError::InvalidCount { count, position });
                }
            }
            total_positions += ex.tokens.len();
        }
        if total_positions == 0 {
            return Err(DurationError::EmptyBatch);
        }

        let inv_n = 1.0 / total_positions as f64;
        let mut loss = 0.0;
        let mut grad = vec![0.0; lay.total];

        for ex in batch {
            let p_len = ex.tokens.len();
            if p_len == 0 {
                continue;
            }
            let acts = self.forward(&ex.tokens);

            // Softmax cross-entropy and dL/dz, scaled by 1/N up front.
            let mut dz = vec![0.0; p_len * b];
            for p in 0..p_len {
                let row = &acts.z[p * b..(p + 1) * b];
                let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let sum: f64 = row.iter().map(|v| (v - max).exp()).sum();
                let log_z = max + sum.ln();
                let target = (ex.counts[p].min(b as u32) - 1) as usize;
                loss += (log_z - row[target]) * inv_n;
                for bucket in 0..b {
                    let softmax = (row[bucket] - max).exp() / sum;
                    let indicator = if bucket == target { 1.0 } else { 0.0 };
                    dz[p * b + bucket] = (softmax - indicator) * inv_n;
                }
            }

            // Projection backward.
            let mut dh2 = vec![0.0; p_len * c];
            for p in 0..p_len {
                for bucket in 0..b {
                    let g = dz[p * b + bucket];
                    if g == 0.0 {
                        continue;
                    }
                    grad[lay.bp + bucket] += g;
                    let w_row = lay.wp + bucket * c;
                    for i in 0..c {
                        grad[w_row + i] += g * acts.h2[p * c + i];
                        dh2[p * c + i] += g * pr[w_row + i];
                    }
                }
            }

            // Conv2 backward.
            let mut da = vec![0.0; p_len * c];
            for p in 0..p_len {
                for o in 0..c {
                    let g = dh2[p * c + o];
                    grad[lay.b2 + o] += g;
                    for j in 0..k {
                        let q = p + j;
                        if q < pad || q - pad >= p_len {
                            continue;
                        }
                        let q = q - pad;
                        let w_row = lay.w2 + (o * c * k) + j;
                        for i in 0..c {
                            grad[w_row + i * k] += g * acts.a[q * c + i];
                            da[q * c + i] += g * pr[w_row + i * k];
                        }
                    }
                }
            }

            // Tanh backward.
            let mut dh1 = vec![0.0; p_len * c];
            for idx in 0..p_len * c {
                let t = acts.a[idx];
                dh1[idx] = da[idx] * (1.0 - t * t);
            }

            // Conv1 backward into weights and embeddings.
            let mut dx = vec![0.0; p_len * d];
            for p in 0..p_len {
                for o in 0..c {
                    let g = dh1[p * c + o];
                    grad[lay.b1 + o] += g;
                    for j in 0..k {
                        let q = p + j;
                        if q < pad || q - pad >= p_len {
                            continue;
                        }
                        let q = q - pad;
                        let w_row = lay.w1 + (o * d * k) + j;
                        for i in 0..d {
                            grad[w_row + i * k] += g * acts.x[q * d + i];
                            dx[q * d + i] += g * pr[w_row + i * k];
                        }
                    }
                }
            }
            for (p, &tok) in ex.tokens.iter().enumerate() {
                let row = lay.emb + tok as usize * d;
                for i in 0..d {
                    grad[row + i] += dx[p * d + i];
                }
            }
        }

        Ok((loss, grad))
    }

    /// Position-level exact bucket accuracy and mean absolute
    /// expanded-length error over a dataset.
    pub fn evaluate(&self, dataset: &[DurationExample]) -> Result<(f64, f64), DurationError> {
        let b = self.config.buckets as u32;
        let mut positions = 0usize;
        let mut hits = 0usize;
        let mut length_error = 0.0;
        let mut examples = 0usize;
        for ex in dataset {
            if ex.tokens.len() != ex.counts.len() {
                return Err(DurationError::ShapeMismatch {
                    tokens: ex.tokens.len(),
                    counts: ex.counts.len(),
                });
            }
            let predicted = self.predict_counts(&ex.tokens)?;
            let mut predicted_len = 0i64;
            let mut true_len = 0i64;
            for (&p, &t) in predicted.iter().zip(&ex.counts) {
                if p == t.min(b) {
                    hits += 1;
                }
                predicted_len += p as i64;
                true_len += t as i64;
            }
            positions += ex.tokens.len();
            length_error += (predicted_len - true_len).abs() as f64;
            examples += 1;
        }
        if positions == 0 {
            return Err(DurationError::EmptyBatch);
        }
        Ok((hits as f64 / positions as f64, length_error / examples as f64))
    }

    /// Trains a fresh model with plain SGD; bit-deterministic given the seed.
    pub fn train(
        dataset: &[DurationExample],
        model_config: DurationModelConfig,
        train_config: &DurationTrainingConfig,
    ) -> Result<(Self, TrainReport), DurationError> {
        if dataset.is_empty() {
            return Err(DurationError::EmptyDataset);
        }
        let mut model = DurationModel::init(model_config, train_config.seed, 0.1)?;
        let mut rng = ChaCha8Rng::seed_from_u64(train_config.seed.wrapping_add(1));
        let batch_size = train_config.batch_size.max(1);

        let mut order: Vec<usize> = (0..dataset.len()).collect();
        let mut epoch_losses = Vec::with_capacity(train_config.epochs);
        for _ in 0..train_config.epochs {
            // Fisher-Yates with the epoch RNG.
            for i in (1..order.len()).rev() {
                let j = rng.random_range(0..=i);
                order.swap(i, j);
            }
            let mut epoch_loss = 0.0;
            let mut batches = 0usize;
            for chunk in order.chunks(batch_size) {
                let batch: Vec<DurationExample> =
                    chunk.iter().map(|&i| dataset[i].clone()).collect();
                let (loss, grad) = model.loss_and_gradients(&batch)?;
                for (p, g) in model.params.iter_mut().zip(&grad) {
                    *p -= train_config.learning_rate * g;
                }
                epoch_loss += loss;
                batches += 1;
            }
            epoch_losses.push(epoch_loss / batches.max(1) as f64);
        }

        let (final_accuracy, mean_abs_length_error) = model.evaluate(dataset)?;
        Ok((
            model,
            TrainReport {
                epoch_losses,
                final_accuracy,
                mean_abs_length_error,
            },
        ))
    }
}
