//! Adam training over labeled gesture sequences.
//!
//! Batches group sequences of equal length (the LSTM unrolls without
//! padding); batch composition and order reshuffle every epoch from a
//! seeded generator, so a (seed, data) pair reproduces the same weights.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layers::softmax_cross_entropy;
use super::Model;
use crate::augment::DraiSequence;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainParams {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for TrainParams {
    fn default() -> Self {
        TrainParams {
            learning_rate: 1e-4,
            batch_size: 128,
            epochs: 100,
            seed: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl TrainParams {
    /// Longer schedule used when the training set is augmentation-expanded.
    pub fn for_augmented() -> TrainParams {
        TrainParams { epochs: 200, ..TrainParams::default() }
    }
}

impl TrainParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Validation("learning_rate must be positive".into()));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::Validation("batch_size and epochs must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Validation("adam betas must be in [0, 1)".into()));
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::Validation("adam epsilon must be positive".into()));
        }
        Ok(())
    }
}

/// Adam with bias correction. Moment buffers are keyed by the model's
/// parameter visit order.
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(params: &TrainParams) -> Adam {
        Adam {
            lr: params.learning_rate,
            beta1: params.beta1,
            beta2: params.beta2,
            eps: params.epsilon,
            t: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    /// Applies one update from the gradients currently held by the model.
    pub fn step(&mut self, model: &mut Model) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        let (m, v) = (&mut self.m, &mut self.v);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.eps);
        let mut idx = 0;
        model.visit_params_mut(|p, g| {
            if m.len() == idx {
                m.push(vec![0.0; p.len()]);
                v.push(vec![0.0; p.len()]);
            }
            let (mt, vt) = (&mut m[idx], &mut v[idx]);
            for j in 0..p.len() {
                mt[j] = b1 * mt[j] + (1.0 - b1) * g[j];
                vt[j] = b2 * vt[j] + (1.0 - b2) * g[j] * g[j];
                p[j] -= lr * (mt[j] / bc1) / ((vt[j] / bc2).sqrt() + eps);
            }
            idx += 1;
        });
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub mean_loss: f64,
    pub batches: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainReport {
    pub epoch_losses: Vec<f64>,
    pub final_loss: f64,
    pub input_scale: f64,
}

/// Largest pixel value in the dataset; the model's input normalizer.
pub fn fit_input_scale(data: &[DraiSequence]) -> f64 {
    let max = data
        .iter()
        .flat_map(|s| s.frames.iter())
        .map(|f| f.max_value())
        .fold(0.0f32, f32::max);
    if max > 0.0 {
        max as f64
    } else {
        1.0
    }
}

/// Shuffles indices, groups equal-length runs, chunks them into batches,
/// then shuffles batch order.
pub(crate) fn plan_batches(
    lengths: &[usize],
    batch_size: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..lengths.len()).collect();
    order.shuffle(rng);
    order.sort_by_key(|&i| lengths[i]);
    let mut batches = Vec::new();
    let mut run_start = 0;
    for i in 1..=order.len() {
        if i == order.len() || lengths[order[i]] != lengths[order[run_start]] {
            for chunk in order[run_start..i].chunks(batch_size) {
                batches.push(chunk.to_vec());
            }
            run_start = i;
        }
    }
    batches.shuffle(rng);
    batches
}

/// Trains in place. Fits the input scale from `data` first, so inference
/// uses the same normalization the weights were learned under.
pub fn train(
    model: &mut Model,
    data: &[DraiSequence],
    params: &TrainParams,
    mut on_epoch: Option<&mut dyn FnMut(&EpochStats)>,
) -> Result<TrainReport> {
    params.validate()?;
    if data.is_empty() {
        return Err(Error::Validation("training set is empty".into()));
    }
    model.config.input_scale = fit_input_scale(data);
    let lengths: Vec<usize> = data.iter().map(|s| s.frames.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut adam = Adam::new(params);
    let mut epoch_losses = Vec::with_capacity(params.epochs);
    let mut step = 0usize;
    for epoch in 0..params.epochs {
        let batches = plan_batches(&lengths, params.batch_size, &mut rng);
        let mut loss_sum = 0.0;
        let mut seen = 0usize;
        let n_batches = batches.len();
        for batch in batches {
            let refs: Vec<&DraiSequence> = batch.iter().map(|&i| &data[i]).collect();
            let input = model.prepare_batch(&refs)?;
            model.zero_grads();
            let (logits, caches) = model.forward_train(&input, &mut rng);
            let classes = model.config.classes;
            let mut dlogits = vec![0.0; logits.len()];
            let mut batch_loss = 0.0;
            for (b, &label) in input.labels.iter().enumerate() {
                if label >= classes {
                    return Err(Error::InvalidLabel(format!("class index {label}")));
                }
                let (l, g) =
                    softmax_cross_entropy(&logits[b * classes..(b + 1) * classes], label);
                batch_loss += l;
                for (j, gv) in g.iter().enumerate() {
                    dlogits[b * classes + j] = gv / input.batch as f64;
                }
            }
            batch_loss /= input.batch as f64;
            step += 1;
            if !batch_loss.is_finite() {
                return Err(Error::NonFiniteLoss { step });
            }
            model.backward(&input, &caches, &dlogits);
            adam.step(model);
            loss_sum += batch_loss * input.batch as f64;
            seen += input.batch;
        }
        let mean_loss = loss_sum / seen as f64;
        epoch_losses.push(mean_loss);
        if let Some(cb) = on_epoch.as_deref_mut() {
            cb(&EpochStats { epoch, mean_loss, batches: n_batches });
        }
    }
    Ok(TrainReport {
        final_loss: *epoch_losses.last().unwrap(),
        epoch_losses,
        input_scale: model.config.input_scale,
    })
}

/// Fraction of labeled sequences the model classifies correctly.
pub fn accuracy(model: &Model, data: &[DraiSequence]) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Validation("evaluation set is empty".into()));
    }
    let mut correct = 0usize;
    for s in data {
        let label = s
            .label
            .ok_or_else(|| Error::Validation("evaluation sequence lacks a label".into()))?;
        let (pred, _) = model.predict(s)?;
        if pred == label.label() as usize {
            correct += 1;
        }
    }
    Ok(correct as f64 / data.len() as f64)
}

/// Row-major confusion counts: entry [actual * classes + predicted].
pub fn confusion_matrix(model: &Model, data: &[DraiSequence]) -> Result<Vec<usize>> {
    let classes = model.config.classes;
    let mut counts = vec![0usize; classes * classes];
    for s in data {
        let label = s
            .label
            .ok_or_else(|| Error::Validation("evaluation sequence lacks a label".into()))?;
        let (pred, _) = model.predict(s)?;
        counts[label.label() as usize * classes + pred] += 1;
    }
    Ok(counts)
}
