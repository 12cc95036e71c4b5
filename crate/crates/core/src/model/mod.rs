//! Gesture classifier: a small convolutional stack applied per frame,
//! followed by an LSTM over the frame sequence and a softmax head.
//!
//! Per frame: [conv 3x3 -> batchnorm -> ReLU -> maxpool 2x2] per stage,
//! flatten, dense embedding with ReLU and dropout. The final LSTM hidden
//! state feeds a dense layer over the gesture classes. All math is f64;
//! the backward pass is hand-written and verified against finite
//! differences.

pub mod layers;
pub mod train;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::augment::DraiSequence;
use crate::error::{Error, Result};
use crate::synth::{GestureKind, GESTURE_CLASS_COUNT};
use layers::{
    dropout_mask, maxpool2_backward, maxpool2_forward, relu_backward, relu_forward, softmax,
    BatchNorm, BnCache, Conv2d, Dense, Lstm, LstmStep,
};

/// Architecture and preprocessing knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub input_range_bins: usize,
    pub input_angle_bins: usize,
    /// Output channels of each conv stage; each stage halves both spatial dims.
    pub conv_filters: Vec<usize>,
    pub kernel_size: usize,
    /// Per-frame embedding width between the conv stack and the LSTM.
    pub embedding_dim: usize,
    pub lstm_hidden: usize,
    pub classes: usize,
    pub dropout: f64,
    /// Largest pixel value seen in training; frames are mapped through
    /// ln(1+v)/ln(1+scale) so inputs land near [0, 1].
    pub input_scale: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig::full()
    }
}

impl ModelConfig {
    pub fn full() -> ModelConfig {
        ModelConfig {
            input_range_bins: 32,
            input_angle_bins: 32,
            conv_filters: vec![8, 16, 32],
            kernel_size: 3,
            embedding_dim: 128,
            lstm_hidden: 128,
            classes: GESTURE_CLASS_COUNT,
            dropout: 0.5,
            input_scale: 1.0,
        }
    }

    /// Budget variant for constrained deployments.
    pub fn lite() -> ModelConfig {
        ModelConfig { embedding_dim: 32, lstm_hidden: 64, ..ModelConfig::full() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.conv_filters.is_empty() {
            return Err(Error::Validation("conv_filters must be nonempty".into()));
        }
        if self.kernel_size == 0 || self.kernel_size % 2 == 0 {
            return Err(Error::Validation("kernel_size must be odd".into()));
        }
        let stages = self.conv_filters.len() as u32;
        let div = 1usize << stages;
        if self.input_range_bins % div != 0
            || self.input_angle_bins % div != 0
            || self.input_range_bins < div
            || self.input_angle_bins < div
        {
            return Err(Error::Validation(format!(
                "input {}x{} not divisible by 2^{} pooling stages",
                self.input_range_bins, self.input_angle_bins, stages
            )));
        }
        if self.embedding_dim == 0 || self.lstm_hidden == 0 {
            return Err(Error::Validation("embedding and hidden dims must be positive".into()));
        }
        if self.classes < 2 {
            return Err(Error::Validation("need at least two classes".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Validation("dropout must be in [0, 1)".into()));
        }
        if !self.input_scale.is_finite() || self.input_scale < 0.0 {
            return Err(Error::Validation("input_scale must be finite and non-negative".into()));
        }
        Ok(())
    }

    /// Flattened size of the conv stack output.
    pub fn flatten_dim(&self) -> usize {
        let stages = self.conv_filters.len();
        let h = self.input_range_bins >> stages;
        let w = self.input_angle_bins >> stages;
        self.conv_filters.last().unwrap() * h * w
    }
}

pub struct Model {
    pub config: ModelConfig,
    convs: Vec<Conv2d>,
    bns: Vec<BatchNorm>,
    fc: Dense,
    lstm: Lstm,
    head: Dense,
}

/// A batch of equal-length sequences flattened for the conv stack:
/// frame index = seq * steps + t.
pub struct BatchInput {
    pub frames: Vec<f64>,
    pub batch: usize,
    pub steps: usize,
    pub labels: Vec<usize>,
}

struct StageCache {
    /// Tensor entering this stage's conv, n frames each in_ch*h*w.
    input: Vec<f64>,
    bn: BnCache,
    /// Post-ReLU activations, n frames each out_ch*h*w.
    act: Vec<f64>,
    /// Pool argmax positions, n frames each out_ch*(h/2)*(w/2).
    idx: Vec<u32>,
    h: usize,
    w: usize,
}

/// Everything the backward pass needs from a training forward pass.
pub struct TrainCaches {
    stages: Vec<StageCache>,
    /// Conv stack output, n x flatten_dim.
    flat: Vec<f64>,
    /// Post-ReLU embeddings before dropout, n x E.
    fc_act: Vec<f64>,
    drop_mask: Vec<f64>,
    /// LSTM inputs (after dropout), n x E.
    emb: Vec<f64>,
    lstm_steps: Vec<LstmStep>,
    /// Hidden states, n x H.
    h_states: Vec<f64>,
}

impl Model {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Model> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut convs = Vec::new();
        let mut bns = Vec::new();
        let mut in_ch = 1;
        for &f in &config.conv_filters {
            convs.push(Conv2d::new(in_ch, f, config.kernel_size, &mut rng));
            bns.push(BatchNorm::new(f));
            in_ch = f;
        }
        let fc = Dense::new(config.flatten_dim(), config.embedding_dim, 2.0, &mut rng);
        let lstm = Lstm::new(config.embedding_dim, config.lstm_hidden, &mut rng);
        let head = Dense::new(config.lstm_hidden, config.classes, 1.0, &mut rng);
        Ok(Model { config, convs, bns, fc, lstm, head })
    }

    /// Trainable parameter count (batchnorm running stats excluded).
    pub fn parameter_count(&self) -> usize {
        let mut n = 0;
        self.visit_params(|_, t| n += t.len());
        n
    }

    /// Visits parameter tensors in a stable order (the checkpoint order).
    pub fn visit_params(&self, mut f: impl FnMut(&str, &[f64])) {
        for (l, (c, b)) in self.convs.iter().zip(&self.bns).enumerate() {
            f(&format!("conv{l}.weight"), &c.weight);
            f(&format!("conv{l}.bias"), &c.bias);
            f(&format!("bn{l}.gamma"), &b.gamma);
            f(&format!("bn{l}.beta"), &b.beta);
        }
        f("fc.weight", &self.fc.weight);
        f("fc.bias", &self.fc.bias);
        f("lstm.w_x", &self.lstm.w_x);
        f("lstm.w_h", &self.lstm.w_h);
        f("lstm.bias", &self.lstm.bias);
        f("head.weight", &self.head.weight);
        f("head.bias", &self.head.bias);
    }

    /// Visits (parameter, gradient) pairs in checkpoint order.
    pub fn visit_params_mut(&mut self, mut f: impl FnMut(&mut Vec<f64>, &mut Vec<f64>)) {
        for (c, b) in self.convs.iter_mut().zip(&mut self.bns) {
            f(&mut c.weight, &mut c.grad_weight);
            f(&mut c.bias, &mut c.grad_bias);
            f(&mut b.gamma, &mut b.grad_gamma);
            f(&mut b.beta, &mut b.grad_beta);
        }
        f(&mut self.fc.weight, &mut self.fc.grad_weight);
        f(&mut self.fc.bias, &mut self.fc.grad_bias);
        f(&mut self.lstm.w_x, &mut self.lstm.grad_w_x);
        f(&mut self.lstm.w_h, &mut self.lstm.grad_w_h);
        f(&mut self.lstm.bias, &mut self.lstm.grad_bias);
        f(&mut self.head.weight, &mut self.head.grad_weight);
        f(&mut self.head.bias, &mut self.head.grad_bias);
    }

    /// Visits non-trainable state (batchnorm running stats), checkpoint order.
    pub fn visit_buffers(&self, mut f: impl FnMut(&str, &[f64])) {
        for (l, b) in self.bns.iter().enumerate() {
            f(&format!("bn{l}.running_mean"), &b.running_mean);
            f(&format!("bn{l}.running_var"), &b.running_var);
        }
    }

    pub fn visit_buffers_mut(&mut self, mut f: impl FnMut(&mut Vec<f64>)) {
        for b in &mut self.bns {
            f(&mut b.running_mean);
            f(&mut b.running_var);
        }
    }

    pub fn zero_grads(&mut self) {
        self.visit_params_mut(|_, g| g.fill(0.0));
    }

    fn norm_denom(&self) -> f64 {
        if self.config.input_scale > 0.0 {
            (1.0 + self.config.input_scale).ln()
        } else {
            1.0
        }
    }

    /// Flattens labeled, equal-length sequences into a conv-ready batch.
    pub fn prepare_batch(&self, seqs: &[&DraiSequence]) -> Result<BatchInput> {
        if seqs.is_empty() {
            return Err(Error::Validation("empty batch".into()));
        }
        let steps = seqs[0].frames.len();
        let (kb, ib) = (self.config.input_range_bins, self.config.input_angle_bins);
        let denom = self.norm_denom();
        let mut frames = Vec::with_capacity(seqs.len() * steps * kb * ib);
        let mut labels = Vec::with_capacity(seqs.len());
        for s in seqs {
            s.validate()?;
            if s.frames.len() != steps {
                return Err(Error::Validation(format!(
                    "batch mixes sequence lengths {} and {}",
                    steps,
                    s.frames.len()
                )));
            }
            let label = s
                .label
                .ok_or_else(|| Error::Validation("training sequence lacks a label".into()))?;
            labels.push(label.label() as usize);
            for fr in &s.frames {
                if fr.range_bins != kb || fr.angle_bins != ib {
                    return Err(Error::ShapeMismatch {
                        expected: format!("{kb}x{ib} frame"),
                        got: format!("{}x{} frame", fr.range_bins, fr.angle_bins),
                    });
                }
                frames.extend(fr.values.iter().map(|&v| (1.0 + v as f64).ln() / denom));
            }
        }
        Ok(BatchInput { frames, batch: seqs.len(), steps, labels })
    }

    /// Training-mode forward pass. Returns per-sequence logits
    /// (batch x classes) and the caches for `backward`.
    pub fn forward_train(
        &mut self,
        input: &BatchInput,
        rng: &mut ChaCha8Rng,
    ) -> (Vec<f64>, TrainCaches) {
        let n = input.batch * input.steps;
        let (mut h, mut w) = (self.config.input_range_bins, self.config.input_angle_bins);
        let mut cur = input.frames.clone();
        let mut in_ch = 1;
        let mut stages = Vec::with_capacity(self.convs.len());
        for (conv, bn) in self.convs.iter().zip(&mut self.bns) {
            let out_ch = conv.out_ch;
            let mut conv_out = vec![0.0; n * out_ch * h * w];
            for f in 0..n {
                conv.forward(
                    &cur[f * in_ch * h * w..(f + 1) * in_ch * h * w],
                    h,
                    w,
                    &mut conv_out[f * out_ch * h * w..(f + 1) * out_ch * h * w],
                );
            }
            let mut bn_cache = BnCache::default();
            bn.forward_train(&mut conv_out, n, h * w, &mut bn_cache);
            relu_forward(&mut conv_out);
            let (oh, ow) = (h / 2, w / 2);
            let mut pooled = vec![0.0; n * out_ch * oh * ow];
            let mut idx = vec![0u32; pooled.len()];
            for f in 0..n {
                maxpool2_forward(
                    &conv_out[f * out_ch * h * w..(f + 1) * out_ch * h * w],
                    out_ch,
                    h,
                    w,
                    &mut pooled[f * out_ch * oh * ow..(f + 1) * out_ch * oh * ow],
                    &mut idx[f * out_ch * oh * ow..(f + 1) * out_ch * oh * ow],
                );
            }
            stages.push(StageCache { input: cur, bn: bn_cache, act: conv_out, idx, h, w });
            cur = pooled;
            h = oh;
            w = ow;
            in_ch = out_ch;
        }
        let flat = cur;
        let fdim = self.config.flatten_dim();
        let e = self.config.embedding_dim;

        let mut fc_act = vec![0.0; n * e];
        for f in 0..n {
            self.fc.forward(&flat[f * fdim..(f + 1) * fdim], &mut fc_act[f * e..(f + 1) * e]);
        }
        relu_forward(&mut fc_act);
        let drop_mask = dropout_mask(n * e, self.config.dropout, rng);
        let emb: Vec<f64> = fc_act.iter().zip(&drop_mask).map(|(a, m)| a * m).collect();

        let hd = self.config.lstm_hidden;
        let mut lstm_steps = vec![LstmStep::default(); n];
        let mut h_states = vec![0.0; n * hd];
        let zeros = vec![0.0; hd];
        for b in 0..input.batch {
            let mut h_prev = zeros.clone();
            let mut c_prev = zeros.clone();
            for t in 0..input.steps {
                let i = b * input.steps + t;
                let (head_part, tail) = h_states.split_at_mut((i + 1) * hd);
                let _ = tail;
                let h_out = &mut head_part[i * hd..];
                self.lstm.step(
                    &emb[i * e..(i + 1) * e],
                    &h_prev,
                    &c_prev,
                    h_out,
                    &mut lstm_steps[i],
                );
                h_prev.copy_from_slice(h_out);
                c_prev.copy_from_slice(&lstm_steps[i].c);
            }
        }

        let classes = self.config.classes;
        let mut logits = vec![0.0; input.batch * classes];
        for b in 0..input.batch {
            let last = (b * input.steps + input.steps - 1) * hd;
            self.head.forward(
                &h_states[last..last + hd],
                &mut logits[b * classes..(b + 1) * classes],
            );
        }
        (
            logits,
            TrainCaches { stages, flat, fc_act, drop_mask, emb, lstm_steps, h_states },
        )
    }

    /// Accumulates parameter gradients given d(loss)/d(logits).
    pub fn backward(&mut self, input: &BatchInput, caches: &TrainCaches, dlogits: &[f64]) {
        let n = input.batch * input.steps;
        let e = self.config.embedding_dim;
        let hd = self.config.lstm_hidden;
        let classes = self.config.classes;
        let zeros = vec![0.0; hd];

        let mut demb = vec![0.0; n * e];
        for b in 0..input.batch {
            let last = b * input.steps + input.steps - 1;
            let mut dh = vec![0.0; hd];
            self.head.backward(
                &caches.h_states[last * hd..(last + 1) * hd],
                &dlogits[b * classes..(b + 1) * classes],
                Some(&mut dh),
            );
            let mut dc = vec![0.0; hd];
            for t in (0..input.steps).rev() {
                let i = b * input.steps + t;
                let (h_prev, c_prev) = if t > 0 {
                    (
                        &caches.h_states[(i - 1) * hd..i * hd],
                        &caches.lstm_steps[i - 1].c[..],
                    )
                } else {
                    (&zeros[..], &zeros[..])
                };
                self.lstm.step_backward(
                    &caches.emb[i * e..(i + 1) * e],
                    h_prev,
                    c_prev,
                    &caches.lstm_steps[i],
                    &mut dh,
                    &mut dc,
                    &mut demb[i * e..(i + 1) * e],
                );
            }
        }

        for (d, m) in demb.iter_mut().zip(&caches.drop_mask) {
            *d *= m;
        }
        relu_backward(&mut demb, &caches.fc_act);
        let fdim = self.config.flatten_dim();
        let mut dflat = vec![0.0; n * fdim];
        for f in 0..n {
            self.fc.backward(
                &caches.flat[f * fdim..(f + 1) * fdim],
                &demb[f * e..(f + 1) * e],
                Some(&mut dflat[f * fdim..(f + 1) * fdim]),
            );
        }

        let mut dcur = dflat;
        for l in (0..self.convs.len()).rev() {
            let stage = &caches.stages[l];
            let (h, w) = (stage.h, stage.w);
            let out_ch = self.convs[l].out_ch;
            let in_ch = self.convs[l].in_ch;
            let mut dact = vec![0.0; n * out_ch * h * w];
            let plane = out_ch * (h / 2) * (w / 2);
            for f in 0..n {
                maxpool2_backward(
                    &dcur[f * plane..(f + 1) * plane],
                    &stage.idx[f * plane..(f + 1) * plane],
                    &mut dact[f * out_ch * h * w..(f + 1) * out_ch * h * w],
                );
            }
            relu_backward(&mut dact, &stage.act);
            self.bns[l].backward(&mut dact, n, h * w, &stage.bn);
            let mut dinput =
                if l > 0 { Some(vec![0.0; n * in_ch * h * w]) } else { None };
            for f in 0..n {
                self.convs[l].backward(
                    &stage.input[f * in_ch * h * w..(f + 1) * in_ch * h * w],
                    &dact[f * out_ch * h * w..(f + 1) * out_ch * h * w],
                    h,
                    w,
                    dinput
                        .as_deref_mut()
                        .map(|d| &mut d[f * in_ch * h * w..(f + 1) * in_ch * h * w]),
                );
            }
            if let Some(d) = dinput {
                dcur = d;
            }
        }
    }

    /// Inference logits for one sequence (eval mode: running batchnorm
    /// statistics, no dropout).
    pub fn eval_logits(&self, seq: &DraiSequence) -> Result<Vec<f64>> {
        seq.validate()?;
        let (kb, ib) = (self.config.input_range_bins, self.config.input_angle_bins);
        let denom = self.norm_denom();
        let n = seq.frames.len();
        let mut cur = Vec::with_capacity(n * kb * ib);
        for fr in &seq.frames {
            if fr.range_bins != kb || fr.angle_bins != ib {
                return Err(Error::ShapeMismatch {
                    expected: format!("{kb}x{ib} frame"),
                    got: format!("{}x{} frame", fr.range_bins, fr.angle_bins),
                });
            }
            cur.extend(fr.values.iter().map(|&v| (1.0 + v as f64).ln() / denom));
        }
        let (mut h, mut w) = (kb, ib);
        let mut in_ch = 1;
        for (conv, bn) in self.convs.iter().zip(&self.bns) {
            let out_ch = conv.out_ch;
            let mut conv_out = vec![0.0; n * out_ch * h * w];
            for f in 0..n {
                conv.forward(
                    &cur[f * in_ch * h * w..(f + 1) * in_ch * h * w],
                    h,
                    w,
                    &mut conv_out[f * out_ch * h * w..(f + 1) * out_ch * h * w],
                );
            }
            bn.forward_eval(&mut conv_out, n, h * w);
            relu_forward(&mut conv_out);
            let (oh, ow) = (h / 2, w / 2);
            let mut pooled = vec![0.0; n * out_ch * oh * ow];
            let mut idx = vec![0u32; pooled.len()];
            for f in 0..n {
                maxpool2_forward(
                    &conv_out[f * out_ch * h * w..(f + 1) * out_ch * h * w],
                    out_ch,
                    h,
                    w,
                    &mut pooled[f * out_ch * oh * ow..(f + 1) * out_ch * oh * ow],
                    &mut idx[f * out_ch * oh * ow..(f + 1) * out_ch * oh * ow],
                );
            }
            cur = pooled;
            h = oh;
            w = ow;
            in_ch = out_ch;
        }
        let fdim = self.config.flatten_dim();
        let e = self.config.embedding_dim;
        let hd = self.config.lstm_hidden;
        let mut emb = vec![0.0; e];
        let mut h_state = vec![0.0; hd];
        let mut c_state = vec![0.0; hd];
        let mut h_next = vec![0.0; hd];
        let mut step = LstmStep::default();
        for f in 0..n {
            self.fc.forward(&cur[f * fdim..(f + 1) * fdim], &mut emb);
            relu_forward(&mut emb);
            self.lstm.step(&emb, &h_state, &c_state, &mut h_next, &mut step);
            h_state.copy_from_slice(&h_next);
            c_state.copy_from_slice(&step.c);
        }
        let mut logits = vec![0.0; self.config.classes];
        self.head.forward(&h_state, &mut logits);
        Ok(logits)
    }

    /// Predicted class index and the softmax distribution.
    pub fn predict(&self, seq: &DraiSequence) -> Result<(usize, Vec<f64>)> {
        let logits = self.eval_logits(seq)?;
        let probs = softmax(&logits);
        let best = probs
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(i, _)| i)
            .unwrap();
        Ok((best, probs))
    }

    /// Convenience wrapper mapping the argmax to a gesture kind.
    pub fn classify(&self, seq: &DraiSequence) -> Result<GestureKind> {
        let (idx, _) = self.predict(seq)?;
        GestureKind::from_label(idx as u8)
            .ok_or_else(|| Error::InvalidLabel(format!("class index {idx}")))
    }
}
