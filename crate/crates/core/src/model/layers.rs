//! Neural network primitives in f64 with hand-written backward passes.
//!
//! Layers own their parameters and gradient accumulators. Backward methods
//! accumulate into the gradient buffers; callers zero them between steps.
//! Spatial tensors use channel-major layout: index (c*h + y)*w + x.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};

pub struct Conv2d {
    pub in_ch: usize,
    pub out_ch: usize,
    pub k: usize,
    pub pad: usize,
    /// [out_ch][in_ch][k][k]
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
    pub grad_weight: Vec<f64>,
    pub grad_bias: Vec<f64>,
}

impl Conv2d {
    pub fn new(in_ch: usize, out_ch: usize, k: usize, rng: &mut ChaCha8Rng) -> Conv2d {
        // Fan-in-scaled uniform init.
        let bound = (6.0 / (in_ch * k * k) as f64).sqrt();
        let dist = Uniform::new(-bound, bound);
        let weight: Vec<f64> = (0..out_ch * in_ch * k * k).map(|_| dist.sample(rng)).collect();
        Conv2d {
            in_ch,
            out_ch,
            k,
            pad: k / 2,
            grad_weight: vec![0.0; weight.len()],
            weight,
            bias: vec![0.0; out_ch],
            grad_bias: vec![0.0; out_ch],
        }
    }

    /// Same-size convolution of one frame. `out` must be out_ch*h*w.
    pub fn forward(&self, input: &[f64], h: usize, w: usize, out: &mut [f64]) {
        debug_assert_eq!(input.len(), self.in_ch * h * w);
        debug_assert_eq!(out.len(), self.out_ch * h * w);
        for oc in 0..self.out_ch {
            out[oc * h * w..(oc + 1) * h * w].fill(self.bias[oc]);
        }
        let (k, pad) = (self.k, self.pad);
        for oc in 0..self.out_ch {
            for ic in 0..self.in_ch {
                for ky in 0..k {
                    for kx in 0..k {
                        let wgt =
                            self.weight[((oc * self.in_ch + ic) * k + ky) * k + kx];
                        let dy = ky as isize - pad as isize;
                        let dx = kx as isize - pad as isize;
                        let y_lo = (-dy).max(0) as usize;
                        let y_hi = ((h as isize - dy).min(h as isize)) as usize;
                        let x_lo = (-dx).max(0) as usize;
                        let x_hi = ((w as isize - dx).min(w as isize)) as usize;
                        for y in y_lo..y_hi {
                            let iy = (y as isize + dy) as usize;
                            let src = &input[(ic * h + iy) * w..(ic * h + iy + 1) * w];
                            let dst = &mut out[(oc * h + y) * w..(oc * h + y + 1) * w];
                            for x in x_lo..x_hi {
                                dst[x] += wgt * src[(x as isize + dx) as usize];
                            }
                        }
                    }
                }
            }
        }
    }

    /// Accumulates weight/bias grads; adds input grads into `grad_in` when given.
    pub fn backward(
        &mut self,
        input: &[f64],
        grad_out: &[f64],
        h: usize,
        w: usize,
        mut grad_in: Option<&mut [f64]>,
    ) {
        let (k, pad) = (self.k, self.pad);
        for oc in 0..self.out_ch {
            let go_plane = &grad_out[oc * h * w..(oc + 1) * h * w];
            self.grad_bias[oc] += go_plane.iter().sum::<f64>();
            for ic in 0..self.in_ch {
                for ky in 0..k {
                    for kx in 0..k {
                        let widx = ((oc * self.in_ch + ic) * k + ky) * k + kx;
                        let wgt = self.weight[widx];
                        let dy = ky as isize - pad as isize;
                        let dx = kx as isize - pad as isize;
                        let y_lo = (-dy).max(0) as usize;
                        let y_hi = ((h as isize - dy).min(h as isize)) as usize;
                        let x_lo = (-dx).max(0) as usize;
                        let x_hi = ((w as isize - dx).min(w as isize)) as usize;
                        let mut wacc = 0.0;
                        for y in y_lo..y_hi {
                            let iy = (y as isize + dy) as usize;
                            let src = &input[(ic * h + iy) * w..(ic * h + iy + 1) * w];
                            let go = &go_plane[y * w..(y + 1) * w];
                            for x in x_lo..x_hi {
                                wacc += src[(x as isize + dx) as usize] * go[x];
                            }
                            if let Some(gi) = grad_in.as_deref_mut() {
                                let gi_row =
                                    &mut gi[(ic * h + iy) * w..(ic * h + iy + 1) * w];
                                for x in x_lo..x_hi {
                                    gi_row[(x as isize + dx) as usize] += wgt * go[x];
                                }
                            }
                        }
                        self.grad_weight[widx] += wacc;
                    }
                }
            }
        }
    }
}

/// Normalization statistics cached by the training forward pass.
#[derive(Default)]
pub struct BnCache {
    pub xhat: Vec<f64>,
    pub inv_std: Vec<f64>,
}

pub struct BatchNorm {
    pub ch: usize,
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub grad_gamma: Vec<f64>,
    pub grad_beta: Vec<f64>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub momentum: f64,
    pub eps: f64,
}

impl BatchNorm {
    pub fn new(ch: usize) -> BatchNorm {
        BatchNorm {
            ch,
            gamma: vec![1.0; ch],
            beta: vec![0.0; ch],
            grad_gamma: vec![0.0; ch],
            grad_beta: vec![0.0; ch],
            running_mean: vec![0.0; ch],
            running_var: vec![1.0; ch],
            momentum: 0.1,
            eps: 1e-5,
        }
    }

    /// Normalizes a batch of frames in place using batch statistics and
    /// updates the running estimates. `x` holds `frames` frames of
    /// ch*spatial values each.
    pub fn forward_train(
        &mut self,
        x: &mut [f64],
        frames: usize,
        spatial: usize,
        cache: &mut BnCache,
    ) {
        let stride = self.ch * spatial;
        debug_assert_eq!(x.len(), frames * stride);
        let n = (frames * spatial) as f64;
        cache.xhat.clear();
        cache.xhat.resize(x.len(), 0.0);
        cache.inv_std.clear();
        cache.inv_std.resize(self.ch, 0.0);
        for c in 0..self.ch {
            let mut sum = 0.0;
            let mut sq = 0.0;
            for f in 0..frames {
                let base = f * stride + c * spatial;
                for v in &x[base..base + spatial] {
                    sum += v;
                    sq += v * v;
                }
            }
            let mean = sum / n;
            let var = (sq / n - mean * mean).max(0.0);
            let inv_std = 1.0 / (var + self.eps).sqrt();
            cache.inv_std[c] = inv_std;
            self.running_mean[c] =
                (1.0 - self.momentum) * self.running_mean[c] + self.momentum * mean;
            self.running_var[c] =
                (1.0 - self.momentum) * self.running_var[c] + self.momentum * var;
            let (g, b) = (self.gamma[c], self.beta[c]);
            for f in 0..frames {
                let base = f * stride + c * spatial;
                for i in base..base + spatial {
                    let xh = (x[i] - mean) * inv_std;
                    cache.xhat[i] = xh;
                    x[i] = g * xh + b;
                }
            }
        }
    }

    /// Normalizes in place using running statistics.
    pub fn forward_eval(&self, x: &mut [f64], frames: usize, spatial: usize) {
        let stride = self.ch * spatial;
        for c in 0..self.ch {
            let inv_std = 1.0 / (self.running_var[c] + self.eps).sqrt();
            let mean = self.running_mean[c];
            let (g, b) = (self.gamma[c], self.beta[c]);
            for f in 0..frames {
                let base = f * stride + c * spatial;
                for v in &mut x[base..base + spatial] {
                    *v = g * (*v - mean) * inv_std + b;
                }
            }
        }
    }

    /// Converts grads wrt outputs into grads wrt inputs, in place.
    pub fn backward(
        &mut self,
        grad: &mut [f64],
        frames: usize,
        spatial: usize,
        cache: &BnCache,
    ) {
        let stride = self.ch * spatial;
        let n = (frames * spatial) as f64;
        for c in 0..self.ch {
            let mut sum_g = 0.0;
            let mut sum_gx = 0.0;
            for f in 0..frames {
                let base = f * stride + c * spatial;
                for i in base..base + spatial {
                    sum_g += grad[i];
                    sum_gx += grad[i] * cache.xhat[i];
                }
            }
            self.grad_beta[c] += sum_g;
            self.grad_gamma[c] += sum_gx;
            let scale = self.gamma[c] * cache.inv_std[c];
            let mean_g = sum_g / n;
            let mean_gx = sum_gx / n;
            for f in 0..frames {
                let base = f * stride + c * spatial;
                for i in base..base + spatial {
                    grad[i] = scale * (grad[i] - mean_g - cache.xhat[i] * mean_gx);
                }
            }
        }
    }
}

/// 2x2 max pooling with stride 2 over one frame; records flat argmax
/// positions (within the full ch*h*w input) for the backward pass.
pub fn maxpool2_forward(
    input: &[f64],
    ch: usize,
    h: usize,
    w: usize,
    out: &mut [f64],
    idx: &mut [u32],
) {
    let (oh, ow) = (h / 2, w / 2);
    debug_assert_eq!(out.len(), ch * oh * ow);
    for c in 0..ch {
        for y in 0..oh {
            for x in 0..ow {
                let mut best = f64::NEG_INFINITY;
                let mut best_i = 0usize;
                for dy in 0..2 {
                    for dx in 0..2 {
                        let i = (c * h + 2 * y + dy) * w + 2 * x + dx;
                        if input[i] > best {
                            best = input[i];
                            best_i = i;
                        }
                    }
                }
                let o = (c * oh + y) * ow + x;
                out[o] = best;
                idx[o] = best_i as u32;
            }
        }
    }
}

/// Routes output grads back to the argmax cells. `grad_in` must be zeroed.
pub fn maxpool2_backward(grad_out: &[f64], idx: &[u32], grad_in: &mut [f64]) {
    for (g, &i) in grad_out.iter().zip(idx) {
        grad_in[i as usize] += g;
    }
}

/// In-place ReLU.
pub fn relu_forward(x: &mut [f64]) {
    for v in x {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

/// Masks grads by the post-activation values, in place.
pub fn relu_backward(grad: &mut [f64], activated: &[f64]) {
    for (g, &a) in grad.iter_mut().zip(activated) {
        if a <= 0.0 {
            *g = 0.0;
        }
    }
}

/// Inverted-dropout mask: kept units are scaled by 1/(1-p).
pub fn dropout_mask(len: usize, p: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    if p <= 0.0 {
        return vec![1.0; len];
    }
    let keep = 1.0 / (1.0 - p);
    (0..len).map(|_| if rng.gen::<f64>() < p { 0.0 } else { keep }).collect()
}

pub struct Dense {
    pub in_dim: usize,
    pub out_dim: usize,
    /// [out][in]
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
    pub grad_weight: Vec<f64>,
    pub grad_bias: Vec<f64>,
}

impl Dense {
    pub fn new(in_dim: usize, out_dim: usize, gain: f64, rng: &mut ChaCha8Rng) -> Dense {
        // Fan-in-scaled uniform init; gain 2 for ReLU layers, 1 for linear.
        let bound = (3.0 * gain / in_dim as f64).sqrt();
        let dist = Uniform::new(-bound, bound);
        let weight: Vec<f64> = (0..in_dim * out_dim).map(|_| dist.sample(rng)).collect();
        Dense {
            in_dim,
            out_dim,
            grad_weight: vec![0.0; weight.len()],
            weight,
            bias: vec![0.0; out_dim],
            grad_bias: vec![0.0; out_dim],
        }
    }

    pub fn forward(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.in_dim);
        for (o, out_v) in out.iter_mut().enumerate() {
            let row = &self.weight[o * self.in_dim..(o + 1) * self.in_dim];
            let mut acc = self.bias[o];
            for (w, v) in row.iter().zip(x) {
                acc += w * v;
            }
            *out_v = acc;
        }
    }

    /// Accumulates param grads; adds input grads into `grad_in` when given.
    pub fn backward(&mut self, x: &[f64], grad_out: &[f64], grad_in: Option<&mut [f64]>) {
        for (o, &g) in grad_out.iter().enumerate() {
            self.grad_bias[o] += g;
            let row = &mut self.grad_weight[o * self.in_dim..(o + 1) * self.in_dim];
            for (gw, v) in row.iter_mut().zip(x) {
                *gw += g * v;
            }
        }
        if let Some(gi) = grad_in {
            for (o, &g) in grad_out.iter().enumerate() {
                let row = &self.weight[o * self.in_dim..(o + 1) * self.in_dim];
                for (giv, w) in gi.iter_mut().zip(row) {
                    *giv += g * w;
                }
            }
        }
    }
}

/// Per-step values cached for backpropagation through time.
#[derive(Clone, Default)]
pub struct LstmStep {
    pub i: Vec<f64>,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    pub o: Vec<f64>,
    pub c: Vec<f64>,
    pub tanh_c: Vec<f64>,
}

/// Gate order in the stacked weight matrices: input, forget, cell, output.
pub struct Lstm {
    pub input_dim: usize,
    pub hidden: usize,
    /// [4*hidden][input_dim]
    pub w_x: Vec<f64>,
    /// [4*hidden][hidden]
    pub w_h: Vec<f64>,
    pub bias: Vec<f64>,
    pub grad_w_x: Vec<f64>,
    pub grad_w_h: Vec<f64>,
    pub grad_bias: Vec<f64>,
}

fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

impl Lstm {
    pub fn new(input_dim: usize, hidden: usize, rng: &mut ChaCha8Rng) -> Lstm {
        let bound = 1.0 / (hidden as f64).sqrt();
        let dist = Uniform::new(-bound, bound);
        let w_x: Vec<f64> = (0..4 * hidden * input_dim).map(|_| dist.sample(rng)).collect();
        let w_h: Vec<f64> = (0..4 * hidden * hidden).map(|_| dist.sample(rng)).collect();
        let mut bias = vec![0.0; 4 * hidden];
        // Open forget gates at init so early gradients reach back in time.
        bias[hidden..2 * hidden].fill(1.0);
        Lstm {
            input_dim,
            hidden,
            grad_w_x: vec![0.0; w_x.len()],
            grad_w_h: vec![0.0; w_h.len()],
            w_x,
            w_h,
            grad_bias: vec![0.0; bias.len()],
            bias,
        }
    }

    /// One step. Reads x and the previous state, writes the new state, and
    /// fills the cache entry.
    pub fn step(
        &self,
        x: &[f64],
        h_prev: &[f64],
        c_prev: &[f64],
        h: &mut [f64],
        step: &mut LstmStep,
    ) {
        let hd = self.hidden;
        let mut pre = self.bias.clone();
        for r in 0..4 * hd {
            let row = &self.w_x[r * self.input_dim..(r + 1) * self.input_dim];
            let mut acc = 0.0;
            for (w, v) in row.iter().zip(x) {
                acc += w * v;
            }
            let hrow = &self.w_h[r * hd..(r + 1) * hd];
            for (w, v) in hrow.iter().zip(h_prev) {
                acc += w * v;
            }
            pre[r] += acc;
        }
        step.i = pre[..hd].iter().map(|&v| sigmoid(v)).collect();
        step.f = pre[hd..2 * hd].iter().map(|&v| sigmoid(v)).collect();
        step.g = pre[2 * hd..3 * hd].iter().map(|&v| v.tanh()).collect();
        step.o = pre[3 * hd..].iter().map(|&v| sigmoid(v)).collect();
        step.c = (0..hd)
            .map(|j| step.f[j] * c_prev[j] + step.i[j] * step.g[j])
            .collect();
        step.tanh_c = step.c.iter().map(|&v| v.tanh()).collect();
        for j in 0..hd {
            h[j] = step.o[j] * step.tanh_c[j];
        }
    }

    /// Backward through one step. `dh`/`dc` carry grads flowing into this
    /// step's outputs; on return they hold grads for the previous state.
    /// Input grads accumulate into `dx`.
    #[allow(clippy::too_many_arguments)]
    pub fn step_backward(
        &mut self,
        x: &[f64],
        h_prev: &[f64],
        c_prev: &[f64],
        step: &LstmStep,
        dh: &mut Vec<f64>,
        dc: &mut Vec<f64>,
        dx: &mut [f64],
    ) {
        let hd = self.hidden;
        let mut dpre = vec![0.0; 4 * hd];
        let mut dc_prev = vec![0.0; hd];
        for j in 0..hd {
            let do_ = dh[j] * step.tanh_c[j];
            let dtc = dh[j] * step.o[j] * (1.0 - step.tanh_c[j] * step.tanh_c[j]) + dc[j];
            let di = dtc * step.g[j];
            let df = dtc * c_prev[j];
            let dg = dtc * step.i[j];
            dc_prev[j] = dtc * step.f[j];
            dpre[j] = di * step.i[j] * (1.0 - step.i[j]);
            dpre[hd + j] = df * step.f[j] * (1.0 - step.f[j]);
            dpre[2 * hd + j] = dg * (1.0 - step.g[j] * step.g[j]);
            dpre[3 * hd + j] = do_ * step.o[j] * (1.0 - step.o[j]);
        }
        let mut dh_prev = vec![0.0; hd];
        for r in 0..4 * hd {
            let g = dpre[r];
            self.grad_bias[r] += g;
            let wrow = &mut self.grad_w_x[r * self.input_dim..(r + 1) * self.input_dim];
            for (gw, v) in wrow.iter_mut().zip(x) {
                *gw += g * v;
            }
            let hrow = &mut self.grad_w_h[r * hd..(r + 1) * hd];
            for (gw, v) in hrow.iter_mut().zip(h_prev) {
                *gw += g * v;
            }
            let xrow = &self.w_x[r * self.input_dim..(r + 1) * self.input_dim];
            for (d, w) in dx.iter_mut().zip(xrow) {
                *d += g * w;
            }
            let whrow = &self.w_h[r * hd..(r + 1) * hd];
            for (d, w) in dh_prev.iter_mut().zip(whrow) {
                *d += g * w;
            }
        }
        *dh = dh_prev;
        *dc = dc_prev;
    }
}

/// Max-subtracted softmax cross entropy. Returns the loss and the gradient
/// wrt the logits (probs minus one-hot, unscaled).
pub fn softmax_cross_entropy(logits: &[f64], label: usize) -> (f64, Vec<f64>) {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&v| (v - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    let loss = z.ln() - (logits[label] - max);
    let grad = exps
        .iter()
        .enumerate()
        .map(|(j, &e)| e / z - if j == label { 1.0 } else { 0.0 })
        .collect();
    (loss, grad)
}

/// Softmax probabilities alone, for inference.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&v| (v - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.iter().map(|&e| e / z).collect()
}
