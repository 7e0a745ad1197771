//! A small convolutional network with hand-written backpropagation.
//!
//! Layout: `conv 3×3 (8) → ReLU → max-pool 2 → conv 3×3 (16) → ReLU →
//! max-pool 2 → dense (128) → ReLU → dense (9)`. Convolutions are zero
//! padded so only pooling changes the spatial size. Inputs are channel-planar
//! values in [0, 1], shifted by [`INPUT_CENTER`] before the first layer.

use rand_distr::{Distribution, Normal};

use super::label::NUM_CLASSES;
use crate::{seed, Error, Result};

pub const CONV1_FILTERS: usize = 8;
pub const CONV2_FILTERS: usize = 16;
pub const HIDDEN: usize = 128;
pub const KERNEL: usize = 3;
pub const INPUT_CENTER: f64 = 0.5;

/// 3×3 convolution, stride 1, zero padding 1. Weights are `[out][in][ky][kx]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv {
    pub in_channels: usize,
    pub out_channels: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Fully connected layer. Weights are `[out][in]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Conv {
    fn zeros(in_channels: usize, out_channels: usize) -> Self {
        Conv {
            in_channels,
            out_channels,
            weights: vec![0.0; out_channels * in_channels * KERNEL * KERNEL],
            bias: vec![0.0; out_channels],
        }
    }

    /// `input` is `in_channels × h × w`; returns `out_channels × h × w` before activation.
    fn forward(&self, input: &[f64], h: usize, w: usize) -> Vec<f64> {
        let plane = h * w;
        let mut out = vec![0.0; self.out_channels * plane];
        for oc in 0..self.out_channels {
            let dst = &mut out[oc * plane..(oc + 1) * plane];
            dst.iter_mut().for_each(|v| *v = self.bias[oc]);
            for ic in 0..self.in_channels {
                let src = &input[ic * plane..(ic + 1) * plane];
                for ky in 0..KERNEL {
                    for kx in 0..KERNEL {
                        let wv = self.weights
                            [((oc * self.in_channels + ic) * KERNEL + ky) * KERNEL + kx];
                        let (y0, y1) = valid_range(ky, h);
                        let (x0, x1) = valid_range(kx, w);
                        for y in y0..y1 {
                            let sy = y + ky - 1;
                            let d = &mut dst[y * w + x0..y * w + x1];
                            let s = &src[sy * w + x0 + kx - 1..sy * w + x1 + kx - 1];
                            for (a, b) in d.iter_mut().zip(s) {
                                *a += wv * b;
                            }
                        }
                    }
                }
            }
        }
        out
    }

    /// Accumulates parameter gradients into `grad`; returns the input gradient when asked.
    fn backward(
        &self,
        input: &[f64],
        dout: &[f64],
        h: usize,
        w: usize,
        grad: &mut Conv,
        want_input: bool,
    ) -> Option<Vec<f64>> {
        let plane = h * w;
        let mut din = want_input.then(|| vec![0.0; self.in_channels * plane]);
        for oc in 0..self.out_channels {
            let go = &dout[oc * plane..(oc + 1) * plane];
            grad.bias[oc] += go.iter().sum::<f64>();
            for ic in 0..self.in_channels {
                let src = &input[ic * plane..(ic + 1) * plane];
                for ky in 0..KERNEL {
                    for kx in 0..KERNEL {
                        let wi = ((oc * self.in_channels + ic) * KERNEL + ky) * KERNEL + kx;
                        let (y0, y1) = valid_range(ky, h);
                        let (x0, x1) = valid_range(kx, w);
                        let mut acc = 0.0;
                        for y in y0..y1 {
                            let sy = y + ky - 1;
                            let g = &go[y * w + x0..y * w + x1];
                            let s = &src[sy * w + x0 + kx - 1..sy * w + x1 + kx - 1];
                            acc += g.iter().zip(s).map(|(a, b)| a * b).sum::<f64>();
                        }
                        grad.weights[wi] += acc;
                        if let Some(din) = din.as_mut() {
                            let wv = self.weights[wi];
                            let di = &mut din[ic * plane..(ic + 1) * plane];
                            for y in y0..y1 {
                                let sy = y + ky - 1;
                                let g = &go[y * w + x0..y * w + x1];
                                let d = &mut di[sy * w + x0 + kx - 1..sy * w + x1 + kx - 1];
                                for (a, b) in d.iter_mut().zip(g) {
                                    *a += wv * b;
                                }
                            }
                        }
                    }
                }
            }
        }
        din
    }
}

// Output rows/cols whose tap `k` lands inside the unpadded input.
fn valid_range(k: usize, n: usize) -> (usize, usize) {
    match k {
        0 => (1, n),
        1 => (0, n),
        _ => (0, n - 1),
    }
}

impl Dense {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Dense {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    fn forward(&self, x: &[f64]) -> Vec<f64> {
        (0..self.outputs)
            .map(|o| {
                let row = &self.weights[o * self.inputs..(o + 1) * self.inputs];
                self.bias[o] + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
            })
            .collect()
    }

    fn backward(
        &self,
        x: &[f64],
        dout: &[f64],
        grad: &mut Dense,
        want_input: bool,
    ) -> Option<Vec<f64>> {
        let mut dx = want_input.then(|| vec![0.0; self.inputs]);
        for (o, &g) in dout.iter().enumerate() {
            grad.bias[o] += g;
            if g == 0.0 {
                continue;
            }
            let gw = &mut grad.weights[o * self.inputs..(o + 1) * self.inputs];
            for (a, b) in gw.iter_mut().zip(x) {
                *a += g * b;
            }
            if let Some(dx) = dx.as_mut() {
                let row = &self.weights[o * self.inputs..(o + 1) * self.inputs];
                for (a, b) in dx.iter_mut().zip(row) {
                    *a += g * b;
                }
            }
        }
        dx
    }
}

/// Network weights. Also used as a gradient accumulator of the same shape.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    /// Input `(channels, height, width)`; height and width divisible by 4.
    pub input: (usize, usize, usize),
    pub conv1: Conv,
    pub conv2: Conv,
    pub fc1: Dense,
    pub fc2: Dense,
}

pub const LAYER_NAMES: [&str; 4] = ["conv1", "conv2", "fc1", "fc2"];

/// Intermediate activations of one forward pass, kept for backpropagation.
#[derive(Debug, Clone)]
pub struct Activations {
    x: Vec<f64>,
    a1: Vec<f64>,
    p1: Vec<f64>,
    i1: Vec<u32>,
    a2: Vec<f64>,
    p2: Vec<f64>,
    i2: Vec<u32>,
    hidden: Vec<f64>,
    pub logits: Vec<f64>,
}

impl Activations {
    /// ReLU on/off pattern and pooling winners: the piecewise-linear region
    /// the input falls in.
    pub fn region(&self) -> (Vec<bool>, Vec<u32>) {
        let on = self
            .a1
            .iter()
            .chain(&self.a2)
            .chain(&self.hidden)
            .map(|&v| v > 0.0)
            .collect();
        let idx = self.i1.iter().chain(&self.i2).copied().collect();
        (on, idx)
    }
}

fn relu(v: &mut [f64]) {
    v.iter_mut().for_each(|x| *x = x.max(0.0));
}

/// 2×2 max pool; returns pooled values and the flat index of each winner.
fn max_pool(input: &[f64], c: usize, h: usize, w: usize) -> (Vec<f64>, Vec<u32>) {
    let (oh, ow) = (h / 2, w / 2);
    let mut out = Vec::with_capacity(c * oh * ow);
    let mut idx = Vec::with_capacity(c * oh * ow);
    for ch in 0..c {
        let base = ch * h * w;
        for y in 0..oh {
            for x in 0..ow {
                let mut best = base + 2 * y * w + 2 * x;
                for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                    let j = base + (2 * y + dy) * w + 2 * x + dx;
                    if input[j] > input[best] {
                        best = j;
                    }
                }
                out.push(input[best]);
                idx.push(best as u32);
            }
        }
    }
    (out, idx)
}

fn unpool(dout: &[f64], idx: &[u32], len: usize) -> Vec<f64> {
    let mut din = vec![0.0; len];
    for (g, &i) in dout.iter().zip(idx) {
        din[i as usize] += g;
    }
    din
}

/// Softmax probabilities, shifted by the max logit for stability.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|z| (z - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// `log Σ exp(z) − z_label`; non-finite logits give a non-finite loss.
pub fn cross_entropy(logits: &[f64], label: usize) -> f64 {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + logits.iter().map(|z| (z - m).exp()).sum::<f64>().ln() - logits[label]
}

impl Network {
    /// All-zero weights for the given input size.
    pub fn zeros(channels: usize, height: usize, width: usize) -> Result<Self> {
        if channels == 0
            || height < 4
            || width < 4
            || !height.is_multiple_of(4)
            || !width.is_multiple_of(4)
        {
            return Err(Error::config(format!(
                "network input {channels}×{height}×{width} needs positive channels and sides divisible by 4"
            )));
        }
        Ok(Network {
            input: (channels, height, width),
            conv1: Conv::zeros(channels, CONV1_FILTERS),
            conv2: Conv::zeros(CONV1_FILTERS, CONV2_FILTERS),
            fc1: Dense::zeros(CONV2_FILTERS * (height / 4) * (width / 4), HIDDEN),
            fc2: Dense::zeros(HIDDEN, NUM_CLASSES),
        })
    }

    /// He-normal weights for the ReLU layers, Glorot-scaled output layer, zero biases.
    pub fn init(channels: usize, height: usize, width: usize, seed: u64) -> Result<Self> {
        let mut net = Self::zeros(channels, height, width)?;
        let mut rng = seed::rng(seed::derive(seed, &[0x1417]));
        let fans = [
            (channels * KERNEL * KERNEL, 2.0),
            (CONV1_FILTERS * KERNEL * KERNEL, 2.0),
            (net.fc1.inputs, 2.0),
            (HIDDEN, 1.0),
        ];
        for (slot, (fan_in, gain)) in [0usize, 2, 4, 6].into_iter().zip(fans) {
            let normal = Normal::new(0.0, (gain / fan_in as f64).sqrt()).expect("positive std");
            for w in net.slices_mut()[slot].iter_mut() {
                *w = normal.sample(&mut rng);
            }
        }
        Ok(net)
    }

    pub fn input_len(&self) -> usize {
        self.input.0 * self.input.1 * self.input.2
    }

    /// Parameter slices in storage order: weights then bias, layer by layer.
    pub fn slices(&self) -> [&[f64]; 8] {
        [
            &self.conv1.weights,
            &self.conv1.bias,
            &self.conv2.weights,
            &self.conv2.bias,
            &self.fc1.weights,
            &self.fc1.bias,
            &self.fc2.weights,
            &self.fc2.bias,
        ]
    }

    pub fn slices_mut(&mut self) -> [&mut [f64]; 8] {
        [
            &mut self.conv1.weights,
            &mut self.conv1.bias,
            &mut self.conv2.weights,
            &mut self.conv2.bias,
            &mut self.fc1.weights,
            &mut self.fc1.bias,
            &mut self.fc2.weights,
            &mut self.fc2.bias,
        ]
    }

    pub fn param_count(&self) -> usize {
        self.slices().iter().map(|s| s.len()).sum()
    }

    pub fn zeros_like(&self) -> Self {
        let (c, h, w) = self.input;
        Self::zeros(c, h, w).expect("shape already validated")
    }

    /// `self += scale · other`.
    pub fn add_scaled(&mut self, other: &Network, scale: f64) {
        for (a, b) in self.slices_mut().into_iter().zip(other.slices()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += scale * y;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.slices()
            .iter()
            .all(|s| s.iter().all(|v| v.is_finite()))
    }

    pub fn forward(&self, x: &[f64]) -> Activations {
        assert_eq!(x.len(), self.input_len(), "input length");
        let (_, h, w) = self.input;
        let x: Vec<f64> = x.iter().map(|v| v - INPUT_CENTER).collect();
        let mut a1 = self.conv1.forward(&x, h, w);
        relu(&mut a1);
        let (p1, i1) = max_pool(&a1, CONV1_FILTERS, h, w);
        let mut a2 = self.conv2.forward(&p1, h / 2, w / 2);
        relu(&mut a2);
        let (p2, i2) = max_pool(&a2, CONV2_FILTERS, h / 2, w / 2);
        let mut hidden = self.fc1.forward(&p2);
        relu(&mut hidden);
        let logits = self.fc2.forward(&hidden);
        Activations {
            x,
            a1,
            p1,
            i1,
            a2,
            p2,
            i2,
            hidden,
            logits,
        }
    }

    /// Cross-entropy loss of one example; gradients are added to `grad`.
    pub fn backward(&self, act: &Activations, label: usize, grad: &mut Network) -> f64 {
        let (_, h, w) = self.input;
        let probs = softmax(&act.logits);
        let loss = cross_entropy(&act.logits, label);
        let mut dz = probs;
        dz[label] -= 1.0;

        let mut dh = self
            .fc2
            .backward(&act.hidden, &dz, &mut grad.fc2, true)
            .expect("input grad");
        mask_relu(&mut dh, &act.hidden);
        let dp2 = self
            .fc1
            .backward(&act.p2, &dh, &mut grad.fc1, true)
            .expect("input grad");
        let mut da2 = unpool(&dp2, &act.i2, act.a2.len());
        mask_relu(&mut da2, &act.a2);
        let dp1 = self
            .conv2
            .backward(&act.p1, &da2, h / 2, w / 2, &mut grad.conv2, true)
            .expect("input grad");
        let mut da1 = unpool(&dp1, &act.i1, act.a1.len());
        mask_relu(&mut da1, &act.a1);
        self.conv1
            .backward(&act.x, &da1, h, w, &mut grad.conv1, false);
        loss
    }

    /// Mean cross-entropy over a batch, no gradients.
    pub fn loss(&self, inputs: &[Vec<f64>], labels: &[usize]) -> f64 {
        let total: f64 = inputs
            .iter()
            .zip(labels)
            .map(|(x, &y)| cross_entropy(&self.forward(x).logits, y))
            .sum();
        total / inputs.len() as f64
    }
}

fn mask_relu(grad: &mut [f64], activated: &[f64]) {
    for (g, &a) in grad.iter_mut().zip(activated) {
        if a <= 0.0 {
            *g = 0.0;
        }
    }
}

/// Outcome of comparing analytic and finite-difference gradients on one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerCheck {
    pub layer: &'static str,
    /// Parameters compared.
    pub checked: usize,
    /// Probes whose ±step perturbation crossed a ReLU or pooling kink.
    pub kink_probes: usize,
    pub max_relative_error: f64,
}

/// Region recorded by [`Activations::region`], split back per layer.
struct PinnedRegion<'a> {
    on: &'a [bool],
    idx: &'a [u32],
}

impl Network {
    /// Logits with every ReLU gate and pooling winner fixed to `region`.
    /// Within that region the network is exactly the piece backprop
    /// differentiates, so finite differences stay valid across kinks.
    fn forward_pinned(&self, x: &[f64], region: &PinnedRegion) -> Vec<f64> {
        let (_, h, w) = self.input;
        let x: Vec<f64> = x.iter().map(|v| v - INPUT_CENTER).collect();
        let gate = |v: &mut [f64], on: &[bool]| {
            for (a, &keep) in v.iter_mut().zip(on) {
                if !keep {
                    *a = 0.0;
                }
            }
        };
        let mut a1 = self.conv1.forward(&x, h, w);
        let (on1, rest) = region.on.split_at(a1.len());
        gate(&mut a1, on1);
        let (idx1, idx2) = region.idx.split_at(CONV1_FILTERS * (h / 2) * (w / 2));
        let p1: Vec<f64> = idx1.iter().map(|&i| a1[i as usize]).collect();
        let mut a2 = self.conv2.forward(&p1, h / 2, w / 2);
        let (on2, on3) = rest.split_at(a2.len());
        gate(&mut a2, on2);
        let p2: Vec<f64> = idx2.iter().map(|&i| a2[i as usize]).collect();
        let mut hidden = self.fc1.forward(&p2);
        gate(&mut hidden, on3);
        self.fc2.forward(&hidden)
    }
}

/// Central-difference check of the mean batch loss against backpropagation.
///
/// Every weight of each layer is probed, except that layers with more than
/// `max_per_layer` weights are sampled evenly. Losses are evaluated with the
/// activation pattern of the unperturbed pass held fixed; for probes that stay
/// inside that pattern this is the ordinary loss, and probes that would cross
/// a kink (counted in [`LayerCheck::kink_probes`]) still measure the one-sided
/// piece the analytic gradient belongs to rather than a jump.
pub fn gradient_check(
    net: &Network,
    inputs: &[Vec<f64>],
    labels: &[usize],
    step: f64,
    max_per_layer: usize,
) -> Vec<LayerCheck> {
    let n = inputs.len() as f64;
    let mut grad = net.zeros_like();
    let mut regions = Vec::new();
    for (x, &y) in inputs.iter().zip(labels) {
        let act = net.forward(x);
        regions.push(act.region());
        net.backward(&act, y, &mut grad);
    }
    let analytic: Vec<Vec<f64>> = grad
        .slices()
        .iter()
        .map(|s| s.iter().map(|g| g / n).collect())
        .collect();

    let pinned_loss = |probe: &Network| {
        let total: f64 = inputs
            .iter()
            .zip(labels)
            .zip(&regions)
            .map(|((x, &y), (on, idx))| {
                cross_entropy(&probe.forward_pinned(x, &PinnedRegion { on, idx }), y)
            })
            .sum();
        total / n
    };
    let same_region = |probe: &Network| {
        inputs
            .iter()
            .zip(&regions)
            .all(|(x, r)| probe.forward(x).region() == *r)
    };

    let mut out = Vec::new();
    for (layer, name) in LAYER_NAMES.iter().enumerate() {
        let mut check = LayerCheck {
            layer: name,
            checked: 0,
            kink_probes: 0,
            max_relative_error: 0.0,
        };
        for slot in [2 * layer, 2 * layer + 1] {
            let len = analytic[slot].len();
            let stride = len.div_ceil(max_per_layer.max(1)).max(1);
            for i in (0..len).step_by(stride) {
                let mut probe = net.clone();
                probe.slices_mut()[slot][i] += step;
                let plus = pinned_loss(&probe);
                let mut crossed = !same_region(&probe);
                probe.slices_mut()[slot][i] -= 2.0 * step;
                let minus = pinned_loss(&probe);
                crossed |= !same_region(&probe);
                let numeric = (plus - minus) / (2.0 * step);
                let a = analytic[slot][i];
                let scale = a.abs().max(numeric.abs());
                let rel = if scale < 1e-10 {
                    0.0
                } else {
                    (a - numeric).abs() / scale
                };
                check.max_relative_error = check.max_relative_error.max(rel);
                check.checked += 1;
                check.kink_probes += crossed as usize;
            }
        }
        out.push(check);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_inputs(net: &Network, n: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = seed::rng(seed);
        (0..n)
            .map(|_| {
                (0..net.input_len())
                    .map(|_| rng.random_range(0.0..1.0))
                    .collect()
            })
            .collect()
    }

    #[test]
    fn zero_network_is_uniform() {
        let net = Network::zeros(3, 8, 8).unwrap();
        let p = softmax(&net.forward(&vec![0.3; net.input_len()]).logits);
        assert!(p.iter().all(|v| (v - 1.0 / 9.0).abs() < 1e-15));
    }

    #[test]
    fn bad_input_shape_rejected() {
        assert!(Network::zeros(3, 10, 8).is_err());
        assert!(Network::zeros(0, 8, 8).is_err());
    }

    #[test]
    fn softmax_sums_to_one() {
        let p = softmax(&[1000.0, -1000.0, 3.0, 0.0]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    /// Brute-force convolution with explicit zero padding.
    #[test]
    fn conv_matches_naive() {
        let mut rng = seed::rng(3);
        let mut conv = Conv::zeros(2, 3);
        conv.weights
            .iter_mut()
            .for_each(|w| *w = rng.random_range(-1.0..1.0));
        conv.bias
            .iter_mut()
            .for_each(|b| *b = rng.random_range(-1.0..1.0));
        let (h, w) = (5, 7);
        let input: Vec<f64> = (0..2 * h * w)
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let out = conv.forward(&input, h, w);
        for oc in 0..3 {
            for y in 0..h as isize {
                for x in 0..w as isize {
                    let mut acc = conv.bias[oc];
                    for ic in 0..2 {
                        for ky in 0..3isize {
                            for kx in 0..3isize {
                                let (sy, sx) = (y + ky - 1, x + kx - 1);
                                if sy < 0 || sx < 0 || sy >= h as isize || sx >= w as isize {
                                    continue;
                                }
                                let wv = conv.weights
                                    [((oc * 2 + ic) * 3 + ky as usize) * 3 + kx as usize];
                                acc += wv * input[ic * h * w + sy as usize * w + sx as usize];
                            }
                        }
                    }
                    let got = out[oc * h * w + y as usize * w + x as usize];
                    assert!((got - acc).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let net = Network::init(3, 8, 8, 11).unwrap();
        let inputs = random_inputs(&net, 3, 5);
        let checks = gradient_check(&net, &inputs, &[0, 4, 8], 1e-3, 400);
        for c in &checks {
            assert!(c.checked > 0, "{c:?}");
            assert!(c.max_relative_error < 1e-4, "{c:?}");
        }
    }

    #[test]
    fn pinned_forward_matches_free_forward() {
        let net = Network::init(3, 8, 8, 4).unwrap();
        for x in random_inputs(&net, 4, 9) {
            let act = net.forward(&x);
            let (on, idx) = act.region();
            assert_eq!(
                net.forward_pinned(&x, &PinnedRegion { on: &on, idx: &idx }),
                act.logits
            );
        }
    }

    #[test]
    fn init_is_seeded() {
        let a = Network::init(3, 8, 8, 1).unwrap();
        assert_eq!(a, Network::init(3, 8, 8, 1).unwrap());
        assert_ne!(a, Network::init(3, 8, 8, 2).unwrap());
        assert!(a.is_finite());
    }
}
