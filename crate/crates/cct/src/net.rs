//! Dense feedforward classifier with analytic backpropagation and Adam.
//!
//! A [`Network`] is a stack of dense layers with ReLU hidden activations and
//! a softmax output head. Everything is `f64` and deterministic: the same
//! architecture and seed always produce bit-identical parameters, and
//! `forward`/`backward`/`adam_step` are pure functions of their inputs.
//!
//! Data layout: batches are flat row-major `[batch * dim]`; layer weights are
//! row-major `(out_dim, in_dim)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hidden-layer nonlinearity. The output layer is always softmax.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Relu,
}

/// One dense layer: `z = W x + b`, weights row-major `(out_dim, in_dim)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    in_dim: usize,
    out_dim: usize,
    weights: Vec<f64>,
    biases: Vec<f64>,
}

impl Layer {
    fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Layer {
            in_dim,
            out_dim,
            weights: vec![0.0; in_dim * out_dim],
            biases: vec![0.0; out_dim],
        }
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    pub fn weight(&self, row: usize, col: usize) -> f64 {
        self.weights[row * self.in_dim + col]
    }

    pub fn set_weight(&mut self, row: usize, col: usize, value: f64) {
        self.weights[row * self.in_dim + col] = value;
    }

    pub fn set_bias(&mut self, row: usize, value: f64) {
        self.biases[row] = value;
    }

    pub(crate) fn from_parts(in_dim: usize, out_dim: usize, weights: Vec<f64>, biases: Vec<f64>) -> Result<Self> {
        if weights.len() != in_dim * out_dim || biases.len() != out_dim {
            return Err(Error::Shape(format!(
                "layer ({out_dim}x{in_dim}) expects {} weights and {out_dim} biases, got {} and {}",
                in_dim * out_dim,
                weights.len(),
                biases.len()
            )));
        }
        Ok(Layer { in_dim, out_dim, weights, biases })
    }
}

/// A dense feedforward classifier. The last layer's output size is the
/// number of classes `C`; `forward` returns softmax probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    layers: Vec<Layer>,
    activation: Activation,
    seed: u64,
}

fn validate_arch(arch: &[usize]) -> Result<()> {
    if arch.len() < 2 {
        return Err(Error::InvalidArchitecture(format!(
            "need at least input and output sizes, got {arch:?}"
        )));
    }
    if arch.iter().any(|&s| s == 0) {
        return Err(Error::InvalidArchitecture(format!(
            "layer sizes must be >= 1, got {arch:?}"
        )));
    }
    Ok(())
}

impl Network {
    /// Initializes a network with He-uniform weights (`limit = sqrt(6/fan_in)`)
    /// and zero biases, deterministically from `seed`.
    pub fn init(arch: &[usize], seed: u64) -> Result<Self> {
        validate_arch(arch)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::with_capacity(arch.len() - 1);
        for pair in arch.windows(2) {
            let (in_dim, out_dim) = (pair[0], pair[1]);
            let limit = (6.0 / in_dim as f64).sqrt();
            let weights: Vec<f64> = (0..in_dim * out_dim)
                .map(|_| rng.gen_range(-limit..limit))
                .collect();
            layers.push(Layer::from_parts(in_dim, out_dim, weights, vec![0.0; out_dim])?);
        }
        Ok(Network { layers, activation: Activation::Relu, seed })
    }

    /// All-zero parameters; useful for tests that hand-set weights.
    pub fn zeros(arch: &[usize]) -> Result<Self> {
        validate_arch(arch)?;
        let layers = arch
            .windows(2)
            .map(|pair| Layer::zeros(pair[0], pair[1]))
            .collect();
        Ok(Network { layers, activation: Activation::Relu, seed: 0 })
    }

    /// Rebuilds a network from raw per-layer parameters (checkpoint loading,
    /// hand-crafted test fixtures). Weights are row-major per layer.
    pub fn from_parameters(
        arch: &[usize],
        seed: u64,
        weights: &[Vec<f64>],
        biases: &[Vec<f64>],
    ) -> Result<Self> {
        validate_arch(arch)?;
        let n_layers = arch.len() - 1;
        if weights.len() != n_layers || biases.len() != n_layers {
            return Err(Error::Shape(format!(
                "expected {n_layers} weight/bias arrays, got {} and {}",
                weights.len(),
                biases.len()
            )));
        }
        let mut layers = Vec::with_capacity(n_layers);
        for (k, pair) in arch.windows(2).enumerate() {
            layers.push(Layer::from_parts(
                pair[0],
                pair[1],
                weights[k].clone(),
                biases[k].clone(),
            )?);
        }
        Ok(Network { layers, activation: Activation::Relu, seed })
    }

    /// The same network tagged with a different initialization seed.
    /// Ensembles require pairwise-distinct seeds even for crafted networks.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn arch(&self) -> Vec<usize> {
        let mut arch = Vec::with_capacity(self.layers.len() + 1);
        arch.push(self.layers[0].in_dim);
        arch.extend(self.layers.iter().map(|l| l.out_dim));
        arch
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    /// Number of classes (output size of the last layer).
    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("non-empty").out_dim
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layer_mut(&mut self, index: usize) -> &mut Layer {
        &mut self.layers[index]
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.biases.len())
            .sum()
    }

    /// Flat parameter access in layer order, weights before biases.
    /// Used by finite-difference oracles in tests.
    pub fn get_param(&self, mut index: usize) -> f64 {
        for layer in &self.layers {
            if index < layer.weights.len() {
                return layer.weights[index];
            }
            index -= layer.weights.len();
            if index < layer.biases.len() {
                return layer.biases[index];
            }
            index -= layer.biases.len();
        }
        panic!("parameter index out of range");
    }

    /// Flat parameter mutation matching [`Network::get_param`]'s layout.
    pub fn set_param(&mut self, mut index: usize, value: f64) {
        for layer in &mut self.layers {
            if index < layer.weights.len() {
                layer.weights[index] = value;
                return;
            }
            index -= layer.weights.len();
            if index < layer.biases.len() {
                layer.biases[index] = value;
                return;
            }
            index -= layer.biases.len();
        }
        panic!("parameter index out of range");
    }

    pub fn all_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.biases).all(|v| v.is_finite()))
    }

    /// Runs the batch through the network, keeping per-layer pre-activations
    /// and activations for backprop. `inputs` is row-major `[batch * input_dim]`.
    pub fn forward(&self, inputs: &[f64], batch: usize) -> Result<ForwardTrace> {
        let in_dim = self.input_dim();
        if batch == 0 {
            return Err(Error::Shape("empty batch".into()));
        }
        if inputs.len() != batch * in_dim {
            return Err(Error::Shape(format!(
                "expected {} values for a {batch}x{in_dim} batch, got {}",
                batch * in_dim,
                inputs.len()
            )));
        }

        let n_layers = self.layers.len();
        let mut act: Vec<Vec<f64>> = Vec::with_capacity(n_layers + 1);
        act.push(inputs.to_vec());
        let mut pre: Vec<Vec<f64>> = Vec::with_capacity(n_layers);

        for (k, layer) in self.layers.iter().enumerate() {
            let prev = &act[k];
            let (din, dout) = (layer.in_dim, layer.out_dim);
            let mut z = vec![0.0; batch * dout];
            for r in 0..batch {
                let x = &prev[r * din..(r + 1) * din];
                let zr = &mut z[r * dout..(r + 1) * dout];
                for o in 0..dout {
                    let row = &layer.weights[o * din..(o + 1) * din];
                    let mut sum = layer.biases[o];
                    for (w, xi) in row.iter().zip(x) {
                        sum += w * xi;
                    }
                    zr[o] = sum;
                }
            }
            let mut a = z.clone();
            if k + 1 == n_layers {
                for r in 0..batch {
                    softmax_in_place(&mut a[r * dout..(r + 1) * dout]);
                }
            } else {
                for v in &mut a {
                    if *v < 0.0 {
                        *v = 0.0;
                    }
                }
            }
            pre.push(z);
            act.push(a);
        }

        Ok(ForwardTrace { batch, pre, act })
    }

    /// Convenience single-sample forward returning the probability vector.
    pub fn forward_one(&self, x: &[f64]) -> Result<Vec<f64>> {
        let trace = self.forward(x, 1)?;
        Ok(trace.probs().to_vec())
    }

    /// Backpropagates `d_probs = dL/d p` (row-major `[batch * classes]`)
    /// through the softmax head and the dense stack. Returns exact analytic
    /// gradients summed over the batch rows; any per-sample averaging must
    /// already be folded into `d_probs`.
    pub fn backward(&self, trace: &ForwardTrace, d_probs: &[f64]) -> Result<Gradients> {
        let batch = trace.batch;
        let classes = self.output_dim();
        if trace.pre.len() != self.layers.len()
            || trace.act[0].len() != batch * self.input_dim()
            || trace
                .pre
                .iter()
                .zip(&self.layers)
                .any(|(z, l)| z.len() != batch * l.out_dim)
        {
            return Err(Error::Shape("trace does not match this network".into()));
        }
        if d_probs.len() != batch * classes {
            return Err(Error::Shape(format!(
                "expected {} gradient values, got {}",
                batch * classes,
                d_probs.len()
            )));
        }

        // Softmax backprop: dz_c = p_c * (g_c - sum_k g_k p_k).
        let probs = trace.probs();
        let mut dz = vec![0.0; batch * classes];
        for r in 0..batch {
            let p = &probs[r * classes..(r + 1) * classes];
            let g = &d_probs[r * classes..(r + 1) * classes];
            let dot: f64 = g.iter().zip(p).map(|(gi, pi)| gi * pi).sum();
            for c in 0..classes {
                dz[r * classes + c] = p[c] * (g[c] - dot);
            }
        }

        let mut d_weights: Vec<Vec<f64>> = self
            .layers
            .iter()
            .map(|l| vec![0.0; l.weights.len()])
            .collect();
        let mut d_biases: Vec<Vec<f64>> = self
            .layers
            .iter()
            .map(|l| vec![0.0; l.biases.len()])
            .collect();

        for k in (0..self.layers.len()).rev() {
            let layer = &self.layers[k];
            let (din, dout) = (layer.in_dim, layer.out_dim);
            let a_prev = &trace.act[k];

            for r in 0..batch {
                let x = &a_prev[r * din..(r + 1) * din];
                for o in 0..dout {
                    let d = dz[r * dout + o];
                    if d == 0.0 {
                        continue;
                    }
                    d_biases[k][o] += d;
                    let row = &mut d_weights[k][o * din..(o + 1) * din];
                    for (dw, xi) in row.iter_mut().zip(x) {
                        *dw += d * xi;
                    }
                }
            }

            if k > 0 {
                let mut dz_prev = vec![0.0; batch * din];
                for r in 0..batch {
                    for o in 0..dout {
                        let d = dz[r * dout + o];
                        if d == 0.0 {
                            continue;
                        }
                        let row = &layer.weights[o * din..(o + 1) * din];
                        let target = &mut dz_prev[r * din..(r + 1) * din];
                        for (t, w) in target.iter_mut().zip(row) {
                            *t += d * w;
                        }
                    }
                }
                // ReLU gate on the previous layer's pre-activations.
                for (t, z) in dz_prev.iter_mut().zip(&trace.pre[k - 1]) {
                    if *z <= 0.0 {
                        *t = 0.0;
                    }
                }
                dz = dz_prev;
            }
        }

        Ok(Gradients { d_weights, d_biases })
    }

    /// One Adam update with bias correction: `theta -= lr * m_hat / (sqrt(v_hat) + eps)`.
    pub fn adam_step(&mut self, state: &mut AdamState, grads: &Gradients, lr: f64) -> Result<()> {
        if !(lr > 0.0) {
            return Err(Error::Config(format!("learning rate must be > 0, got {lr}")));
        }
        if grads.d_weights.len() != self.layers.len() {
            return Err(Error::Shape("gradient layer count mismatch".into()));
        }
        for (k, layer) in self.layers.iter().enumerate() {
            if grads.d_weights[k].len() != layer.weights.len()
                || grads.d_biases[k].len() != layer.biases.len()
            {
                return Err(Error::Shape(format!("gradient shape mismatch in layer {k}")));
            }
            if state.m_weights[k].len() != layer.weights.len() {
                return Err(Error::Shape(format!("optimizer state mismatch in layer {k}")));
            }
            if grads.d_weights[k]
                .iter()
                .chain(&grads.d_biases[k])
                .any(|v| !v.is_finite())
            {
                return Err(Error::Numeric(format!("non-finite gradient in layer {k}")));
            }
        }

        state.step += 1;
        let t = state.step as i32;
        let (b1, b2, eps) = (state.beta1, state.beta2, state.epsilon);
        let bias1 = 1.0 - b1.powi(t);
        let bias2 = 1.0 - b2.powi(t);

        for (k, layer) in self.layers.iter_mut().enumerate() {
            let update = |param: &mut f64, m: &mut f64, v: &mut f64, g: f64| {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                let m_hat = *m / bias1;
                let v_hat = *v / bias2;
                *param -= lr * m_hat / (v_hat.sqrt() + eps);
            };
            for ((w, m), (v, g)) in layer
                .weights
                .iter_mut()
                .zip(&mut state.m_weights[k])
                .zip(state.v_weights[k].iter_mut().zip(&grads.d_weights[k]))
            {
                update(w, m, v, *g);
            }
            for ((b, m), (v, g)) in layer
                .biases
                .iter_mut()
                .zip(&mut state.m_biases[k])
                .zip(state.v_biases[k].iter_mut().zip(&grads.d_biases[k]))
            {
                update(b, m, v, *g);
            }
            if layer.weights.iter().chain(&layer.biases).any(|v| !v.is_finite()) {
                return Err(Error::Numeric(format!(
                    "non-finite parameter after update in layer {k}"
                )));
            }
        }
        Ok(())
    }
}

fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

/// Per-layer pre-activations and activations for one mini-batch.
/// `act[0]` is a copy of the inputs; the last activation holds the softmax
/// probabilities.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    batch: usize,
    pre: Vec<Vec<f64>>,
    act: Vec<Vec<f64>>,
}

impl ForwardTrace {
    pub fn batch(&self) -> usize {
        self.batch
    }

    /// Flat `[batch * out_dim]` pre-activations of layer `layer`.
    pub fn pre_activations(&self, layer: usize) -> &[f64] {
        &self.pre[layer]
    }

    pub fn classes(&self) -> usize {
        self.act.last().expect("non-empty").len() / self.batch
    }

    /// Flat `[batch * classes]` softmax probabilities.
    pub fn probs(&self) -> &[f64] {
        self.act.last().expect("non-empty")
    }

    pub fn prob_row(&self, row: usize) -> &[f64] {
        let c = self.classes();
        &self.probs()[row * c..(row + 1) * c]
    }
}

/// Gradients shaped like a [`Network`]'s parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub d_weights: Vec<Vec<f64>>,
    pub d_biases: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(net: &Network) -> Self {
        Gradients {
            d_weights: net.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            d_biases: net.layers.iter().map(|l| vec![0.0; l.biases.len()]).collect(),
        }
    }

    /// Flat view in the same order as [`Network::get_param`].
    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.d_weights.iter().zip(&self.d_biases) {
            out.extend_from_slice(w);
            out.extend_from_slice(b);
        }
        out
    }
}

/// Adam moment accumulators shaped like a network's parameters.
#[derive(Debug, Clone)]
pub struct AdamState {
    m_weights: Vec<Vec<f64>>,
    v_weights: Vec<Vec<f64>>,
    m_biases: Vec<Vec<f64>>,
    v_biases: Vec<Vec<f64>>,
    step: u64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
}

impl AdamState {
    /// Fresh state with the canonical defaults `beta1=0.9, beta2=0.999, eps=1e-8`.
    pub fn new(net: &Network) -> Self {
        AdamState {
            m_weights: net.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            v_weights: net.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            m_biases: net.layers.iter().map(|l| vec![0.0; l.biases.len()]).collect(),
            v_biases: net.layers.iter().map(|l| vec![0.0; l.biases.len()]).collect(),
            step: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn first_moment(&self, layer: usize) -> &[f64] {
        &self.m_weights[layer]
    }
}

/// Exponential learning-rate decay: `base * factor^epoch`.
pub fn decayed_lr(base: f64, factor: f64, epoch: u32) -> f64 {
    base * factor.powi(epoch as i32)
}

/// The per-epoch decay factor used throughout: 5% off per epoch.
pub const DEFAULT_LR_DECAY: f64 = 0.95;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss;

    #[test]
    fn init_is_deterministic_per_seed() {
        let a = Network::init(&[2, 4, 3], 7).unwrap();
        let b = Network::init(&[2, 4, 3], 7).unwrap();
        assert_eq!(a, b);

        let c = Network::init(&[2, 4, 3], 8).unwrap();
        let differs = a
            .layers()
            .iter()
            .zip(c.layers())
            .any(|(x, y)| x.weights() != y.weights());
        assert!(differs, "distinct seeds must give distinct weights");
    }

    #[test]
    fn init_rejects_degenerate_arch() {
        assert!(matches!(
            Network::init(&[2], 1),
            Err(Error::InvalidArchitecture(_))
        ));
        assert!(matches!(
            Network::init(&[], 1),
            Err(Error::InvalidArchitecture(_))
        ));
        assert!(matches!(
            Network::init(&[2, 0, 3], 1),
            Err(Error::InvalidArchitecture(_))
        ));
    }

    #[test]
    fn zero_network_outputs_uniform_rows() {
        let net = Network::zeros(&[3, 5, 7]).unwrap();
        let trace = net.forward(&[0.4, -1.0, 2.0, 0.0, 0.0, 0.0], 2).unwrap();
        for r in 0..2 {
            for &p in trace.prob_row(r) {
                assert!((p - 1.0 / 7.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn softmax_is_stable_for_huge_logits() {
        let mut net = Network::zeros(&[2, 3]).unwrap();
        for o in 0..3 {
            net.layer_mut(0).set_bias(o, 1000.0);
        }
        let probs = net.forward_one(&[0.0, 0.0]).unwrap();
        for p in probs {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
            assert!(p.is_finite());
        }
    }

    #[test]
    fn forward_rows_sum_to_one() {
        let net = Network::init(&[4, 8, 5], 3).unwrap();
        let inputs: Vec<f64> = (0..40).map(|i| (i as f64 * 0.37).sin()).collect();
        let trace = net.forward(&inputs, 10).unwrap();
        for r in 0..10 {
            let s: f64 = trace.prob_row(r).iter().sum();
            assert!((s - 1.0).abs() < 1e-9);
            assert!(trace.prob_row(r).iter().all(|&p| p > 0.0 && p < 1.0));
        }
    }

    #[test]
    fn forward_rejects_dimension_mismatch() {
        let net = Network::zeros(&[3, 2]).unwrap();
        assert!(matches!(net.forward(&[1.0, 2.0], 1), Err(Error::Shape(_))));
    }

    #[test]
    fn forward_matches_hand_computation() {
        // 2-2-2 net evaluated by hand: one hidden unit goes negative so the
        // ReLU clamp is exercised.
        let mut net = Network::zeros(&[2, 2, 2]).unwrap();
        {
            let l0 = net.layer_mut(0);
            l0.set_weight(0, 0, 1.0);
            l0.set_weight(0, 1, -0.5);
            l0.set_weight(1, 0, 0.25);
            l0.set_weight(1, 1, 0.75);
            l0.set_bias(0, 0.1);
            l0.set_bias(1, -0.5);
        }
        {
            let l1 = net.layer_mut(1);
            l1.set_weight(0, 0, 0.5);
            l1.set_weight(0, 1, -1.0);
            l1.set_weight(1, 0, 1.5);
            l1.set_weight(1, 1, 2.0);
            l1.set_bias(1, 0.3);
        }
        let probs = net.forward_one(&[1.0, 0.0]).unwrap();

        // z0 = [1.0*1 - 0.5*0 + 0.1, 0.25*1 + 0.75*0 - 0.5] = [1.1, -0.25]
        // a0 = [1.1, 0.0]
        // z1 = [0.5*1.1, 1.5*1.1 + 0.3] = [0.55, 1.95]
        let (z0, z1) = (0.55_f64, 1.95_f64);
        let m = z1;
        let e0 = (z0 - m).exp();
        let e1 = (z1 - m).exp();
        let expect = [e0 / (e0 + e1), e1 / (e0 + e1)];
        assert!((probs[0] - expect[0]).abs() < 1e-15);
        assert!((probs[1] - expect[1]).abs() < 1e-15);
    }

    #[test]
    fn backward_zero_upstream_gives_zero_gradients() {
        let net = Network::init(&[2, 3, 2], 11).unwrap();
        let trace = net.forward(&[0.3, -0.8], 1).unwrap();
        let grads = net.backward(&trace, &[0.0, 0.0]).unwrap();
        assert!(grads.flat().iter().all(|&g| g == 0.0));
    }

    /// Central finite differences of cross-entropy through a tiny net.
    #[test]
    fn backward_matches_finite_differences_for_cross_entropy() {
        let arch = [2, 3, 2];
        let x = [0.6, -0.4];
        let label = 1usize;
        let h = 1e-5;

        for seed in 0..20u64 {
            let mut net = Network::init(&arch, seed).unwrap();
            let trace = net.forward(&x, 1).unwrap();
            let probs = trace.prob_row(0);

            // dCE/dp = -1[c==y]/p[y]
            let mut d_probs = vec![0.0; 2];
            d_probs[label] = -1.0 / probs[label];
            let analytic = net.backward(&trace, &d_probs).unwrap().flat();

            for idx in 0..net.param_count() {
                let orig = net.get_param(idx);
                net.set_param(idx, orig + h);
                let up = loss::cross_entropy(&net.forward_one(&x).unwrap(), label).unwrap();
                net.set_param(idx, orig - h);
                let down = loss::cross_entropy(&net.forward_one(&x).unwrap(), label).unwrap();
                net.set_param(idx, orig);

                let numeric = (up - down) / (2.0 * h);
                let denom = analytic[idx].abs().max(numeric.abs());
                if denom > 1e-7 {
                    assert!(
                        (analytic[idx] - numeric).abs() / denom < 1e-6,
                        "seed {seed} param {idx}: analytic {} vs numeric {numeric}",
                        analytic[idx]
                    );
                } else {
                    assert!((analytic[idx] - numeric).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn adam_zero_gradients_leave_parameters_unchanged() {
        let mut net = Network::init(&[2, 3, 2], 5).unwrap();
        let reference = net.clone();
        let mut state = AdamState::new(&net);
        let zero = Gradients::zeros_like(&net);
        for _ in 0..3 {
            net.adam_step(&mut state, &zero, 0.01).unwrap();
        }
        assert_eq!(net, reference);
        assert_eq!(state.step(), 3);
    }

    #[test]
    fn adam_moments_decay_after_gradient_stops() {
        let mut net = Network::init(&[1, 1], 5).unwrap();
        let mut state = AdamState::new(&net);
        let mut ones = Gradients::zeros_like(&net);
        ones.d_weights[0][0] = 1.0;
        net.adam_step(&mut state, &ones, 0.01).unwrap();
        let m_after_pulse = state.first_moment(0)[0];
        let zero = Gradients::zeros_like(&net);
        net.adam_step(&mut state, &zero, 0.01).unwrap();
        assert!((state.first_moment(0)[0] - 0.9 * m_after_pulse).abs() < 1e-15);
    }

    #[test]
    fn adam_first_step_is_bias_corrected() {
        // Single parameter, g=1: m_hat = v_hat = 1, so the first update is
        // exactly -lr / (1 + eps).
        let mut net = Network::zeros(&[1, 1]).unwrap();
        let mut state = AdamState::new(&net);
        let mut grads = Gradients::zeros_like(&net);
        grads.d_weights[0][0] = 1.0;
        let lr = 0.003;
        net.adam_step(&mut state, &grads, lr).unwrap();
        let expected = -lr / (1.0 + 1e-8);
        assert!((net.layers()[0].weights()[0] - expected).abs() < 1e-18);
    }

    #[test]
    fn adam_rejects_non_finite_gradients() {
        let mut net = Network::init(&[2, 2], 9).unwrap();
        let mut state = AdamState::new(&net);
        let mut grads = Gradients::zeros_like(&net);
        grads.d_biases[0][1] = f64::NAN;
        let err = net.adam_step(&mut state, &grads, 0.01).unwrap_err();
        assert!(matches!(err, Error::Numeric(msg) if msg.contains("layer 0")));
    }

    #[test]
    fn lr_decay_examples() {
        assert_eq!(decayed_lr(0.001, 0.95, 0), 0.001);
        assert!((decayed_lr(0.001, 0.95, 1) - 0.00095).abs() < 1e-18);
        assert!((decayed_lr(0.01, 0.95, 2) - 0.009025).abs() < 1e-16);
    }
}
