use rand::Rng;
use serde::{Deserialize, Serialize};

use super::AgentError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Relu,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `a`.
    #[inline]
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Dense layer, weights row-major `n_out x n_in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub n_in: usize,
    pub n_out: usize,
}

#[derive(Debug, Clone, PartialEq)]
struct ForwardCache {
    /// `acts[0]` is the input; `acts[l + 1]` is layer `l`'s output.
    acts: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
}

/// Parameter gradients with the same layout as the network, plus the
/// gradient with respect to the input.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<Vec<f64>>,
    pub input: Vec<f64>,
}

impl Gradients {
    pub fn zeros_like(net: &Mlp) -> Self {
        Gradients {
            weights: net.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            bias: net.layers.iter().map(|l| vec![0.0; l.bias.len()]).collect(),
            input: vec![0.0; net.input_dim()],
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        for (a, b) in self.bias.iter_mut().zip(&other.bias) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
    }

    pub fn norm(&self) -> f64 {
        self.weights.iter().chain(&self.bias).flatten().map(|g| g * g).sum::<f64>().sqrt()
    }

    /// Rescales so that the parameter-gradient norm is at most `max_norm`.
    pub fn clip_norm(&mut self, max_norm: f64) {
        let n = self.norm();
        if n > max_norm && n.is_finite() {
            let s = max_norm / n;
            self.weights.iter_mut().chain(self.bias.iter_mut()).flatten().for_each(|g| *g *= s);
        }
    }

    /// Parameter gradients flattened in [`Mlp::params`] order.
    pub fn flat(&self) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.bias)
            .flat_map(|(w, b)| w.iter().chain(b.iter()).copied())
            .collect()
    }
}

/// Fully connected network; hidden layers use `activation`, the output
/// layer is linear.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    layers: Vec<Layer>,
    activation: Activation,
    cache: Option<ForwardCache>,
}

impl Mlp {
    pub fn zeros(sizes: &[usize], activation: Activation) -> Result<Self, AgentError> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(AgentError::InvalidConfig("layer sizes need at least two positive entries".into()));
        }
        let layers = sizes
            .windows(2)
            .map(|w| Layer { weights: vec![0.0; w[0] * w[1]], bias: vec![0.0; w[1]], n_in: w[0], n_out: w[1] })
            .collect();
        Ok(Mlp { sizes: sizes.to_vec(), layers, activation, cache: None })
    }

    /// Glorot-uniform weights in `±sqrt(6 / (fan_in + fan_out))`, zero biases.
    pub fn new<R: Rng>(sizes: &[usize], activation: Activation, rng: &mut R) -> Result<Self, AgentError> {
        let mut net = Self::zeros(sizes, activation)?;
        for l in &mut net.layers {
            let limit = (6.0 / (l.n_in + l.n_out) as f64).sqrt();
            l.weights.iter_mut().for_each(|w| *w = rng.random_range(-limit..=limit));
        }
        Ok(net)
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().expect("validated sizes")
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Parameters flattened layer by layer, weights then bias.
    pub fn params(&self) -> Vec<f64> {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(&l.bias).copied()).collect()
    }

    pub fn set_params(&mut self, p: &[f64]) -> Result<(), AgentError> {
        if p.len() != self.n_params() {
            return Err(AgentError::ShapeMismatch { expected: self.n_params(), got: p.len() });
        }
        let mut k = 0;
        for l in &mut self.layers {
            for v in l.weights.iter_mut().chain(l.bias.iter_mut()) {
                *v = p[k];
                k += 1;
            }
        }
        self.cache = None;
        Ok(())
    }

    fn run(&self, x: &[f64], keep: bool) -> (Vec<f64>, Option<ForwardCache>) {
        let mut acts = Vec::new();
        let mut pre = Vec::new();
        let mut a = x.to_vec();
        let last = self.layers.len() - 1;
        for (i, l) in self.layers.iter().enumerate() {
            let z: Vec<f64> = (0..l.n_out)
                .map(|o| {
                    let row = &l.weights[o * l.n_in..(o + 1) * l.n_in];
                    row.iter().zip(&a).map(|(w, v)| w * v).sum::<f64>() + l.bias[o]
                })
                .collect();
            let out = if i == last { z.clone() } else { z.iter().map(|v| self.activation.apply(*v)).collect() };
            if keep {
                acts.push(std::mem::replace(&mut a, out));
                pre.push(z);
            } else {
                a = out;
            }
        }
        if keep {
            acts.push(a.clone());
            (a, Some(ForwardCache { acts, pre }))
        } else {
            (a, None)
        }
    }

    /// Forward pass without touching the cache.
    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>, AgentError> {
        self.check_input(x)?;
        Ok(self.run(x, false).0)
    }

    /// Forward pass that caches activations for [`Mlp::backward`].
    pub fn forward(&mut self, x: &[f64]) -> Result<Vec<f64>, AgentError> {
        self.check_input(x)?;
        let (y, cache) = self.run(x, true);
        self.cache = cache;
        Ok(y)
    }

    fn check_input(&self, x: &[f64]) -> Result<(), AgentError> {
        if x.len() != self.input_dim() {
            return Err(AgentError::ShapeMismatch { expected: self.input_dim(), got: x.len() });
        }
        Ok(())
    }

    /// Reverse-mode gradients of `output . upstream` for the cached input.
    pub fn backward(&self, upstream: &[f64]) -> Result<Gradients, AgentError> {
        let cache = self.cache.as_ref().ok_or(AgentError::NoCachedForward)?;
        if upstream.len() != self.output_dim() {
            return Err(AgentError::ShapeMismatch { expected: self.output_dim(), got: upstream.len() });
        }
        let mut grads = Gradients::zeros_like(self);
        let mut delta = upstream.to_vec();
        let last = self.layers.len() - 1;
        for i in (0..self.layers.len()).rev() {
            let l = &self.layers[i];
            if i != last {
                let (z, a) = (&cache.pre[i], &cache.acts[i + 1]);
                for o in 0..l.n_out {
                    delta[o] *= self.activation.derivative(z[o], a[o]);
                }
            }
            let input = &cache.acts[i];
            let gw = &mut grads.weights[i];
            for o in 0..l.n_out {
                let d = delta[o];
                if d != 0.0 {
                    for j in 0..l.n_in {
                        gw[o * l.n_in + j] = d * input[j];
                    }
                }
            }
            grads.bias[i].copy_from_slice(&delta);
            let mut next = vec![0.0; l.n_in];
            for o in 0..l.n_out {
                let d = delta[o];
                if d != 0.0 {
                    let row = &l.weights[o * l.n_in..(o + 1) * l.n_in];
                    next.iter_mut().zip(row).for_each(|(n, w)| *n += d * w);
                }
            }
            delta = next;
        }
        grads.input = delta;
        Ok(grads)
    }

    /// Plain gradient-descent update `theta -= lr * g`.
    pub fn sgd_step(&mut self, grads: &Gradients, lr: f64) {
        for (l, (gw, gb)) in self.layers.iter_mut().zip(grads.weights.iter().zip(&grads.bias)) {
            l.weights.iter_mut().zip(gw).for_each(|(w, g)| *w -= lr * g);
            l.bias.iter_mut().zip(gb).for_each(|(b, g)| *b -= lr * g);
        }
        self.cache = None;
    }
}
