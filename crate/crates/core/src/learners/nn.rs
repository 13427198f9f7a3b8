//! Fully connected networks with exact reverse-mode gradients.
//!
//! Parameters live in one flat vector (per layer: row-major weights of
//! shape `out x in`, then biases) so optimizers, snapshots and checkpoints
//! treat a network as a single slice.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Activation {
    Identity,
    Elu,
    Tanh,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Elu => {
                if x > 0.0 {
                    x
                } else {
                    x.exp_m1()
                }
            }
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative given the pre-activation `x` and output `y`.
    fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Elu => {
                if x > 0.0 {
                    1.0
                } else {
                    y + 1.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            Activation::Identity => 0,
            Activation::Elu => 1,
            Activation::Tanh => 2,
        }
    }

    pub(crate) fn from_code(c: u8) -> Option<Self> {
        match c {
            0 => Some(Activation::Identity),
            1 => Some(Activation::Elu),
            2 => Some(Activation::Tanh),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    sizes: Vec<usize>,
    activations: Vec<Activation>,
    params: Vec<f64>,
}

/// Intermediate values of one forward pass, needed by `backward`.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Input to each layer; the last entry is the network output.
    values: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        self.values.last().expect("non-empty network")
    }
}

fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

impl Mlp {
    /// Hidden layers use `hidden_act`, the output layer is linear.
    pub fn with_hidden(
        input: usize,
        hidden: &[usize],
        output: usize,
        hidden_act: Activation,
        rng: &mut impl Rng,
    ) -> Self {
        let mut sizes = vec![input];
        sizes.extend_from_slice(hidden);
        sizes.push(output);
        let mut acts = vec![hidden_act; hidden.len()];
        acts.push(Activation::Identity);
        Self::random(sizes, acts, rng).expect("consistent shapes")
    }

    /// Uniform `±1/sqrt(fan_in)` initialization for weights and biases.
    pub fn random(sizes: Vec<usize>, activations: Vec<Activation>, rng: &mut impl Rng) -> Result<Self> {
        let mut net = Self::zeros(sizes, activations)?;
        let mut offset = 0;
        for w in net.sizes.clone().windows(2) {
            let bound = 1.0 / (w[0].max(1) as f64).sqrt();
            for p in &mut net.params[offset..offset + w[0] * w[1] + w[1]] {
                *p = rng.random_range(-bound..bound);
            }
            offset += w[0] * w[1] + w[1];
        }
        Ok(net)
    }

    pub fn zeros(sizes: Vec<usize>, activations: Vec<Activation>) -> Result<Self> {
        let n = param_count(&sizes);
        Self::from_params(sizes, activations, vec![0.0; n])
    }

    pub fn from_params(sizes: Vec<usize>, activations: Vec<Activation>, params: Vec<f64>) -> Result<Self> {
        if sizes.len() < 2 || activations.len() + 1 != sizes.len() {
            return Err(Error::DimensionMismatch {
                expected: sizes.len().saturating_sub(1),
                actual: activations.len(),
            });
        }
        let n = param_count(&sizes);
        if params.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: params.len(),
            });
        }
        Ok(Self {
            sizes,
            activations,
            params,
        })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn activations(&self) -> &[Activation] {
        &self.activations
    }

    pub fn input_len(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_len(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn copy_from(&mut self, other: &Mlp) {
        debug_assert_eq!(self.sizes, other.sizes);
        self.params.copy_from_slice(&other.params);
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.sizes[0] {
            return Err(Error::DimensionMismatch {
                expected: self.sizes[0],
                actual: x.len(),
            });
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut cur = x.to_vec();
        let mut offset = 0;
        for (l, w) in self.sizes.windows(2).enumerate() {
            let (n_in, n_out) = (w[0], w[1]);
            let weights = &self.params[offset..offset + n_in * n_out];
            let bias = &self.params[offset + n_in * n_out..offset + n_in * n_out + n_out];
            let act = self.activations[l];
            cur = (0..n_out)
                .map(|o| {
                    let row = &weights[o * n_in..(o + 1) * n_in];
                    let z = bias[o] + row.iter().zip(&cur).map(|(a, b)| a * b).sum::<f64>();
                    act.apply(z)
                })
                .collect();
            offset += n_in * n_out + n_out;
        }
        Ok(cur)
    }

    pub fn forward_cached(&self, x: &[f64]) -> Result<ForwardCache> {
        self.check_input(x)?;
        let mut values = vec![x.to_vec()];
        let mut pre = Vec::with_capacity(self.activations.len());
        let mut offset = 0;
        for (l, w) in self.sizes.windows(2).enumerate() {
            let (n_in, n_out) = (w[0], w[1]);
            let weights = &self.params[offset..offset + n_in * n_out];
            let bias = &self.params[offset + n_in * n_out..offset + n_in * n_out + n_out];
            let input = values.last().unwrap();
            let z: Vec<f64> = (0..n_out)
                .map(|o| {
                    let row = &weights[o * n_in..(o + 1) * n_in];
                    bias[o] + row.iter().zip(input).map(|(a, b)| a * b).sum::<f64>()
                })
                .collect();
            let y = z.iter().map(|&v| self.activations[l].apply(v)).collect();
            pre.push(z);
            values.push(y);
            offset += n_in * n_out + n_out;
        }
        Ok(ForwardCache { values, pre })
    }

    /// Accumulates `d(upstream . output)/d(params)` into `grad` and returns
    /// the gradient with respect to the input.
    pub fn backward(&self, cache: &ForwardCache, upstream: &[f64], grad: &mut [f64]) -> Result<Vec<f64>> {
        if upstream.len() != self.output_len() {
            return Err(Error::DimensionMismatch {
                expected: self.output_len(),
                actual: upstream.len(),
            });
        }
        if grad.len() != self.params.len() {
            return Err(Error::DimensionMismatch {
                expected: self.params.len(),
                actual: grad.len(),
            });
        }
        let mut offsets = Vec::with_capacity(self.activations.len());
        let mut offset = 0;
        for w in self.sizes.windows(2) {
            offsets.push(offset);
            offset += w[0] * w[1] + w[1];
        }
        let mut delta = upstream.to_vec();
        for l in (0..self.activations.len()).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let act = self.activations[l];
            for ((d, &pre), &out) in delta.iter_mut().zip(&cache.pre[l]).zip(&cache.values[l + 1]) {
                *d *= act.derivative(pre, out);
            }
            let off = offsets[l];
            let input = &cache.values[l];
            for o in 0..n_out {
                let d = delta[o];
                if d != 0.0 {
                    let g = &mut grad[off + o * n_in..off + (o + 1) * n_in];
                    for (gi, xi) in g.iter_mut().zip(input) {
                        *gi += d * xi;
                    }
                }
                grad[off + n_in * n_out + o] += d;
            }
            let weights = &self.params[off..off + n_in * n_out];
            let mut next = vec![0.0; n_in];
            for o in 0..n_out {
                let d = delta[o];
                if d != 0.0 {
                    for (ni, wi) in next.iter_mut().zip(&weights[o * n_in..(o + 1) * n_in]) {
                        *ni += d * wi;
                    }
                }
            }
            delta = next;
        }
        Ok(delta)
    }
}

/// Numerically stable log-softmax.
pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
    logits.iter().map(|z| z - lse).collect()
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    log_softmax(logits).into_iter().map(f64::exp).collect()
}

/// Shannon entropy (nats) of the distribution given by `logits`.
pub fn entropy(logits: &[f64]) -> f64 {
    log_softmax(logits)
        .iter()
        .map(|lp| if lp.is_finite() { -lp.exp() * lp } else { 0.0 })
        .sum()
}

pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}
