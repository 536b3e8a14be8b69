//! One-hidden-layer flow networks.
//!
//! A network maps an encoded state to one log-flow per action:
//! `log_flows = W2 · leaky_relu(W1 · x + b1) + b2`. Exponentiating gives the
//! strictly positive edge flows that drive sampling. Matrices are stored
//! row-major (`W1` is hidden × input, `W2` is output × hidden).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const LEAKY_SLOPE: f64 = 0.01;
pub const DEFAULT_HIDDEN: usize = 16;
pub const DEFAULT_LEARNING_RATE: f64 = 1e-3;

fn leaky_relu(z: f64) -> f64 {
    if z >= 0.0 {
        z
    } else {
        LEAKY_SLOPE * z
    }
}

// subgradient at exactly zero takes the positive branch
fn leaky_relu_grad(z: f64) -> f64 {
    if z >= 0.0 {
        1.0
    } else {
        LEAKY_SLOPE
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowNetwork {
    input_dim: usize,
    hidden_dim: usize,
    output_dim: usize,
    w1: Vec<f64>,
    b1: Vec<f64>,
    w2: Vec<f64>,
    b2: Vec<f64>,
    /// Bumped by every optimizer step; forward caches remember it.
    #[serde(default)]
    generation: u64,
}

/// Intermediates of one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    input: Vec<f64>,
    pre: Vec<f64>,
    hidden: Vec<f64>,
    generation: u64,
}

/// Parameter-shaped buffer used for gradients and Adam moments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Gradients {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl Gradients {
    pub fn zeros_like(net: &FlowNetwork) -> Self {
        Gradients {
            w1: vec![0.0; net.w1.len()],
            b1: vec![0.0; net.b1.len()],
            w2: vec![0.0; net.w2.len()],
            b2: vec![0.0; net.b2.len()],
        }
    }

    fn parts(&self) -> [(&'static str, &[f64]); 4] {
        [("w1", &self.w1), ("b1", &self.b1), ("w2", &self.w2), ("b2", &self.b2)]
    }

    fn parts_mut(&mut self) -> [&mut Vec<f64>; 4] {
        [&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2]
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (dst, src) in self.parts_mut().into_iter().zip(other.parts()) {
            dst.iter_mut().zip(src.1).for_each(|(d, s)| *d += s);
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for part in self.parts_mut() {
            part.iter_mut().for_each(|v| *v *= factor);
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.parts()
            .iter()
            .flat_map(|(_, p)| p.iter())
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Flattened view in `w1, b1, w2, b2` order.
    pub fn flatten(&self) -> Vec<f64> {
        self.parts().iter().flat_map(|(_, p)| p.iter().copied()).collect()
    }

    fn first_non_finite(&self) -> Option<&'static str> {
        self.parts()
            .into_iter()
            .find(|(_, p)| p.iter().any(|v| !v.is_finite()))
            .map(|(name, _)| name)
    }

    fn same_shape(&self, other: &Gradients) -> bool {
        self.parts()
            .iter()
            .zip(other.parts())
            .all(|(a, b)| a.1.len() == b.1.len())
    }
}

impl FlowNetwork {
    /// Weights uniform in `±1/sqrt(fan_in)`, biases zero.
    pub fn init(input_dim: usize, hidden_dim: usize, output_dim: usize, seed: u64) -> Self {
        assert!(
            input_dim > 0 && hidden_dim > 0 && output_dim > 0,
            "network dimensions must be positive"
        );
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bound1 = 1.0 / (input_dim as f64).sqrt();
        let bound2 = 1.0 / (hidden_dim as f64).sqrt();
        let w1 = (0..hidden_dim * input_dim)
            .map(|_| rng.gen_range(-bound1..=bound1))
            .collect();
        let w2 = (0..output_dim * hidden_dim)
            .map(|_| rng.gen_range(-bound2..=bound2))
            .collect();
        FlowNetwork {
            input_dim,
            hidden_dim,
            output_dim,
            w1,
            b1: vec![0.0; hidden_dim],
            w2,
            b2: vec![0.0; output_dim],
            generation: 0,
        }
    }

    /// A network with every parameter zero; its flows are all 1.
    pub fn zeros(input_dim: usize, hidden_dim: usize, output_dim: usize) -> Self {
        FlowNetwork {
            input_dim,
            hidden_dim,
            output_dim,
            w1: vec![0.0; hidden_dim * input_dim],
            b1: vec![0.0; hidden_dim],
            w2: vec![0.0; output_dim * hidden_dim],
            b2: vec![0.0; output_dim],
            generation: 0,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn param_count(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    /// Parameters in the same layout as [`Gradients`].
    pub fn params(&self) -> Gradients {
        Gradients {
            w1: self.w1.clone(),
            b1: self.b1.clone(),
            w2: self.w2.clone(),
            b2: self.b2.clone(),
        }
    }

    /// Replaces all parameters. Shapes must match.
    pub fn set_params(&mut self, params: Gradients) -> Result<()> {
        if !params.same_shape(&Gradients::zeros_like(self)) {
            return Err(Error::DimensionMismatch {
                expected: self.param_count(),
                actual: params.flatten().len(),
            });
        }
        self.w1 = params.w1;
        self.b1 = params.b1;
        self.w2 = params.w2;
        self.b2 = params.b2;
        self.generation += 1;
        Ok(())
    }

    /// Checks internal shape consistency and finiteness (used after deserializing).
    pub fn check(&self) -> std::result::Result<(), String> {
        let expect = [
            ("w1", self.w1.len(), self.hidden_dim * self.input_dim),
            ("b1", self.b1.len(), self.hidden_dim),
            ("w2", self.w2.len(), self.output_dim * self.hidden_dim),
            ("b2", self.b2.len(), self.output_dim),
        ];
        if self.input_dim == 0 || self.hidden_dim == 0 || self.output_dim == 0 {
            return Err("zero dimension".into());
        }
        for (name, got, want) in expect {
            if got != want {
                return Err(format!("{name} has {got} entries, expected {want}"));
            }
        }
        if let Some(name) = self.params().first_non_finite() {
            return Err(format!("{name} holds non-finite values"));
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<(Vec<f64>, ForwardCache)> {
        if x.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                actual: x.len(),
            });
        }
        let pre: Vec<f64> = self
            .w1
            .chunks_exact(self.input_dim)
            .zip(&self.b1)
            .map(|(row, b)| row.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>() + b)
            .collect();
        let hidden: Vec<f64> = pre.iter().copied().map(leaky_relu).collect();
        let out = self
            .w2
            .chunks_exact(self.hidden_dim)
            .zip(&self.b2)
            .map(|(row, b)| row.iter().zip(&hidden).map(|(w, h)| w * h).sum::<f64>() + b)
            .collect();
        Ok((
            out,
            ForwardCache {
                input: x.to_vec(),
                pre,
                hidden,
                generation: self.generation,
            },
        ))
    }

    /// Gradients of `<grad_out, log_flows>` with respect to every parameter and the input.
    pub fn backward(&self, cache: &ForwardCache, grad_out: &[f64]) -> Result<(Gradients, Vec<f64>)> {
        if cache.generation != self.generation {
            return Err(Error::StaleCache(format!(
                "cache from generation {}, network at {}",
                cache.generation, self.generation
            )));
        }
        if cache.input.len() != self.input_dim || cache.hidden.len() != self.hidden_dim {
            return Err(Error::StaleCache("cache dimensions differ".into()));
        }
        if grad_out.len() != self.output_dim {
            return Err(Error::DimensionMismatch {
                expected: self.output_dim,
                actual: grad_out.len(),
            });
        }
        let mut grads = Gradients::zeros_like(self);
        let mut grad_hidden = vec![0.0; self.hidden_dim];
        for (o, &g) in grad_out.iter().enumerate() {
            grads.b2[o] = g;
            let row = o * self.hidden_dim;
            for h in 0..self.hidden_dim {
                grads.w2[row + h] = g * cache.hidden[h];
                grad_hidden[h] += g * self.w2[row + h];
            }
        }
        let mut grad_input = vec![0.0; self.input_dim];
        for h in 0..self.hidden_dim {
            let gz = grad_hidden[h] * leaky_relu_grad(cache.pre[h]);
            grads.b1[h] = gz;
            let row = h * self.input_dim;
            for i in 0..self.input_dim {
                grads.w1[row + i] = gz * cache.input[i];
                grad_input[i] += gz * self.w1[row + i];
            }
        }
        Ok((grads, grad_input))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamState {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub t: u64,
    pub m: Gradients,
    pub v: Gradients,
}

impl AdamState {
    pub fn new(net: &FlowNetwork, learning_rate: f64) -> Self {
        AdamState {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            t: 0,
            m: Gradients::zeros_like(net),
            v: Gradients::zeros_like(net),
        }
    }

    pub fn matches(&self, net: &FlowNetwork) -> bool {
        let shape = Gradients::zeros_like(net);
        self.m.same_shape(&shape) && self.v.same_shape(&shape)
    }

    /// One bias-corrected Adam update. Nothing is modified if `grads` holds a
    /// non-finite value.
    pub fn step(&mut self, net: &mut FlowNetwork, grads: &Gradients) -> Result<()> {
        let shape = Gradients::zeros_like(net);
        if !grads.same_shape(&shape) || !self.matches(net) {
            return Err(Error::DimensionMismatch {
                expected: net.param_count(),
                actual: grads.flatten().len(),
            });
        }
        if let Some(name) = grads.first_non_finite() {
            return Err(Error::NonFiniteGradient(name));
        }
        self.t += 1;
        let (b1, b2) = (self.beta1, self.beta2);
        let corr1 = 1.0 - b1.powi(self.t as i32);
        let corr2 = 1.0 - b2.powi(self.t as i32);
        let params = [&mut net.w1, &mut net.b1, &mut net.w2, &mut net.b2];
        let ms = self.m.parts_mut();
        let vs = self.v.parts_mut();
        for (((p, g), m), v) in params.into_iter().zip(grads.parts()).zip(ms).zip(vs) {
            for i in 0..p.len() {
                let gi = g.1[i];
                m[i] = b1 * m[i] + (1.0 - b1) * gi;
                v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
                let m_hat = m[i] / corr1;
                let v_hat = v[i] / corr2;
                p[i] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
            }
        }
        net.generation += 1;
        Ok(())
    }
}
