//! Fully connected actor-critic network with hand-written backprop.
//!
//! All weights live in one flat vector. Layers are views given by offsets, so
//! the optimizer, gradient checks and checkpoints all work on `&[f64]`.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::beta::BetaParams;
use crate::error::{Error, Result};
use crate::rl_env::{Observation, Policy};

pub const OBS_DIM: usize = 3;
pub const DEFAULT_HIDDEN: usize = 32;
pub const DEFAULT_DEPTH: usize = 3;
/// Scale applied to the initial policy-head weights.
pub const POLICY_HEAD_INIT_SCALE: f64 = 0.01;

/// Whether the value head reads the policy trunk or has its own.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Architecture {
    Shared,
    Split,
}

/// Dense layer `y = W x + b` stored row-major at `w`, followed by `b`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Layer {
    pub n_in: usize,
    pub n_out: usize,
    pub offset: usize,
}

impl Layer {
    pub fn weight_len(&self) -> usize {
        self.n_in * self.n_out
    }

    pub fn len(&self) -> usize {
        self.weight_len() + self.n_out
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn bias_offset(&self) -> usize {
        self.offset + self.weight_len()
    }

    fn forward(&self, p: &[f64], x: &[f64], out: &mut Vec<f64>) {
        let w = &p[self.offset..self.bias_offset()];
        let b = &p[self.bias_offset()..self.offset + self.len()];
        out.clear();
        for j in 0..self.n_out {
            let row = &w[j * self.n_in..(j + 1) * self.n_in];
            let s: f64 = row.iter().zip(x).map(|(a, b)| a * b).sum();
            out.push(s + b[j]);
        }
    }

    /// Accumulates parameter gradients and returns `∂L/∂x`.
    fn backward(&self, p: &[f64], x: &[f64], dy: &[f64], grad: &mut [f64]) -> Vec<f64> {
        let mut dx = vec![0.0; self.n_in];
        let b0 = self.bias_offset();
        for (j, &g) in dy.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            let row = self.offset + j * self.n_in;
            for k in 0..self.n_in {
                grad[row + k] += g * x[k];
                dx[k] += p[row + k] * g;
            }
            grad[b0 + j] += g;
        }
        dx
    }
}

fn softplus(z: f64) -> f64 {
    if z > 30.0 {
        z
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn relu_in_place(v: &mut [f64]) {
    for x in v {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
}

/// Intermediate activations kept for the backward pass.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    input: [f64; OBS_DIM],
    trunk: Vec<Vec<f64>>,
    value_trunk: Vec<Vec<f64>>,
    head_logits: [f64; 2],
    pub beta: BetaParams,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PolicyNetwork {
    architecture: Architecture,
    hidden: usize,
    depth: usize,
    trunk: Vec<Layer>,
    value_trunk: Vec<Layer>,
    policy_head: Layer,
    value_head: Layer,
    params: Vec<f64>,
}

struct Plan {
    trunk: Vec<Layer>,
    value_trunk: Vec<Layer>,
    policy_head: Layer,
    value_head: Layer,
    total: usize,
}

fn plan(architecture: Architecture, hidden: usize, depth: usize) -> Plan {
    let mut offset = 0;
    let mut push = |n_in, n_out| {
        let l = Layer { n_in, n_out, offset };
        offset += l.len();
        l
    };
    let stack = |push: &mut dyn FnMut(usize, usize) -> Layer| {
        (0..depth)
            .map(|i| push(if i == 0 { OBS_DIM } else { hidden }, hidden))
            .collect::<Vec<_>>()
    };
    let trunk = stack(&mut push);
    let value_trunk = match architecture {
        Architecture::Shared => Vec::new(),
        Architecture::Split => stack(&mut push),
    };
    let feat = if depth == 0 { OBS_DIM } else { hidden };
    let policy_head = push(feat, 2);
    let value_head = push(feat, 1);
    Plan {
        trunk,
        value_trunk,
        policy_head,
        value_head,
        total: offset,
    }
}

impl PolicyNetwork {
    /// All-zero parameters.
    pub fn zeros(architecture: Architecture, hidden: usize, depth: usize) -> Result<Self> {
        if depth > 0 && hidden == 0 {
            return Err(Error::invalid("hidden width must be positive"));
        }
        let p = plan(architecture, hidden, depth);
        Ok(PolicyNetwork {
            architecture,
            hidden,
            depth,
            params: vec![0.0; p.total],
            trunk: p.trunk,
            value_trunk: p.value_trunk,
            policy_head: p.policy_head,
            value_head: p.value_head,
        })
    }

    /// Uniform fan-in initialization `U(−1/√n_in, 1/√n_in)`, biases zero.
    pub fn new(
        architecture: Architecture,
        hidden: usize,
        depth: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        let mut net = Self::zeros(architecture, hidden, depth)?;
        let layers: Vec<(Layer, f64)> = net
            .trunk
            .iter()
            .chain(&net.value_trunk)
            .map(|l| (*l, 1.0))
            .chain([
                (net.policy_head(), POLICY_HEAD_INIT_SCALE),
                (net.value_head(), 1.0),
            ])
            .collect();
        for (l, scale) in layers {
            let bound = 1.0 / (l.n_in as f64).sqrt();
            for w in &mut net.params[l.offset..l.offset + l.weight_len()] {
                *w = scale * rng.random_range(-bound..bound);
            }
        }
        Ok(net)
    }

    /// Default agent: shared trunk, 3 × 32 ReLU.
    pub fn standard(rng: &mut ChaCha8Rng) -> Self {
        Self::new(Architecture::Shared, DEFAULT_HIDDEN, DEFAULT_DEPTH, rng)
            .expect("standard sizes are valid")
    }

    /// Rebuilds layer views after deserialization.
    pub fn from_parts(
        architecture: Architecture,
        hidden: usize,
        depth: usize,
        params: Vec<f64>,
    ) -> Result<Self> {
        let mut net = Self::zeros(architecture, hidden, depth)?;
        if params.len() != net.params.len() {
            return Err(Error::invalid(format!(
                "expected {} parameters, got {}",
                net.params.len(),
                params.len()
            )));
        }
        if params.iter().any(|v| !v.is_finite()) {
            return Err(Error::numerical("non-finite network parameter"));
        }
        net.params = params;
        Ok(net)
    }

    pub fn architecture(&self) -> Architecture {
        self.architecture
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn policy_head(&self) -> Layer {
        self.policy_head
    }

    pub fn value_head(&self) -> Layer {
        self.value_head
    }

    /// Named tensors `(name, [rows, cols], offset)` in storage order.
    pub fn tensors(&self) -> Vec<(String, [usize; 2], usize)> {
        let mut out = Vec::new();
        let mut add = |name: String, l: &Layer| {
            out.push((format!("{name}.weight"), [l.n_out, l.n_in], l.offset));
            out.push((format!("{name}.bias"), [l.n_out, 1], l.bias_offset()));
        };
        for (i, l) in self.trunk.iter().enumerate() {
            add(format!("trunk.{i}"), l);
        }
        for (i, l) in self.value_trunk.iter().enumerate() {
            add(format!("value_trunk.{i}"), l);
        }
        add("policy_head".into(), &self.policy_head());
        add("value_head".into(), &self.value_head());
        out.sort_by_key(|t| t.2);
        out
    }

    fn run_stack(&self, layers: &[Layer], x: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = Vec::with_capacity(layers.len());
        let mut input = x.to_vec();
        for l in layers {
            let mut out = Vec::with_capacity(l.n_out);
            l.forward(&self.params, &input, &mut out);
            relu_in_place(&mut out);
            input = out.clone();
            acts.push(out);
        }
        acts
    }

    pub fn forward_cached(&self, obs: &Observation) -> Result<ForwardCache> {
        let input = obs.to_array();
        if input.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite observation"));
        }
        let trunk = self.run_stack(&self.trunk, &input);
        let value_trunk = self.run_stack(&self.value_trunk, &input);
        let feat: &[f64] = trunk.last().map_or(&input[..], |v| v);
        let value_feat: &[f64] = match self.architecture {
            Architecture::Shared => feat,
            Architecture::Split => value_trunk.last().map_or(&input[..], |v| v),
        };
        let mut logits = Vec::with_capacity(2);
        self.policy_head().forward(&self.params, feat, &mut logits);
        let mut v = Vec::with_capacity(1);
        self.value_head().forward(&self.params, value_feat, &mut v);
        let beta = BetaParams {
            alpha: 1.0 + softplus(logits[0]),
            beta: 1.0 + softplus(logits[1]),
        };
        if !(beta.alpha.is_finite() && beta.beta.is_finite() && v[0].is_finite()) {
            return Err(Error::numerical("non-finite network activation"));
        }
        Ok(ForwardCache {
            input,
            trunk,
            value_trunk,
            head_logits: [logits[0], logits[1]],
            beta,
            value: v[0],
        })
    }

    /// Beta shape parameters (both ≥ 1) and the state value.
    pub fn forward(&self, obs: &Observation) -> Result<(BetaParams, f64)> {
        let c = self.forward_cached(obs)?;
        Ok((c.beta, c.value))
    }

    fn backprop_stack(&self, layers: &[Layer], acts: &[Vec<f64>], input: &[f64], mut d: Vec<f64>, grad: &mut [f64]) {
        for (k, l) in layers.iter().enumerate().rev() {
            for (g, a) in d.iter_mut().zip(&acts[k]) {
                if *a <= 0.0 {
                    *g = 0.0;
                }
            }
            let x: &[f64] = if k == 0 { input } else { &acts[k - 1] };
            d = l.backward(&self.params, x, &d, grad);
        }
    }

    /// Accumulates into `grad` the parameter gradient of a loss whose
    /// partials with respect to `(α, β, V)` are given.
    pub fn backward(&self, cache: &ForwardCache, d_alpha: f64, d_beta: f64, d_value: f64, grad: &mut [f64]) {
        let input = &cache.input[..];
        let feat: &[f64] = cache.trunk.last().map_or(input, |v| v);
        let dz = [
            d_alpha * sigmoid(cache.head_logits[0]),
            d_beta * sigmoid(cache.head_logits[1]),
        ];
        let d_feat = self.policy_head().backward(&self.params, feat, &dz, grad);
        match self.architecture {
            Architecture::Shared => {
                let d_v = self.value_head().backward(&self.params, feat, &[d_value], grad);
                let d: Vec<f64> = d_feat.iter().zip(&d_v).map(|(a, b)| a + b).collect();
                self.backprop_stack(&self.trunk, &cache.trunk, input, d, grad);
            }
            Architecture::Split => {
                let vfeat: &[f64] = cache.value_trunk.last().map_or(input, |v| v);
                let d_v = self.value_head().backward(&self.params, vfeat, &[d_value], grad);
                self.backprop_stack(&self.trunk, &cache.trunk, input, d_feat, grad);
                self.backprop_stack(&self.value_trunk, &cache.value_trunk, input, d_v, grad);
            }
        }
    }
}

impl Policy for PolicyNetwork {
    fn act(&self, obs: &Observation, deterministic: bool, rng: &mut ChaCha8Rng) -> Result<(f64, f64)> {
        let (beta, _) = self.forward(obs)?;
        let a = if deterministic { beta.mean() } else { beta.sample(rng)? };
        Ok((a, beta.log_prob(a)))
    }
}
