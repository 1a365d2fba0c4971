//! Proximal policy optimization for the pulse-design environment.
//!
//! A small actor-critic network with a Beta policy head is trained with the
//! clipped surrogate objective. Advantages come from GAE and are normalized
//! per batch. Gradients are hand-derived and checked against finite
//! differences in the tests.

mod adam;
mod beta;
mod checkpoint;
mod network;
mod train;

pub use adam::Adam;
pub use beta::{trigamma, BetaParams, ACTION_EPS};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use network::{
    Architecture, ForwardCache, Layer, PolicyNetwork, DEFAULT_DEPTH, DEFAULT_HIDDEN, OBS_DIM,
    POLICY_HEAD_INIT_SCALE,
};
pub use train::{
    collect_batch, evaluation_score, ramp_deviation, train, train_with, CurvePoint, Schedule,
    TrainOutcome,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rl_env::Observation;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PpoHyperparams {
    pub learning_rate: f64,
    pub clip_epsilon: f64,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub update_epochs: usize,
    pub value_coef: f64,
    pub entropy_coef: f64,
    /// Complete episodes per update.
    pub batch_episodes: usize,
    pub architecture: Architecture,
    pub hidden: usize,
    pub depth: usize,
}

impl Default for PpoHyperparams {
    fn default() -> Self {
        PpoHyperparams {
            learning_rate: 1e-4,
            clip_epsilon: 0.2,
            gamma: 0.99,
            gae_lambda: 0.95,
            update_epochs: 4,
            value_coef: 0.5,
            entropy_coef: 0.01,
            batch_episodes: 16,
            architecture: Architecture::Shared,
            hidden: DEFAULT_HIDDEN,
            depth: DEFAULT_DEPTH,
        }
    }
}

impl PpoHyperparams {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::invalid("learning_rate must be positive"));
        }
        if !(self.clip_epsilon > 0.0 && self.clip_epsilon < 1.0) {
            return Err(Error::invalid("clip_epsilon must lie in (0, 1)"));
        }
        for (name, v) in [("gamma", self.gamma), ("gae_lambda", self.gae_lambda)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::invalid(format!("{name} must lie in (0, 1]")));
            }
        }
        if self.update_epochs == 0 || self.batch_episodes == 0 {
            return Err(Error::invalid("update_epochs and batch_episodes must be positive"));
        }
        if !(self.value_coef >= 0.0 && self.entropy_coef.is_finite()) {
            return Err(Error::invalid("loss coefficients must be finite, value_coef ≥ 0"));
        }
        Ok(())
    }
}

/// One decision recorded under the behavior policy.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepRecord {
    pub observation: Observation,
    pub action: f64,
    pub log_prob: f64,
    pub reward: f64,
    pub value: f64,
    pub done: bool,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrajectoryBatch {
    pub episodes: Vec<Vec<StepRecord>>,
}

impl TrajectoryBatch {
    pub fn len(&self) -> usize {
        self.episodes.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn steps(&self) -> impl Iterator<Item = &StepRecord> {
        self.episodes.iter().flatten()
    }

    pub fn mean_return(&self) -> f64 {
        if self.episodes.is_empty() {
            return 0.0;
        }
        let total: f64 = self.steps().map(|s| s.reward).sum();
        total / self.episodes.len() as f64
    }
}

/// Advantage estimates flattened in episode order.
#[derive(Clone, Debug, PartialEq)]
pub struct Gae {
    pub raw_advantages: Vec<f64>,
    /// Zero-mean, unit-variance advantages (centered only when the variance
    /// is below 1e-8).
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

pub fn compute_gae(batch: &TrajectoryBatch, gamma: f64, lambda: f64) -> Result<Gae> {
    let mut raw = Vec::with_capacity(batch.len());
    let mut returns = Vec::with_capacity(batch.len());
    for ep in &batch.episodes {
        match ep.last() {
            Some(last) if last.done => {}
            _ => return Err(Error::invalid("batch contains an incomplete episode")),
        }
        let mut adv = vec![0.0; ep.len()];
        let mut next_adv = 0.0;
        let mut next_value = 0.0;
        for t in (0..ep.len()).rev() {
            let s = &ep[t];
            let nonterminal = if s.done { 0.0 } else { 1.0 };
            let delta = s.reward + gamma * next_value * nonterminal - s.value;
            next_adv = delta + gamma * lambda * nonterminal * next_adv;
            adv[t] = next_adv;
            next_value = s.value;
        }
        for (a, s) in adv.iter().zip(ep) {
            returns.push(a + s.value);
        }
        raw.extend(adv);
    }
    let n = raw.len().max(1) as f64;
    let mean = raw.iter().sum::<f64>() / n;
    let var = raw.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
    let scale = if var < 1e-8 { 1.0 } else { 1.0 / var.sqrt() };
    let advantages = raw.iter().map(|a| (a - mean) * scale).collect();
    Ok(Gae {
        raw_advantages: raw,
        advantages,
        returns,
    })
}

/// Flattened training sample.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sample {
    pub observation: Observation,
    pub action: f64,
    pub old_log_prob: f64,
    pub advantage: f64,
    pub ret: f64,
}

pub fn samples(batch: &TrajectoryBatch, gae: &Gae) -> Vec<Sample> {
    batch
        .steps()
        .zip(gae.advantages.iter().zip(&gae.returns))
        .map(|(s, (&advantage, &ret))| Sample {
            observation: s.observation,
            action: s.action,
            old_log_prob: s.log_prob,
            advantage,
            ret,
        })
        .collect()
}

/// Loss terms averaged over a set of samples.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    /// Negated clipped surrogate.
    pub policy_loss: f64,
    /// Negated unclipped surrogate, for on-policy comparisons.
    pub unclipped_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub total: f64,
    pub clip_fraction: f64,
    pub mean_ratio: f64,
}

/// Total loss `−L_clip + c_v·MSE − c_e·H` and its gradient, added into `grad`.
pub fn loss_and_grad(
    net: &PolicyNetwork,
    samples: &[Sample],
    hp: &PpoHyperparams,
    grad: &mut [f64],
) -> Result<LossReport> {
    if samples.is_empty() {
        return Err(Error::invalid("empty sample set"));
    }
    let m = samples.len() as f64;
    let (lo, hi) = (1.0 - hp.clip_epsilon, 1.0 + hp.clip_epsilon);
    let mut rep = LossReport::default();
    for s in samples {
        let cache = net.forward_cached(&s.observation)?;
        let b = cache.beta;
        let log_prob = b.log_prob(s.action);
        let ratio = (log_prob - s.old_log_prob).exp();
        if !ratio.is_finite() {
            return Err(Error::numerical("non-finite probability ratio"));
        }
        let unclipped = ratio * s.advantage;
        let clipped = ratio.clamp(lo, hi) * s.advantage;
        let (surrogate, d_ratio) = if unclipped <= clipped {
            (unclipped, s.advantage)
        } else {
            (clipped, 0.0)
        };
        if ratio < lo || ratio > hi {
            rep.clip_fraction += 1.0;
        }
        let entropy = b.entropy();
        let v_err = cache.value - s.ret;
        rep.policy_loss -= surrogate;
        rep.unclipped_loss -= unclipped;
        rep.value_loss += v_err * v_err;
        rep.entropy += entropy;
        rep.mean_ratio += ratio;

        let d_logp = -d_ratio * ratio / m;
        let (la, lb) = b.grad_log_prob(s.action);
        let (ea, eb) = b.grad_entropy();
        let c_e = hp.entropy_coef / m;
        let d_alpha = d_logp * la - c_e * ea;
        let d_beta = d_logp * lb - c_e * eb;
        let d_value = 2.0 * hp.value_coef * v_err / m;
        net.backward(&cache, d_alpha, d_beta, d_value, grad);
    }
    rep.policy_loss /= m;
    rep.unclipped_loss /= m;
    rep.value_loss /= m;
    rep.entropy /= m;
    rep.clip_fraction /= m;
    rep.mean_ratio /= m;
    rep.total = rep.policy_loss + hp.value_coef * rep.value_loss - hp.entropy_coef * rep.entropy;
    if !rep.total.is_finite() {
        return Err(Error::numerical("non-finite loss"));
    }
    Ok(rep)
}

/// `update_epochs` full-batch Adam steps on the PPO loss. Returns the report
/// of the first epoch, which is evaluated on-policy.
pub fn ppo_update(
    net: &mut PolicyNetwork,
    opt: &mut Adam,
    batch: &TrajectoryBatch,
    hp: &PpoHyperparams,
) -> Result<LossReport> {
    let gae = compute_gae(batch, hp.gamma, hp.gae_lambda)?;
    let data = samples(batch, &gae);
    let mut first = None;
    let mut grad = vec![0.0; net.num_params()];
    for _ in 0..hp.update_epochs {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let rep = loss_and_grad(net, &data, hp, &mut grad)?;
        first.get_or_insert(rep);
        opt.step(net.params_mut(), &grad)?;
    }
    Ok(first.expect("update_epochs ≥ 1"))
}
