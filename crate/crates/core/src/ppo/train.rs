//! Two-phase training curriculum: ramp pretraining, then fine-tuning on the
//! terminal success bonus under random systematic errors.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ppo_update, Adam, PolicyNetwork, PpoHyperparams, StepRecord, TrajectoryBatch};
use crate::dynamics::{evolve_unitary, flip_probability, ErrorModel, QubitState};
use crate::error::{Error, Result};
use crate::rl_env::{nominal_sequence, EnvConfig, Phase, QubitEnv};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Schedule {
    pub pretrain_episodes: usize,
    pub finetune_episodes: usize,
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule {
            pretrain_episodes: 20_000,
            finetune_episodes: 600_000,
        }
    }
}

/// One row of the training curve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub batch_index: usize,
    pub phase: Phase,
    pub episodes: usize,
    pub mean_return: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    /// Evaluation score when one was taken after this batch.
    pub eval_score: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Best fine-tune checkpoint, or the final policy when no evaluation
    /// qualified.
    pub policy: PolicyNetwork,
    pub final_policy: PolicyNetwork,
    /// Snapshot at the pretrain/fine-tune boundary.
    pub pretrained: PolicyNetwork,
    pub best_score: Option<f64>,
    pub curve: Vec<CurvePoint>,
}

/// Evaluate every this many fine-tune batches.
const EVAL_INTERVAL: usize = 5;

/// Rolls out `n` episodes with per-episode seeds. Episodes run in parallel;
/// the result order follows `seeds`.
pub fn collect_batch(net: &PolicyNetwork, config: &EnvConfig, seeds: &[u64]) -> Result<TrajectoryBatch> {
    let episodes = seeds
        .par_iter()
        .map(|&seed| {
            let mut env = QubitEnv::new(config.clone())?;
            let mut obs = env.reset(seed);
            let mut steps = Vec::with_capacity(config.n_steps);
            loop {
                let (b, value) = net.forward(&obs)?;
                let action = b.sample(env.rng_mut())?;
                let tr = env.step(action)?;
                steps.push(StepRecord {
                    observation: obs,
                    action,
                    log_prob: b.log_prob(action),
                    reward: tr.reward,
                    value,
                    done: tr.done,
                });
                obs = tr.observation;
                if tr.done {
                    return Ok(steps);
                }
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TrajectoryBatch { episodes })
}

/// Open-loop robustness of the deterministic policy: mean flip probability of
/// its nominal program over a 3×3 error grid at half the training ranges.
/// Returns `None` unless the error-free flip clears the success threshold.
pub fn evaluation_score(net: &PolicyNetwork, config: &EnvConfig) -> Result<Option<f64>> {
    let seq = nominal_sequence(net, config)?;
    let ground = QubitState::ground();
    let p0 = flip_probability(&evolve_unitary(&ground, &seq, &ErrorModel::none())?);
    if 2.0 * p0 - 1.0 <= config.success_threshold {
        return Ok(None);
    }
    let (hw_o, hw_d) = (
        0.5 * config.rabi_error_half_width,
        0.5 * config.detuning_error_half_width,
    );
    let mut total = 0.0;
    for i in [-1.0, 0.0, 1.0] {
        for j in [-1.0, 0.0, 1.0] {
            let err = ErrorModel::systematic(i * hw_o, j * hw_d);
            total += flip_probability(&evolve_unitary(&ground, &seq, &err)?);
        }
    }
    Ok(Some(total / 9.0))
}

pub fn train(
    env_config: &EnvConfig,
    hp: &PpoHyperparams,
    schedule: Schedule,
    seed: u64,
) -> Result<TrainOutcome> {
    train_with(env_config, hp, schedule, seed, |_| {})
}

/// [`train`] with a callback invoked after every batch.
pub fn train_with<F: FnMut(&CurvePoint)>(
    env_config: &EnvConfig,
    hp: &PpoHyperparams,
    schedule: Schedule,
    seed: u64,
    mut on_batch: F,
) -> Result<TrainOutcome> {
    env_config.validate()?;
    hp.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = PolicyNetwork::new(hp.architecture, hp.hidden, hp.depth, &mut rng)?;
    let mut opt = Adam::new(net.num_params(), hp.learning_rate);
    let mut curve = Vec::new();
    let mut pretrained = net.clone();
    let mut best: Option<(f64, PolicyNetwork)> = None;
    let mut episodes_done = 0;

    for (phase, budget) in [
        (Phase::Pretrain, schedule.pretrain_episodes),
        (Phase::Finetune, schedule.finetune_episodes),
    ] {
        let config = env_config.with_phase(phase);
        let mut phase_batches = 0;
        let mut remaining = budget;
        while remaining > 0 {
            let n = remaining.min(hp.batch_episodes);
            let seeds: Vec<u64> = (0..n).map(|_| rng.random()).collect();
            let with_context = |e: Error| match e {
                Error::Numerical(m) => Error::Numerical(format!("episode {episodes_done}: {m}")),
                other => other,
            };
            let batch = collect_batch(&net, &config, &seeds).map_err(with_context)?;
            let rep = ppo_update(&mut net, &mut opt, &batch, hp).map_err(with_context)?;
            episodes_done += n;
            remaining -= n;
            phase_batches += 1;

            let eval_score = if phase == Phase::Finetune
                && (phase_batches % EVAL_INTERVAL == 0 || remaining == 0)
            {
                let score = evaluation_score(&net, &config)?;
                if let Some(s) = score {
                    if best.as_ref().is_none_or(|(b, _)| s > *b) {
                        best = Some((s, net.clone()));
                    }
                }
                score
            } else {
                None
            };
            let point = CurvePoint {
                batch_index: curve.len(),
                phase,
                episodes: episodes_done,
                mean_return: batch.mean_return(),
                policy_loss: rep.policy_loss,
                value_loss: rep.value_loss,
                entropy: rep.entropy,
                eval_score,
            };
            on_batch(&point);
            curve.push(point);
        }
        if phase == Phase::Pretrain {
            pretrained = net.clone();
        }
    }

    let (best_score, policy) = match best {
        Some((s, p)) => (Some(s), p),
        None => (None, net.clone()),
    };
    Ok(TrainOutcome {
        policy,
        final_policy: net,
        pretrained,
        best_score,
        curve,
    })
}

/// Mean absolute deviation of the deterministic policy from the linear ramp.
pub fn ramp_deviation(net: &PolicyNetwork, config: &EnvConfig) -> Result<f64> {
    let clean = config.with_phase(Phase::Pretrain);
    let r = crate::rl_env::rollout(net, &clean, true, 0)?;
    let n = clean.n_steps;
    let dev: f64 = r
        .actions()
        .iter()
        .enumerate()
        .map(|(i, a)| (a - crate::rl_env::ramp_target(i + 1, n)).abs())
        .sum();
    Ok(dev / n as f64)
}
