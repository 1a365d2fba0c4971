//! Episodic environment for digital detuning control.
//!
//! An episode drives the qubit from `|0⟩` through `n_steps` equal intervals.
//! The agent observes `(⟨σz⟩, previous action, i/N)` and emits an action in
//! `[0, 1]` that encodes the detuning `Δ = (2ã − 1) Δ_max`.
//!
//! Two reward curricula are supported. `Pretrain` pays
//! `−|ã_i − (i−1)/(N−1)|` at every step, which is maximized by a linear
//! detuning ramp. `Finetune` pays a constant bonus at the final step when
//! `⟨σz⟩` exceeds the success threshold, and samples an episode-fixed pair of
//! systematic errors at reset.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    self, expectation_z, ErrorModel, PulseSequence, PulseStep, QubitState, DEFAULT_SUBSTEPS,
};
use crate::error::{Error, Result};

/// Reference Rabi frequency, (2π)·3.3 kHz.
pub const DEFAULT_OMEGA: f64 = 2.0 * PI * 3300.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Pretrain,
    Finetune,
}

/// What the agent sees before each decision.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Observation {
    pub sz: f64,
    pub prev_action: f64,
    pub time_frac: f64,
}

impl Observation {
    pub fn initial() -> Self {
        Observation {
            sz: -1.0,
            prev_action: 0.5,
            time_frac: 0.0,
        }
    }

    pub fn to_array(&self) -> [f64; 3] {
        [self.sz, self.prev_action, self.time_frac]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvConfig {
    pub n_steps: usize,
    /// Nominal Rabi frequency (rad/s).
    pub omega: f64,
    /// Episode duration (s).
    pub total_time: f64,
    /// Detuning range half-width (rad/s).
    pub delta_max: f64,
    pub phase: Phase,
    /// Half-width of the uniform δ_Ω draw in the fine-tune phase.
    pub rabi_error_half_width: f64,
    /// Half-width of the uniform δ_Δ draw (units of Ω) in the fine-tune phase.
    pub detuning_error_half_width: f64,
    /// Optional dephasing time (s); switches stepping to the master equation.
    pub t2: Option<f64>,
    pub success_threshold: f64,
    pub terminal_bonus: f64,
    pub substeps: usize,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig::hybrid(DEFAULT_OMEGA)
    }
}

impl EnvConfig {
    /// Hybrid-error model: 300 µs at the reference Rabi frequency, Δ_max = 2Ω.
    pub fn hybrid(omega: f64) -> Self {
        EnvConfig {
            n_steps: 20,
            omega,
            total_time: 300e-6 * DEFAULT_OMEGA / omega,
            delta_max: 2.0 * omega,
            phase: Phase::Pretrain,
            rabi_error_half_width: 0.2,
            detuning_error_half_width: 0.2,
            t2: None,
            success_threshold: 0.997,
            terminal_bonus: 10.0,
            substeps: DEFAULT_SUBSTEPS,
        }
    }

    /// Time budget and detuning range borrowed from a solved STA design.
    pub fn from_sta(omega: f64, total_time: f64, delta_max: f64) -> Self {
        EnvConfig {
            total_time,
            delta_max,
            ..EnvConfig::hybrid(omega)
        }
    }

    pub fn with_phase(&self, phase: Phase) -> Self {
        EnvConfig {
            phase,
            ..self.clone()
        }
    }

    pub fn step_duration(&self) -> f64 {
        self.total_time / self.n_steps as f64
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if self.n_steps == 0 {
            return Err(Error::invalid("n_steps must be at least 1"));
        }
        if !positive(self.omega) || !positive(self.total_time) || !positive(self.delta_max) {
            return Err(Error::invalid(
                "omega, total_time and delta_max must be positive",
            ));
        }
        for hw in [self.rabi_error_half_width, self.detuning_error_half_width] {
            if !(hw.is_finite() && hw >= 0.0) {
                return Err(Error::invalid("error half-widths must be non-negative"));
            }
        }
        if let Some(t2) = self.t2 {
            if !positive(t2) {
                return Err(Error::invalid("t2 must be positive"));
            }
        }
        if self.substeps == 0 {
            return Err(Error::invalid("substeps must be at least 1"));
        }
        Ok(())
    }
}

/// `Δ = (2ã − 1) Δ_max`.
pub fn decode_action(a_tilde: f64, delta_max: f64) -> f64 {
    (2.0 * a_tilde - 1.0) * delta_max
}

/// Inverse of [`decode_action`], clamped to `[0, 1]`.
pub fn encode_detuning(delta: f64, delta_max: f64) -> f64 {
    ((delta + delta_max) / (2.0 * delta_max)).clamp(0.0, 1.0)
}

/// Linear-ramp target of the pretraining reward for 1-based step `i`.
pub fn ramp_target(i: usize, n_steps: usize) -> f64 {
    if n_steps <= 1 {
        0.0
    } else {
        (i - 1) as f64 / (n_steps - 1) as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Transition {
    pub observation: Observation,
    pub action: f64,
    pub reward: f64,
    pub done: bool,
}

/// Anything that maps observations to actions in `[0, 1]`.
pub trait Policy {
    /// Returns the action and its log-density under the policy. With
    /// `deterministic`, the action is the distribution mean.
    fn act(&self, obs: &Observation, deterministic: bool, rng: &mut ChaCha8Rng)
        -> Result<(f64, f64)>;
}

/// Always emits the same action.
#[derive(Clone, Copy, Debug)]
pub struct ConstantPolicy(pub f64);

impl Policy for ConstantPolicy {
    fn act(&self, _: &Observation, _: bool, _: &mut ChaCha8Rng) -> Result<(f64, f64)> {
        Ok((self.0, 0.0))
    }
}

/// Replays a fixed action list, ignoring observations.
#[derive(Clone, Debug)]
pub struct ScriptedPolicy(pub Vec<f64>);

impl Policy for ScriptedPolicy {
    fn act(&self, obs: &Observation, _: bool, _: &mut ChaCha8Rng) -> Result<(f64, f64)> {
        let n = self.0.len();
        let i = ((obs.time_frac * n as f64).round() as usize).min(n.saturating_sub(1));
        Ok((self.0[i], 0.0))
    }
}

/// One environment instance (single episode at a time).
#[derive(Clone, Debug)]
pub struct QubitEnv {
    config: EnvConfig,
    state: QubitState,
    step_index: usize,
    prev_action: f64,
    errors: ErrorModel,
    rng: ChaCha8Rng,
}

impl QubitEnv {
    pub fn new(config: EnvConfig) -> Result<Self> {
        config.validate()?;
        let errors = ErrorModel::none().with_t2(config.t2);
        Ok(QubitEnv {
            config,
            state: QubitState::ground(),
            step_index: 0,
            prev_action: 0.5,
            errors,
            rng: ChaCha8Rng::seed_from_u64(0),
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    /// Systematic errors (and dephasing) applied in the current episode.
    pub fn errors(&self) -> &ErrorModel {
        &self.errors
    }

    pub fn state(&self) -> &QubitState {
        &self.state
    }

    pub fn is_done(&self) -> bool {
        self.step_index >= self.config.n_steps
    }

    pub fn rng_mut(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    /// Starts an episode from `|0⟩`. In the fine-tune phase, δ_Ω and δ_Δ are
    /// drawn uniformly from the configured half-widths.
    pub fn reset(&mut self, seed: u64) -> Observation {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        let (dw, dd) = match self.config.phase {
            Phase::Pretrain => (0.0, 0.0),
            Phase::Finetune => {
                let hw_o = self.config.rabi_error_half_width;
                let hw_d = self.config.detuning_error_half_width;
                let dw = if hw_o > 0.0 { self.rng.random_range(-hw_o..=hw_o) } else { 0.0 };
                let dd = if hw_d > 0.0 { self.rng.random_range(-hw_d..=hw_d) } else { 0.0 };
                (dw, dd)
            }
        };
        self.start(ErrorModel::systematic(dw, dd).with_t2(self.config.t2))
    }

    /// Starts an episode with explicitly chosen errors (evaluation path).
    pub fn reset_with_errors(&mut self, seed: u64, errors: ErrorModel) -> Observation {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        self.start(errors)
    }

    fn start(&mut self, errors: ErrorModel) -> Observation {
        self.errors = errors;
        self.state = QubitState::ground();
        self.step_index = 0;
        self.prev_action = 0.5;
        Observation::initial()
    }

    pub fn observation(&self) -> Observation {
        Observation {
            sz: expectation_z(&self.state),
            prev_action: self.prev_action,
            time_frac: self.step_index as f64 / self.config.n_steps as f64,
        }
    }

    /// Applies one control interval at the decoded detuning.
    pub fn step(&mut self, action: f64) -> Result<Transition> {
        if self.is_done() {
            return Err(Error::EpisodeFinished);
        }
        if !(0.0..=1.0).contains(&action) {
            return Err(Error::invalid(format!("action {action} outside [0, 1]")));
        }
        let cfg = &self.config;
        let pulse = PulseStep::new(decode_action(action, cfg.delta_max), cfg.step_duration())?;
        self.state = dynamics::evolve_step(&self.state, cfg.omega, &pulse, &self.errors, cfg.substeps)?;
        self.step_index += 1;
        self.prev_action = action;
        let i = self.step_index;
        let done = i == cfg.n_steps;
        let observation = self.observation();
        let reward = match cfg.phase {
            Phase::Pretrain => -(action - ramp_target(i, cfg.n_steps)).abs(),
            Phase::Finetune if done && observation.sz > cfg.success_threshold => cfg.terminal_bonus,
            Phase::Finetune => 0.0,
        };
        Ok(Transition {
            observation,
            action,
            reward,
            done,
        })
    }
}

/// One recorded decision of a rollout.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRow {
    pub step: usize,
    pub observation: Observation,
    pub action: f64,
    pub log_prob: f64,
    pub delta_over_omega: f64,
    /// ⟨σz⟩ after the interval.
    pub sz: f64,
    pub reward: f64,
}

#[derive(Clone, Debug)]
pub struct Rollout {
    pub sequence: PulseSequence,
    pub final_sz: f64,
    pub rewards: Vec<f64>,
    pub trace: Vec<TraceRow>,
    pub errors: ErrorModel,
}

impl Rollout {
    pub fn actions(&self) -> Vec<f64> {
        self.trace.iter().map(|r| r.action).collect()
    }

    pub fn total_reward(&self) -> f64 {
        self.rewards.iter().sum()
    }
}

fn run_episode<P: Policy + ?Sized>(
    env: &mut QubitEnv,
    policy: &P,
    deterministic: bool,
    first: Observation,
) -> Result<Rollout> {
    let cfg = env.config().clone();
    let mut obs = first;
    let mut trace = Vec::with_capacity(cfg.n_steps);
    let mut steps = Vec::with_capacity(cfg.n_steps);
    for step in 1..=cfg.n_steps {
        let (action, log_prob) = policy.act(&obs, deterministic, env.rng_mut())?;
        let tr = env.step(action)?;
        let delta = decode_action(action, cfg.delta_max);
        steps.push(PulseStep {
            delta,
            duration: cfg.step_duration(),
        });
        trace.push(TraceRow {
            step,
            observation: obs,
            action,
            log_prob,
            delta_over_omega: delta / cfg.omega,
            sz: tr.observation.sz,
            reward: tr.reward,
        });
        obs = tr.observation;
    }
    Ok(Rollout {
        sequence: PulseSequence::new(cfg.omega, steps)?,
        final_sz: obs.sz,
        rewards: trace.iter().map(|r| r.reward).collect(),
        trace,
        errors: *env.errors(),
    })
}

/// Runs one full episode with errors sampled per the configured phase.
pub fn rollout<P: Policy + ?Sized>(
    policy: &P,
    config: &EnvConfig,
    deterministic: bool,
    seed: u64,
) -> Result<Rollout> {
    let mut env = QubitEnv::new(config.clone())?;
    let first = env.reset(seed);
    run_episode(&mut env, policy, deterministic, first)
}

/// Runs one full episode under the given errors.
pub fn rollout_with_errors<P: Policy + ?Sized>(
    policy: &P,
    config: &EnvConfig,
    deterministic: bool,
    seed: u64,
    errors: ErrorModel,
) -> Result<Rollout> {
    let mut env = QubitEnv::new(config.clone())?;
    let first = env.reset_with_errors(seed, errors);
    run_episode(&mut env, policy, deterministic, first)
}

/// Open-loop program of the deterministic policy on the error-free system.
pub fn nominal_sequence<P: Policy + ?Sized>(policy: &P, config: &EnvConfig) -> Result<PulseSequence> {
    let clean = EnvConfig {
        t2: None,
        ..config.clone()
    };
    Ok(rollout_with_errors(policy, &clean, true, 0, ErrorModel::none())?.sequence)
}

/// Actions that reproduce `seq` on this environment's detuning scale.
pub fn encode_sequence(seq: &PulseSequence, delta_max: f64) -> Vec<f64> {
    seq.steps
        .iter()
        .map(|s| encode_detuning(s.delta, delta_max))
        .collect()
}
