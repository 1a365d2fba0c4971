//! Robustness benchmarks: systematic-error sweeps, hybrid-error maps,
//! dephasing sweeps and the measurement-feedback protocol.
//!
//! Every grid point gets its own RNG stream derived from `(seed, index)`, so
//! results do not depend on evaluation order or thread count.

pub mod svg;

use std::f64::consts::PI;
use std::fmt;
use std::path::PathBuf;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    evolve, evolve_step, expectation_z, flip_probability, ErrorModel, PulseSequence, PulseStep,
    QubitState,
};
use crate::error::{Error, Result};
use crate::measurement::{DetectorModel, PopulationEstimate};
use crate::ppo::{load_checkpoint, PolicyNetwork};
use crate::rl_env::{decode_action, nominal_sequence, EnvConfig, Observation, Policy};
use crate::sta::{self, ErrorChannel};

/// Infidelities are clamped here before taking the logarithm.
pub const INFIDELITY_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug)]
pub enum PolicySource {
    Checkpoint(PathBuf),
    Loaded(Arc<PolicyNetwork>),
}

impl PolicySource {
    pub fn load(&self) -> Result<Arc<PolicyNetwork>> {
        match self {
            PolicySource::Checkpoint(p) => Ok(Arc::new(load_checkpoint(p)?.0)),
            PolicySource::Loaded(n) => Ok(Arc::clone(n)),
        }
    }
}

#[derive(Clone, Debug)]
pub enum Method {
    PiPulse,
    StaDetuningOpt,
    StaRabiOpt,
    DrlPolicy(Option<PolicySource>),
    FeedbackDrl(Option<PolicySource>),
}

impl Method {
    pub const NAMES: [&'static str; 5] = ["pi", "sta-detuning", "sta-rabi", "drl", "feedback-drl"];

    pub fn name(&self) -> &'static str {
        match self {
            Method::PiPulse => "pi",
            Method::StaDetuningOpt => "sta-detuning",
            Method::StaRabiOpt => "sta-rabi",
            Method::DrlPolicy(_) => "drl",
            Method::FeedbackDrl(_) => "feedback-drl",
        }
    }

    pub fn parse(name: &str, checkpoint: Option<PathBuf>) -> Result<Self> {
        let src = checkpoint.map(PolicySource::Checkpoint);
        Ok(match name {
            "pi" => Method::PiPulse,
            "sta-detuning" => Method::StaDetuningOpt,
            "sta-rabi" => Method::StaRabiOpt,
            "drl" => Method::DrlPolicy(src),
            "feedback-drl" => Method::FeedbackDrl(src),
            other => {
                return Err(Error::invalid(format!(
                    "unknown method '{other}' (expected one of {})",
                    Method::NAMES.join(", ")
                )))
            }
        })
    }

    fn policy(&self) -> Result<Option<Arc<PolicyNetwork>>> {
        match self {
            Method::DrlPolicy(src) | Method::FeedbackDrl(src) => match src {
                Some(s) => s.load().map(Some),
                None => Err(Error::MissingCheckpoint(self.name().into())),
            },
            _ => Ok(None),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Shared physical setup of a benchmark run.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchSetup {
    pub omega: f64,
    /// Shape of DRL programs and the feedback loop.
    pub env: EnvConfig,
    /// Steps used to discretize the analog STA pulses.
    pub sta_steps: usize,
    pub substeps: usize,
}

impl BenchSetup {
    pub fn new(env: EnvConfig) -> Self {
        BenchSetup {
            omega: env.omega,
            substeps: env.substeps,
            env,
            sta_steps: 200,
        }
    }
}

pub fn pi_pulse(omega: f64) -> Result<PulseSequence> {
    if !(omega.is_finite() && omega > 0.0) {
        return Err(Error::invalid("omega must be positive"));
    }
    PulseSequence::new(omega, vec![PulseStep::new(0.0, PI / omega)?])
}

/// What a method executes once resolved.
#[derive(Clone, Debug)]
pub enum Program {
    Fixed(PulseSequence),
    Feedback(Arc<PolicyNetwork>),
}

impl Program {
    pub fn resolve(method: &Method, setup: &BenchSetup) -> Result<Self> {
        let sta_seq = |ch| -> Result<PulseSequence> {
            Ok(sta::design(ch, setup.omega, setup.sta_steps)?.sequence)
        };
        Ok(match method {
            Method::PiPulse => Program::Fixed(pi_pulse(setup.omega)?),
            Method::StaDetuningOpt => Program::Fixed(sta_seq(ErrorChannel::Detuning)?),
            Method::StaRabiOpt => Program::Fixed(sta_seq(ErrorChannel::Rabi)?),
            Method::DrlPolicy(_) => {
                let net = method.policy()?.expect("DRL methods carry a policy");
                Program::Fixed(nominal_sequence(net.as_ref(), &setup.env)?)
            }
            Method::FeedbackDrl(_) => Program::Feedback(method.policy()?.expect("DRL methods carry a policy")),
        })
    }

    pub fn duration(&self, setup: &BenchSetup) -> f64 {
        match self {
            Program::Fixed(s) => s.total_duration(),
            Program::Feedback(_) => setup.env.total_time,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepKind {
    RabiError,
    DetuningError,
    Hybrid,
    RabiTime,
    FlipRepetition,
}

impl SweepKind {
    pub fn name(&self) -> &'static str {
        match self {
            SweepKind::RabiError => "rabi-error",
            SweepKind::DetuningError => "detuning-error",
            SweepKind::Hybrid => "hybrid",
            SweepKind::RabiTime => "rabi-time",
            SweepKind::FlipRepetition => "flip-repetition",
        }
    }
}

/// Error axis of a 1-D sweep.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorAxis {
    Rabi,
    Detuning,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DephasingMode {
    RabiTime,
    FlipRepetition,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepMeta {
    pub method: String,
    pub omega: f64,
    pub duration: f64,
    pub seed: u64,
    /// `None` means exact probabilities without shot noise or SPAM.
    pub shots: Option<u64>,
    pub t2: Option<f64>,
    pub detector: DetectorModel,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepPoint {
    pub index: usize,
    pub coords: Vec<f64>,
    /// Success probability before readout.
    pub probability: f64,
    pub estimate: PopulationEstimate,
    /// `log10(1 − p̂)` with the infidelity clamped at [`INFIDELITY_FLOOR`].
    pub log_infidelity: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult {
    pub kind: SweepKind,
    pub axes: Vec<String>,
    pub meta: SweepMeta,
    pub points: Vec<SweepPoint>,
}

/// Per-point generator: stream `index` of the base seed.
pub fn point_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

pub fn log_infidelity(p: f64) -> f64 {
    (1.0 - p).max(INFIDELITY_FLOOR).log10()
}

fn measure(
    p: f64,
    shots: Option<u64>,
    det: &DetectorModel,
    rng: &mut ChaCha8Rng,
) -> Result<PopulationEstimate> {
    match shots {
        None => Ok(PopulationEstimate {
            p_hat: p,
            std: 0.0,
            n_shots: 0,
        }),
        Some(n) => det.estimate_population(det.with_preparation(p), n, rng),
    }
}

fn point(index: usize, coords: Vec<f64>, probability: f64, estimate: PopulationEstimate) -> SweepPoint {
    SweepPoint {
        index,
        coords,
        probability,
        log_infidelity: log_infidelity(estimate.p_hat),
        estimate,
    }
}

/// Flip probability of a resolved program under `err`.
pub fn run_program(
    program: &Program,
    setup: &BenchSetup,
    err: &ErrorModel,
    det: &DetectorModel,
    shots: Option<u64>,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    match program {
        Program::Fixed(seq) => {
            let out = evolve(&QubitState::ground(), seq, err, setup.substeps)?;
            Ok(flip_probability(&out))
        }
        Program::Feedback(net) => {
            Ok(feedback_protocol(net.as_ref(), &setup.env, det, shots, err, rng)?.probability)
        }
    }
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::invalid("sweep grid is empty"));
    }
    if grid.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("sweep grid contains a non-finite value"));
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn sweep_1d(
    method: &Method,
    axis: ErrorAxis,
    grid: &[f64],
    shots: Option<u64>,
    det: &DetectorModel,
    t2: Option<f64>,
    seed: u64,
    setup: &BenchSetup,
) -> Result<SweepResult> {
    check_grid(grid)?;
    let program = Program::resolve(method, setup)?;
    let points = grid
        .par_iter()
        .enumerate()
        .map(|(i, &d)| {
            let mut rng = point_rng(seed, i);
            let err = match axis {
                ErrorAxis::Rabi => ErrorModel::systematic(d, 0.0),
                ErrorAxis::Detuning => ErrorModel::systematic(0.0, d),
            }
            .with_t2(t2);
            let p = run_program(&program, setup, &err, det, shots, &mut rng)?;
            Ok(point(i, vec![d], p, measure(p, shots, det, &mut rng)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let (kind, axis_name) = match axis {
        ErrorAxis::Rabi => (SweepKind::RabiError, "delta_omega"),
        ErrorAxis::Detuning => (SweepKind::DetuningError, "delta_delta"),
    };
    Ok(SweepResult {
        kind,
        axes: vec![axis_name.into()],
        meta: meta(method, &program, setup, seed, shots, t2, det),
        points,
    })
}

fn meta(
    method: &Method,
    program: &Program,
    setup: &BenchSetup,
    seed: u64,
    shots: Option<u64>,
    t2: Option<f64>,
    det: &DetectorModel,
) -> SweepMeta {
    SweepMeta {
        method: method.name().into(),
        omega: setup.omega,
        duration: program.duration(setup),
        seed,
        shots,
        t2,
        detector: *det,
    }
}

/// Log-infidelity maps over the `(δ_Ω, δ_Δ)` grid, one result per method.
pub fn sweep_hybrid(
    methods: &[Method],
    grid_omega: &[f64],
    grid_delta: &[f64],
    shots: Option<u64>,
    det: &DetectorModel,
    seed: u64,
    setup: &BenchSetup,
) -> Result<Vec<SweepResult>> {
    check_grid(grid_omega)?;
    check_grid(grid_delta)?;
    let cells: Vec<(f64, f64)> = grid_omega
        .iter()
        .flat_map(|&o| grid_delta.iter().map(move |&d| (o, d)))
        .collect();
    methods
        .iter()
        .map(|method| {
            let program = Program::resolve(method, setup)?;
            let points = cells
                .par_iter()
                .enumerate()
                .map(|(i, &(o, d))| {
                    let mut rng = point_rng(seed, i);
                    let err = ErrorModel::systematic(o, d);
                    let p = run_program(&program, setup, &err, det, shots, &mut rng)?;
                    Ok(point(i, vec![o, d], p, measure(p, shots, det, &mut rng)?))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(SweepResult {
                kind: SweepKind::Hybrid,
                axes: vec!["delta_omega".into(), "delta_delta".into()],
                meta: meta(method, &program, setup, seed, shots, None, det),
                points,
            })
        })
        .collect()
}

/// Rabi-time or flip-repetition sweep under dephasing.
///
/// `RabiTime` grid values stretch the program by lowering Ω. `FlipRepetition`
/// grid values are repetition counts; success is measured against `|1⟩` for
/// odd counts and `|0⟩` for even counts.
#[allow(clippy::too_many_arguments)]
pub fn sweep_dephasing(
    method: &Method,
    mode: DephasingMode,
    grid: &[f64],
    t2: f64,
    shots: Option<u64>,
    det: &DetectorModel,
    seed: u64,
    setup: &BenchSetup,
) -> Result<SweepResult> {
    check_grid(grid)?;
    if !(t2.is_finite() && t2 > 0.0) {
        return Err(Error::invalid("t2 must be positive"));
    }
    let program = Program::resolve(method, setup)?;
    let Program::Fixed(seq) = &program else {
        return Err(Error::invalid("dephasing sweeps need an open-loop program"));
    };
    let err = ErrorModel::none().with_t2(Some(t2));
    let points = grid
        .par_iter()
        .enumerate()
        .map(|(i, &g)| {
            let mut rng = point_rng(seed, i);
            let p = match mode {
                DephasingMode::RabiTime => {
                    if g <= 0.0 {
                        return Err(Error::invalid("Rabi-time factors must be positive"));
                    }
                    let out = evolve(&QubitState::ground(), &seq.time_scaled(g), &err, setup.substeps)?;
                    flip_probability(&out)
                }
                DephasingMode::FlipRepetition => {
                    if g < 1.0 || g.fract() != 0.0 {
                        return Err(Error::invalid("repetition counts must be positive integers"));
                    }
                    let m = g as usize;
                    let out = evolve(&QubitState::ground(), &seq.repeated(m), &err, setup.substeps)?;
                    let p1 = flip_probability(&out);
                    if m % 2 == 1 {
                        p1
                    } else {
                        1.0 - p1
                    }
                }
            };
            Ok(point(i, vec![g], p, measure(p, shots, det, &mut rng)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let (kind, axis) = match mode {
        DephasingMode::RabiTime => (SweepKind::RabiTime, "time_factor"),
        DephasingMode::FlipRepetition => (SweepKind::FlipRepetition, "flips"),
    };
    Ok(SweepResult {
        kind,
        axes: vec![axis.into()],
        meta: meta(method, &program, setup, seed, shots, Some(t2), det),
        points,
    })
}

/// One feedback decision. Cycle 0 is the initial action from the prepared
/// state; cycle `n` follows a measurement after `n` committed pulses.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeedbackCycle {
    pub cycle: usize,
    pub measured_sz: f64,
    pub action: f64,
}

#[derive(Clone, Debug)]
pub struct FeedbackOutcome {
    pub sequence: PulseSequence,
    pub cycles: Vec<FeedbackCycle>,
    /// Flip probability of the committed program under the run's errors.
    pub probability: f64,
}

/// Closed-loop pulse commitment with measured `⟨σz⟩` feedback.
///
/// In cycle `n` the first `n` committed pulses are replayed from `|0⟩`,
/// `⟨σz⟩` is estimated from `shots` readouts (exactly when `None`) and the
/// deterministic policy chooses pulse `n + 1`.
pub fn feedback_protocol<P: Policy + ?Sized>(
    policy: &P,
    config: &EnvConfig,
    det: &DetectorModel,
    shots: Option<u64>,
    errors: &ErrorModel,
    rng: &mut ChaCha8Rng,
) -> Result<FeedbackOutcome> {
    config.validate()?;
    let n_steps = config.n_steps;
    let dt = config.step_duration();
    let mut committed: Vec<PulseStep> = Vec::with_capacity(n_steps);
    let mut actions: Vec<f64> = Vec::with_capacity(n_steps);
    let mut cycles = Vec::with_capacity(n_steps);
    let mut obs = Observation::initial();
    for cycle in 0..n_steps {
        if cycle > 0 {
            let mut state = QubitState::ground();
            for step in &committed {
                state = evolve_step(&state, config.omega, step, errors, config.substeps)?;
            }
            let sz = match shots {
                None => expectation_z(&state),
                Some(_) => {
                    let est = measure(flip_probability(&state), shots, det, rng)?;
                    2.0 * est.p_hat - 1.0
                }
            };
            obs = Observation {
                sz,
                prev_action: actions[cycle - 1],
                time_frac: cycle as f64 / n_steps as f64,
            };
        }
        let (action, _) = policy.act(&obs, true, rng)?;
        cycles.push(FeedbackCycle {
            cycle,
            measured_sz: obs.sz,
            action,
        });
        actions.push(action);
        committed.push(PulseStep::new(decode_action(action, config.delta_max), dt)?);
    }
    let sequence = PulseSequence::new(config.omega, committed)?;
    let mut state = QubitState::ground();
    for step in &sequence.steps {
        state = evolve_step(&state, config.omega, step, errors, config.substeps)?;
    }
    Ok(FeedbackOutcome {
        sequence,
        cycles,
        probability: flip_probability(&state),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rl_env::{rollout_with_errors, ScriptedPolicy, DEFAULT_OMEGA};

    fn setup() -> BenchSetup {
        BenchSetup::new(EnvConfig::default())
    }

    fn rabi_formula(dd: f64, t_omega: f64) -> f64 {
        let g = 1.0 + dd * dd;
        (g.sqrt() * t_omega / 2.0).sin().powi(2) / g
    }

    #[test]
    fn pi_pulse_duration_and_detuning_oracle() {
        let p = pi_pulse(DEFAULT_OMEGA).unwrap();
        assert!((p.total_duration() - 151.515e-6).abs() < 0.01e-6);
        let r = sweep_1d(
            &Method::PiPulse,
            ErrorAxis::Detuning,
            &[-0.2, 0.0, 0.2],
            None,
            &DetectorModel::ideal(),
            None,
            0,
            &setup(),
        )
        .unwrap();
        assert!((r.points[1].probability - 1.0).abs() < 1e-12);
        let expect = rabi_formula(0.2, PI);
        assert!((r.points[2].probability - expect).abs() < 1e-9);
        assert!((expect - 0.9606).abs() < 1e-4);
        assert!((r.points[0].probability - r.points[2].probability).abs() < 1e-12);
        assert!(r.points[1].log_infidelity <= -6.0);
    }

    #[test]
    fn missing_checkpoint_is_reported() {
        let e = sweep_1d(
            &Method::DrlPolicy(None),
            ErrorAxis::Rabi,
            &[0.0],
            None,
            &DetectorModel::ideal(),
            None,
            0,
            &setup(),
        )
        .unwrap_err();
        assert!(matches!(e, Error::MissingCheckpoint(_)));
        let empty = sweep_1d(&Method::PiPulse, ErrorAxis::Rabi, &[], None, &DetectorModel::ideal(), None, 0, &setup());
        assert!(empty.is_err());
    }

    #[test]
    fn shot_sweeps_are_reproducible() {
        let run = || {
            sweep_1d(
                &Method::PiPulse,
                ErrorAxis::Rabi,
                &[-0.1, 0.0, 0.1],
                Some(500),
                &DetectorModel::default(),
                None,
                42,
                &setup(),
            )
            .unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn repetition_parity_and_long_t2() {
        let r = sweep_dephasing(
            &Method::PiPulse,
            DephasingMode::FlipRepetition,
            &[1.0, 2.0, 3.0],
            1e6,
            None,
            &DetectorModel::ideal(),
            0,
            &setup(),
        )
        .unwrap();
        for p in &r.points {
            assert!(p.probability > 1.0 - 1e-7, "{:?}", p);
        }
        assert!(sweep_dephasing(
            &Method::PiPulse,
            DephasingMode::FlipRepetition,
            &[1.5],
            1e-3,
            None,
            &DetectorModel::ideal(),
            0,
            &setup()
        )
        .is_err());
    }

    #[test]
    fn ideal_feedback_matches_open_loop() {
        let actions: Vec<f64> = (0..20).map(|i| 0.1 + 0.04 * i as f64).collect();
        let policy = ScriptedPolicy(actions.clone());
        let cfg = EnvConfig::default();
        let err = ErrorModel::systematic(0.05, -0.03);
        let mut rng = point_rng(0, 0);
        let fb = feedback_protocol(&policy, &cfg, &DetectorModel::ideal(), None, &err, &mut rng).unwrap();
        let open = rollout_with_errors(&policy, &cfg, true, 0, err).unwrap();
        assert_eq!(fb.sequence, open.sequence);
        assert_eq!(fb.cycles.len(), 20);
        assert_eq!(fb.cycles[0].measured_sz, -1.0);
        for (c, row) in fb.cycles.iter().skip(1).zip(&open.trace) {
            assert_eq!(c.measured_sz, row.sz);
        }
        assert!(((1.0 + open.final_sz) / 2.0 - fb.probability).abs() < 1e-15);
    }
}
