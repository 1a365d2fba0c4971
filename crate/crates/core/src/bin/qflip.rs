//! `qflip` command-line tool.
//!
//! Exit codes: 0 success, 1 configuration or argument error, 2 numerical
//! failure, 3 I/O error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use qflip::bench::{self, svg, DephasingMode, ErrorAxis, Method, PolicySource, SweepKind, SweepResult};
use qflip::config::{Grid, RunConfig};
use qflip::dynamics::{evolve_unitary, expectation_z, ErrorModel, QubitState};
use qflip::io::{self, Header};
use qflip::ppo::{load_checkpoint, save_checkpoint, train};
use qflip::rl_env::{nominal_sequence, rollout_with_errors};
use qflip::sta::{self, ErrorChannel};
use qflip::waveform::{build_phase_plan, sample_waveform, verify_continuity};
use qflip::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "qflip", version, about = "Robust single-qubit flip pulses: design, training, benchmarks, export")]
struct Cli {
    /// TOML run configuration; flags override its keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master random seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for parallel sweeps and episode collection (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve the STA ansatz parameter and write the discretized pulse.
    ///
    /// Pulse CSV columns: step_index, delta_over_omega, duration_s.
    StaDesign(StaDesignArgs),
    /// Run the pretrain/fine-tune curriculum and save the policy.
    ///
    /// Curve CSV columns: batch_index, phase, episodes, mean_return,
    /// policy_loss, value_loss, entropy, eval_score.
    Train(TrainArgs),
    /// Robustness sweeps over systematic errors or dephasing.
    ///
    /// CSV columns: index, method, kind, <axes>, probability, p_hat, std,
    /// n_shots, log10_infidelity, omega_rad_s, duration_s, seed, t2_s.
    Sweep(SweepArgs),
    /// Closed-loop feedback protocol with measured ⟨σz⟩.
    ///
    /// CSV columns: cycle, measured_sz, action, delta_over_omega.
    Feedback(FeedbackArgs),
    /// Compile a pulse CSV into the phase-continuous AWG waveform.
    ///
    /// CSV columns: time_s, amplitude.
    Waveform(WaveformArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Channel {
    Detuning,
    Rabi,
}

#[derive(Args, Debug)]
struct StaDesignArgs {
    #[arg(long, value_enum)]
    channel: Channel,
    /// Rabi frequency Ω/2π (Hz).
    #[arg(long)]
    omega_hz: Option<f64>,
    #[arg(long)]
    n_steps: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Checkpoint output (JSON).
    #[arg(long)]
    out_checkpoint: Option<PathBuf>,
    /// Training curve output.
    #[arg(long)]
    curve: Option<PathBuf>,
    #[arg(long)]
    pretrain_episodes: Option<usize>,
    #[arg(long)]
    finetune_episodes: Option<usize>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum KindArg {
    RabiError,
    DetuningError,
    Hybrid,
    RabiTime,
    FlipRepetition,
}

impl From<KindArg> for SweepKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::RabiError => SweepKind::RabiError,
            KindArg::DetuningError => SweepKind::DetuningError,
            KindArg::Hybrid => SweepKind::Hybrid,
            KindArg::RabiTime => SweepKind::RabiTime,
            KindArg::FlipRepetition => SweepKind::FlipRepetition,
        }
    }
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// Methods: pi, sta-detuning, sta-rabi, drl, feedback-drl (repeatable).
    #[arg(long = "method")]
    methods: Vec<String>,
    #[arg(long, value_enum)]
    kind: Option<KindArg>,
    /// Policy checkpoint for the DRL methods.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Readouts per point; omit for exact probabilities.
    #[arg(long)]
    shots: Option<u64>,
    /// Dephasing time (s).
    #[arg(long)]
    t2_s: Option<f64>,
    /// Comma-separated grid values, replacing the configured grid.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    grid: Option<Vec<f64>>,
    /// Comma-separated second hybrid axis.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    grid_delta: Option<Vec<f64>>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write an SVG chart next to the CSV.
    #[arg(long)]
    svg: bool,
}

#[derive(Args, Debug)]
struct FeedbackArgs {
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Readouts per cycle.
    #[arg(long, conflicts_with = "exact")]
    shots: Option<u64>,
    /// Use the exact ⟨σz⟩ instead of sampled readouts.
    #[arg(long)]
    exact: bool,
    #[arg(long, allow_hyphen_values = true)]
    rabi_error: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    detuning_error: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the committed pulse program.
    #[arg(long)]
    pulse_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct WaveformArgs {
    /// Pulse CSV as written by sta-design or feedback.
    #[arg(long)]
    pulse: PathBuf,
    #[arg(long)]
    f0_hz: Option<f64>,
    #[arg(long)]
    fc_hz: Option<f64>,
    #[arg(long)]
    rate_hz: Option<f64>,
    #[arg(long)]
    a2: Option<f64>,
    /// Rabi frequency Ω/2π when the pulse file has no header value.
    #[arg(long)]
    omega_hz: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the segment phase plan.
    #[arg(long)]
    plan_out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    match cli.command {
        Command::StaDesign(a) => cmd_sta_design(cfg, a),
        Command::Train(a) => cmd_train(cfg, a),
        Command::Sweep(a) => cmd_sweep(cfg, a),
        Command::Feedback(a) => cmd_feedback(cfg, a),
        Command::Waveform(a) => cmd_waveform(cfg, a),
    }
}

fn out_path(cfg: &RunConfig, explicit: Option<PathBuf>, default_name: &str) -> PathBuf {
    explicit.unwrap_or_else(|| cfg.output.dir.join(default_name))
}

/// Validates the overridden configuration and returns its fingerprint.
fn resolve(cfg: &RunConfig) -> Result<String> {
    cfg.validate()?;
    Ok(cfg.fingerprint())
}

fn cmd_sta_design(mut cfg: RunConfig, a: StaDesignArgs) -> Result<()> {
    if let Some(w) = a.omega_hz {
        cfg.env.omega_hz = w;
    }
    if let Some(n) = a.n_steps {
        cfg.env.n_steps = n;
    }
    let fp = resolve(&cfg)?;
    let channel = match a.channel {
        Channel::Detuning => ErrorChannel::Detuning,
        Channel::Rabi => ErrorChannel::Rabi,
    };
    let omega = cfg.env.omega();
    let d = sta::design(channel, omega, cfg.env.n_steps)?;
    let path = out_path(&cfg, a.out, "sta_pulse.csv");
    let header = Header::new(io::PULSE_SCHEMA, &fp)
        .with("method", format!("sta-{}", channel_name(channel)))
        .with("a", io::num(d.ansatz.a()))
        .with("duration_s", io::num(d.ansatz.duration()));
    io::write_pulse_csv(&path, &d.sequence, header)?;
    println!("channel: {}", channel_name(channel));
    println!("a: {:.6}", d.ansatz.a());
    println!("duration_s: {:.6e}", d.ansatz.duration());
    println!("max_delta_over_omega: {:.4}", d.max_detuning / omega);
    println!("wrote {}", path.display());
    Ok(())
}

fn channel_name(c: ErrorChannel) -> &'static str {
    match c {
        ErrorChannel::Detuning => "detuning",
        ErrorChannel::Rabi => "rabi",
    }
}

fn cmd_train(mut cfg: RunConfig, a: TrainArgs) -> Result<()> {
    if let Some(n) = a.pretrain_episodes {
        cfg.schedule.pretrain_episodes = n;
    }
    if let Some(n) = a.finetune_episodes {
        cfg.schedule.finetune_episodes = n;
    }
    let fp = resolve(&cfg)?;
    let env = cfg.env_config()?;
    let out = train(&env, &cfg.ppo, cfg.schedule, cfg.seed)?;
    let ck = out_path(&cfg, a.out_checkpoint, "policy.json");
    save_checkpoint(&ck, &out.policy, &fp)?;
    let curve = a.curve.unwrap_or_else(|| ck.with_extension("curve.csv"));
    let header = Header::new("qflip-curve/1", &fp).with("seed", cfg.seed);
    io::write_curve_csv(&curve, &out.curve, header)?;
    let seq = nominal_sequence(&out.policy, &env)?;
    let sz = expectation_z(&evolve_unitary(&QubitState::ground(), &seq, &ErrorModel::none())?);
    if !sz.is_finite() {
        return Err(Error::Numerical("final rollout is not finite".into()));
    }
    match out.best_score {
        Some(s) => println!("best_eval_score: {s:.6}"),
        None => println!("best_eval_score: none (final policy saved)"),
    }
    println!("final_sz: {sz:.6}");
    println!("wrote {} and {}", ck.display(), curve.display());
    Ok(())
}

fn cmd_sweep(mut cfg: RunConfig, a: SweepArgs) -> Result<()> {
    if !a.methods.is_empty() {
        cfg.sweep.methods = a.methods;
    }
    if let Some(k) = a.kind {
        cfg.sweep.kind = k.into();
    }
    if a.checkpoint.is_some() {
        cfg.sweep.checkpoint = a.checkpoint;
    }
    if a.shots.is_some() {
        cfg.sweep.shots = a.shots;
    }
    if a.t2_s.is_some() {
        cfg.sweep.t2_s = a.t2_s;
    }
    if let Some(g) = a.grid {
        cfg.sweep.grid = Grid::Values(g);
    }
    if let Some(g) = a.grid_delta {
        cfg.sweep.grid_delta = Grid::Values(g);
    }
    cfg.output.svg |= a.svg;
    let fp = resolve(&cfg)?;
    let setup = cfg.bench_setup()?;
    let s = &cfg.sweep;
    if s.methods.is_empty() {
        return Err(Error::Config("no sweep methods given".into()));
    }
    let methods = s
        .methods
        .iter()
        .map(|m| Method::parse(m, s.checkpoint.clone()))
        .collect::<Result<Vec<_>>>()?;
    // Load a shared checkpoint once for all DRL methods.
    let methods: Vec<Method> = methods
        .into_iter()
        .map(|m| match m {
            Method::DrlPolicy(Some(src)) => Ok(Method::DrlPolicy(Some(PolicySource::Loaded(src.load()?)))),
            Method::FeedbackDrl(Some(src)) => Ok(Method::FeedbackDrl(Some(PolicySource::Loaded(src.load()?)))),
            other => Ok(other),
        })
        .collect::<Result<_>>()?;
    let grid = s.grid.values();
    let det = &cfg.detector;
    let results: Vec<SweepResult> = match s.kind {
        SweepKind::RabiError | SweepKind::DetuningError => {
            let axis = if s.kind == SweepKind::RabiError { ErrorAxis::Rabi } else { ErrorAxis::Detuning };
            methods
                .iter()
                .map(|m| bench::sweep_1d(m, axis, &grid, s.shots, det, s.t2_s, cfg.seed, &setup))
                .collect::<Result<_>>()?
        }
        SweepKind::Hybrid => bench::sweep_hybrid(&methods, &grid, &s.grid_delta.values(), s.shots, det, cfg.seed, &setup)?,
        SweepKind::RabiTime | SweepKind::FlipRepetition => {
            let t2 = s
                .t2_s
                .ok_or_else(|| Error::Config("dephasing sweeps need sweep.t2_s or --t2-s".into()))?;
            let mode = if s.kind == SweepKind::RabiTime { DephasingMode::RabiTime } else { DephasingMode::FlipRepetition };
            methods
                .iter()
                .map(|m| bench::sweep_dephasing(m, mode, &grid, t2, s.shots, det, cfg.seed, &setup))
                .collect::<Result<_>>()?
        }
    };
    let path = out_path(&cfg, a.out, "sweep.csv");
    let header = Header::new("qflip-sweep/1", &fp).with("kind", s.kind.name());
    io::write_sweep_csv(&path, &results, header)?;
    println!("wrote {}", path.display());
    if cfg.output.svg {
        write_svgs(&path, &results)?;
    }
    for r in &results {
        let best = r.points.iter().map(|p| p.estimate.p_hat).fold(f64::NEG_INFINITY, f64::max);
        let worst = r.points.iter().map(|p| p.estimate.p_hat).fold(f64::INFINITY, f64::min);
        println!("{}: p_hat range [{worst:.6}, {best:.6}] over {} points", r.meta.method, r.points.len());
    }
    Ok(())
}

fn write_svgs(csv_path: &Path, results: &[SweepResult]) -> Result<()> {
    let write = |p: PathBuf, body: String| -> Result<()> {
        std::fs::write(&p, body).map_err(|e| Error::Io { path: p.clone(), source: e })?;
        println!("wrote {}", p.display());
        Ok(())
    };
    if results[0].kind == SweepKind::Hybrid {
        for r in results {
            let stem = csv_path.file_stem().and_then(|s| s.to_str()).unwrap_or("sweep");
            let p = csv_path.with_file_name(format!("{stem}-{}.svg", r.meta.method));
            write(p, svg::heatmap(&format!("{} hybrid errors", r.meta.method), r))?;
        }
        Ok(())
    } else {
        let refs: Vec<&SweepResult> = results.iter().collect();
        write(csv_path.with_extension("svg"), svg::line_chart(results[0].kind.name(), &refs))
    }
}

fn cmd_feedback(mut cfg: RunConfig, a: FeedbackArgs) -> Result<()> {
    if a.checkpoint.is_some() {
        cfg.feedback.checkpoint = a.checkpoint;
    }
    if a.exact {
        cfg.feedback.shots = None;
    } else if a.shots.is_some() {
        cfg.feedback.shots = a.shots;
    }
    if let Some(v) = a.rabi_error {
        cfg.feedback.rabi_error = v;
    }
    if let Some(v) = a.detuning_error {
        cfg.feedback.detuning_error = v;
    }
    let fp = resolve(&cfg)?;
    let f = &cfg.feedback;
    let ck = f
        .checkpoint
        .as_ref()
        .ok_or_else(|| Error::MissingCheckpoint("feedback-drl".into()))?;
    let (net, _) = load_checkpoint(ck)?;
    let env = cfg.env_config()?;
    let errors = ErrorModel::systematic(f.rabi_error, f.detuning_error).with_t2(env.t2);
    let mut rng = bench::point_rng(cfg.seed, 0);
    let outcome = bench::feedback_protocol(&net, &env, &cfg.detector, f.shots, &errors, &mut rng)?;
    let open_loop = rollout_with_errors(&net, &env, true, 0, errors)?;
    let path = out_path(&cfg, a.out, "feedback.csv");
    let header = Header::new("qflip-feedback/1", &fp)
        .with("shots", f.shots.map_or("exact".to_string(), |n| n.to_string()))
        .with("final_probability", io::num(outcome.probability));
    io::write_feedback_csv(&path, &outcome.cycles, env.delta_max / env.omega, header)?;
    if let Some(p) = a.pulse_out {
        io::write_pulse_csv(&p, &outcome.sequence, Header::new(io::PULSE_SCHEMA, &fp).with("method", "feedback-drl"))?;
        println!("wrote {}", p.display());
    }
    let p_open = (open_loop.final_sz + 1.0) / 2.0;
    println!("cycles: {}", outcome.cycles.len());
    println!("final_probability: {:.6}", outcome.probability);
    println!("open_loop_probability: {p_open:.6}");
    println!("identical_to_open_loop: {}", outcome.sequence == open_loop.sequence);
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_waveform(mut cfg: RunConfig, a: WaveformArgs) -> Result<()> {
    if let Some(v) = a.f0_hz {
        cfg.waveform.f0_hz = v;
    }
    if let Some(v) = a.fc_hz {
        cfg.waveform.fc_hz = v;
    }
    if let Some(v) = a.rate_hz {
        cfg.waveform.sample_rate_hz = v;
    }
    if let Some(v) = a.a2 {
        cfg.waveform.a2 = v;
    }
    let fp = resolve(&cfg)?;
    let omega = a.omega_hz.map(|w| std::f64::consts::TAU * w);
    let (seq, _) = io::read_pulse_csv(&a.pulse, omega)?;
    let w = &cfg.waveform;
    let plan = build_phase_plan(&seq, w.f0_hz, w.fc_hz)?;
    let jump = verify_continuity(&plan);
    let samples = sample_waveform(&plan, w.sample_rate_hz, w.a2)?;
    let path = out_path(&cfg, a.out, "waveform.csv");
    io::write_waveform_csv(&path, &plan, &samples, Header::new("qflip-waveform/1", &fp))?;
    if let Some(p) = a.plan_out {
        io::write_plan_csv(&p, &plan, Header::new("qflip-plan/1", &fp))?;
        println!("wrote {}", p.display());
    }
    println!("segments: {}", plan.segments.len());
    println!("samples: {}", samples.samples.len());
    println!("max_phase_jump_rad: {jump:.3e}");
    println!("wrote {}", path.display());
    Ok(())
}
