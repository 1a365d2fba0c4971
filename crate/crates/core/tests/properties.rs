use std::f64::consts::TAU;

use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use qflip::dynamics::{
    evolve, evolve_lindblad, evolve_unitary, flip_probability, step_unitary, ErrorModel, Mat2, PulseSequence,
    PulseStep, QubitState,
};
use qflip::io::{read_pulse_csv, write_pulse_csv, Header};
use qflip::measurement::DetectorModel;
use qflip::ppo::{compute_gae, load_checkpoint, save_checkpoint, PolicyNetwork, StepRecord, TrajectoryBatch};
use qflip::rl_env::{decode_action, encode_detuning, rollout, EnvConfig, Observation, Phase, QubitEnv};
use qflip::waveform::{build_phase_plan, verify_continuity};

const OMEGA: f64 = TAU * 3300.0;

fn sequence() -> impl Strategy<Value = PulseSequence> {
    prop::collection::vec((-2.0f64..2.0, 1e-6f64..40e-6), 1..25).prop_map(|steps| {
        PulseSequence::new(
            OMEGA,
            steps.into_iter().map(|(d, t)| PulseStep::new(d * OMEGA, t).unwrap()).collect(),
        )
        .unwrap()
    })
}

fn negated(seq: &PulseSequence) -> PulseSequence {
    PulseSequence::new(
        seq.omega,
        seq.steps.iter().map(|s| PulseStep::new(-s.delta, s.duration).unwrap()).collect(),
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn step_unitary_is_special_unitary(om in 0.0f64..5.0, de in -5.0f64..5.0, dt in 0.0f64..1e-3) {
        let u = step_unitary(om * OMEGA, de * OMEGA, dt);
        prop_assert!((u.dagger() * u - Mat2::identity()).max_abs() < 1e-13);
        prop_assert!((u.det() - Complex64::new(1.0, 0.0)).norm() < 1e-13);
    }

    #[test]
    fn detuning_sign_is_immaterial(seq in sequence(), d_om in -0.3f64..0.3, d_de in -0.3f64..0.3) {
        let g = QubitState::ground();
        let a = flip_probability(&evolve_unitary(&g, &seq, &ErrorModel::systematic(d_om, d_de)).unwrap());
        let b = flip_probability(&evolve_unitary(&g, &negated(&seq), &ErrorModel::systematic(d_om, -d_de)).unwrap());
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn dephased_states_stay_physical(seq in sequence(), t2 in 1e-5f64..1e-2) {
        let out = evolve_lindblad(&QubitState::ground(), &seq, &ErrorModel::none().with_t2(Some(t2)), 64).unwrap();
        prop_assert!(out.check().is_ok());
        let (lo, hi) = out.eigenvalues();
        prop_assert!(lo >= -1e-12 && hi <= 1.0 + 1e-12);
        let [x, y, z] = out.bloch();
        prop_assert!(x * x + y * y + z * z <= 1.0 + 1e-9);
    }

    #[test]
    fn dephasing_never_beats_unitary_purity(seq in sequence(), t2 in 1e-5f64..1e-2) {
        let pure = evolve(&QubitState::ground(), &seq, &ErrorModel::none(), 64).unwrap();
        let mixed = evolve(&QubitState::ground(), &seq, &ErrorModel::none().with_t2(Some(t2)), 64).unwrap();
        let norm = |s: &QubitState| s.bloch().iter().map(|v| v * v).sum::<f64>();
        prop_assert!((norm(&pure) - 1.0).abs() < 1e-12);
        prop_assert!(norm(&mixed) <= 1.0 + 1e-9);
    }

    #[test]
    fn phase_plans_are_continuous_and_invertible(seq in sequence()) {
        let plan = build_phase_plan(&seq, 12.6428e9, 12.4428e9).unwrap();
        prop_assert!(verify_continuity(&plan) < 1e-9 * plan.segments.len() as f64);
        prop_assert_eq!(plan.to_sequence(OMEGA).unwrap(), seq);
    }

    #[test]
    fn spam_errors_are_monotone_in_threshold(ld in 0.0f64..2.0, gap in 0.5f64..30.0, k in 0u64..20) {
        let d = |threshold| DetectorModel { lambda_dark: ld, lambda_bright: ld + gap, threshold, prep_error: 0.0 }.spam_errors();
        let (a, b) = (d(k), d(k + 1));
        prop_assert!(b.eps_d >= a.eps_d);
        prop_assert!(b.eps_b <= a.eps_b);
        prop_assert!((0.0..=1.0).contains(&a.eps_d) && (0.0..=1.0).contains(&a.eps_b));
    }

    #[test]
    fn action_codec_round_trips(a in 0.0f64..=1.0, dmax in 0.1f64..5.0) {
        let d = decode_action(a, dmax * OMEGA);
        prop_assert!(d.abs() <= dmax * OMEGA * (1.0 + 1e-15));
        prop_assert!((encode_detuning(d, dmax * OMEGA) - a).abs() < 1e-12);
    }

    #[test]
    fn pretrain_rewards_are_bounded(actions in prop::collection::vec(0.0f64..=1.0, 20)) {
        let mut env = QubitEnv::new(EnvConfig::default()).unwrap();
        env.reset(0);
        for (i, &a) in actions.iter().enumerate() {
            let tr = env.step(a).unwrap();
            prop_assert!((-1.0..=0.0).contains(&tr.reward));
            prop_assert_eq!(tr.done, i == 19);
        }
        prop_assert!(env.step(0.5).is_err());
    }

    #[test]
    fn finetune_returns_are_binary(seed in any::<u64>()) {
        let cfg = EnvConfig::default().with_phase(Phase::Finetune);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = PolicyNetwork::standard(&mut rng);
        let r = rollout(&net, &cfg, false, seed).unwrap();
        let total: f64 = r.rewards.iter().sum();
        prop_assert!(total == 0.0 || total == cfg.terminal_bonus);
        prop_assert!(r.rewards[..19].iter().all(|&x| x == 0.0));
        prop_assert!(r.errors.delta_omega.abs() <= 0.2 && r.errors.delta_delta.abs() <= 0.2);
    }

    #[test]
    fn gae_is_normalized(rewards in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 1..8), 2..6)) {
        let episodes: Vec<Vec<StepRecord>> = rewards
            .iter()
            .map(|ep| {
                ep.iter()
                    .enumerate()
                    .map(|(i, &r)| StepRecord {
                        observation: Observation::initial(),
                        action: 0.5,
                        log_prob: 0.0,
                        reward: r,
                        value: 0.1 * i as f64,
                        done: i + 1 == ep.len(),
                    })
                    .collect()
            })
            .collect();
        let g = compute_gae(&TrajectoryBatch { episodes }, 0.99, 0.95).unwrap();
        let n = g.advantages.len() as f64;
        let mean = g.advantages.iter().sum::<f64>() / n;
        let var = g.advantages.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
        prop_assert!(mean.abs() < 1e-12);
        let raw_mean = g.raw_advantages.iter().sum::<f64>() / n;
        let raw_var = g.raw_advantages.iter().map(|a| (a - raw_mean).powi(2)).sum::<f64>() / n;
        if raw_var >= 1e-8 {
            prop_assert!((var - 1.0).abs() < 1e-9);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn pulse_csv_round_trip_is_exact(seq in sequence()) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        write_pulse_csv(&path, &seq, Header::new("qflip-pulse/1", "abc")).unwrap();
        let (back, header) = read_pulse_csv(&path, None).unwrap();
        prop_assert_eq!(header.get("config_fingerprint"), Some("abc"));
        prop_assert_eq!(back.steps.len(), seq.steps.len());
        for (a, b) in back.steps.iter().zip(&seq.steps) {
            prop_assert_eq!(a.duration, b.duration);
            prop_assert!((a.delta - b.delta).abs() <= 1e-15 * OMEGA);
        }
    }

    #[test]
    fn stochastic_rollouts_are_reproducible(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = PolicyNetwork::standard(&mut rng);
        let cfg = EnvConfig::default().with_phase(Phase::Finetune);
        let a = rollout(&net, &cfg, false, seed).unwrap();
        let b = rollout(&net, &cfg, false, seed).unwrap();
        prop_assert_eq!(a.sequence, b.sequence);
        prop_assert_eq!(a.final_sz, b.final_sz);
    }

    #[test]
    fn checkpoints_round_trip_bit_exact(seed in any::<u64>()) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        let net = PolicyNetwork::standard(&mut ChaCha8Rng::seed_from_u64(seed));
        save_checkpoint(&path, &net, "fp").unwrap();
        let (back, ck) = load_checkpoint(&path).unwrap();
        prop_assert_eq!(ck.config_fingerprint.as_str(), "fp");
        prop_assert!(back.params().iter().zip(net.params()).all(|(a, b)| a.to_bits() == b.to_bits()));
    }
}
