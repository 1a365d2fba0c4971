use std::ffi::{CStr, CString};
use std::ptr;

use qflip::ppo::{save_checkpoint, PolicyNetwork, Architecture};
use qflip_ffi::*;
use rand::SeedableRng;

const OMEGA: f64 = 2.0 * std::f64::consts::PI * 3300.0;

fn last_error() -> String {
    let p = qflip_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn version_is_a_c_string() {
    let v = unsafe { CStr::from_ptr(qflip_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn sta_design_and_probability() {
    unsafe {
        let mut seq = ptr::null_mut();
        let (mut a, mut t, mut dmax) = (0.0, 0.0, 0.0);
        let st = qflip_sta_design(QflipChannel::Detuning, OMEGA, 20, &mut seq, &mut a, &mut t, &mut dmax);
        assert_eq!(st, QflipStatus::Ok);
        assert!((a - 0.604).abs() < 0.01);
        assert!((t - 367.4e-6).abs() < 1e-6);
        assert!((dmax / OMEGA - 1.5).abs() < 0.05);
        assert_eq!(qflip_sequence_len(seq), 20);
        let (mut d, mut dt) = (0.0, 0.0);
        assert_eq!(qflip_sequence_step(seq, 19, &mut d, &mut dt), QflipStatus::Ok);
        assert!((dt - t / 20.0).abs() < 1e-15);
        assert_eq!(qflip_sequence_step(seq, 20, &mut d, &mut dt), QflipStatus::InvalidArgument);
        assert!(last_error().contains("out of range"));
        let mut p = 0.0;
        assert_eq!(qflip_flip_probability(seq, 0.0, 0.0, 0.0, 64, &mut p), QflipStatus::Ok);
        assert!(p > 0.99);
        qflip_sequence_free(seq);
        // Optional outputs may be NULL.
        let mut seq = ptr::null_mut();
        let st = qflip_sta_design(QflipChannel::Rabi, OMEGA, 20, &mut seq, ptr::null_mut(), ptr::null_mut(), ptr::null_mut());
        assert_eq!(st, QflipStatus::Ok);
        qflip_sequence_free(seq);
    }
}

#[test]
fn pi_pulse_matches_rabi_formula() {
    unsafe {
        let mut seq = ptr::null_mut();
        assert_eq!(qflip_pi_pulse(OMEGA, &mut seq), QflipStatus::Ok);
        let mut p = 0.0;
        assert_eq!(qflip_flip_probability(seq, 0.0, 0.2, -1.0, 64, &mut p), QflipStatus::Ok);
        let g: f64 = 1.0 + 0.04;
        let want = (g.sqrt() * std::f64::consts::PI / 2.0).sin().powi(2) / g;
        assert!((p - want).abs() < 1e-12);
        let mut q = 0.0;
        assert_eq!(qflip_flip_probability(seq, 0.0, 0.0, 1e-4, 64, &mut q), QflipStatus::Ok);
        assert!(q < 1.0 - 1e-3);
        qflip_sequence_free(seq);
    }
}

#[test]
fn custom_sequence_and_errors() {
    unsafe {
        let deltas = [0.0, 0.0];
        let durs = [0.5 * std::f64::consts::PI / OMEGA; 2];
        let mut seq = ptr::null_mut();
        assert_eq!(qflip_sequence_new(OMEGA, deltas.as_ptr(), durs.as_ptr(), 2, &mut seq), QflipStatus::Ok);
        let mut p = 0.0;
        qflip_flip_probability(seq, 0.0, 0.0, 0.0, 64, &mut p);
        assert!((p - 1.0).abs() < 1e-12);
        qflip_sequence_free(seq);

        let bad = [-1.0];
        let mut seq = ptr::null_mut();
        let st = qflip_sequence_new(OMEGA, deltas.as_ptr(), bad.as_ptr(), 1, &mut seq);
        assert_eq!(st, QflipStatus::InvalidArgument);
        assert!(seq.is_null());
        assert_eq!(qflip_sequence_new(OMEGA, ptr::null(), bad.as_ptr(), 1, &mut seq), QflipStatus::NullPointer);
        assert_eq!(qflip_pi_pulse(-1.0, &mut seq), QflipStatus::InvalidArgument);
        assert_eq!(qflip_sequence_len(ptr::null()), 0);
        qflip_sequence_free(ptr::null_mut());
    }
}

#[test]
fn policy_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("policy.json");
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    let net = PolicyNetwork::new(Architecture::Shared, 32, 3, &mut rng).unwrap();
    save_checkpoint(&path, &net, "test").unwrap();
    let cpath = CString::new(path.to_str().unwrap()).unwrap();
    unsafe {
        let mut policy = ptr::null_mut();
        assert_eq!(qflip_policy_load(cpath.as_ptr(), &mut policy), QflipStatus::Ok);
        let mut params = QflipEnvParams { omega: 0.0, total_time: 0.0, delta_max: 0.0, n_steps: 0 };
        assert_eq!(qflip_env_params_default(OMEGA, &mut params), QflipStatus::Ok);
        assert_eq!(params.n_steps, 20);
        let mut seq = ptr::null_mut();
        assert_eq!(qflip_policy_rollout(policy, &params, &mut seq), QflipStatus::Ok);
        assert_eq!(qflip_sequence_len(seq), 20);
        let mut total = 0.0;
        for i in 0..20 {
            let (mut d, mut t) = (0.0, 0.0);
            qflip_sequence_step(seq, i, &mut d, &mut t);
            assert!(d.abs() <= params.delta_max);
            total += t;
        }
        assert!((total - params.total_time).abs() < 1e-15);
        qflip_sequence_free(seq);
        qflip_policy_free(policy);

        let missing = CString::new(dir.path().join("nope.json").to_str().unwrap()).unwrap();
        let mut policy = ptr::null_mut();
        assert_eq!(qflip_policy_load(missing.as_ptr(), &mut policy), QflipStatus::Io);
        assert!(last_error().contains("nope.json"));
        assert_eq!(qflip_policy_load(ptr::null(), &mut policy), QflipStatus::NullPointer);
    }
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/qflip.h")).unwrap();
    for f in [
        "qflip_version",
        "qflip_last_error_message",
        "qflip_env_params_default",
        "qflip_sequence_new",
        "qflip_pi_pulse",
        "qflip_sta_design",
        "qflip_sequence_len",
        "qflip_sequence_step",
        "qflip_sequence_free",
        "qflip_flip_probability",
        "qflip_policy_load",
        "qflip_policy_rollout",
        "qflip_policy_free",
    ] {
        assert!(header.contains(&format!("{f}(")), "{f} missing from header");
    }
    assert!(header.contains("QFLIP_STATUS_NULL_POINTER = 4"));
}
