use std::path::Path;
use std::process::{Command, Output};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use qflip::io::read_pulse_csv;
use qflip::ppo::{load_checkpoint, PolicyNetwork};

fn qflip(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qflip"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = qflip(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn value<'a>(stdout: &'a str, key: &str) -> &'a str {
    stdout
        .lines()
        .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix(": ")))
        .unwrap_or_else(|| panic!("{key} missing from {stdout}"))
}

fn data_rows(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(str::to_owned)
        .collect()
}

#[test]
fn sta_design_reports_the_solved_ansatz() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(dir.path(), &["sta-design", "--channel", "detuning", "--out", "d.csv"]);
    let a: f64 = value(&out, "a").parse().unwrap();
    assert!((a - 0.6042).abs() < 1e-3, "{a}");
    let t: f64 = value(&out, "duration_s").parse().unwrap();
    assert!((t - 367.42e-6).abs() < 0.01e-6, "{t}");

    // Doubling Ω halves the duration.
    let out2 = ok(
        dir.path(),
        &["sta-design", "--channel", "rabi", "--omega-hz", "6600", "--n-steps", "40", "--out", "r.csv"],
    );
    let t2: f64 = value(&out2, "duration_s").parse().unwrap();
    assert!((t2 - 295.64e-6 / 2.0).abs() < 0.01e-6, "{t2}");
    let (seq, header) = read_pulse_csv(&dir.path().join("r.csv"), None).unwrap();
    assert_eq!(seq.len(), 40);
    assert_eq!(header.get("config_fingerprint").map(str::len), Some(64));
}

#[test]
fn sweeps_are_reproducible_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let args = |out: &'static str, seed: &'static str| {
        vec![
            "sweep", "--seed", seed, "--kind", "hybrid", "--method", "pi", "--method", "sta-rabi", "--shots", "200",
            "--grid", "-0.1,0,0.1", "--grid-delta", "-0.1,0.1", "--out", out,
        ]
    };
    ok(dir.path(), &args("a.csv", "7"));
    ok(dir.path(), &args("b.csv", "7"));
    ok(dir.path(), &args("c.csv", "8"));
    let read = |f: &str| std::fs::read(dir.path().join(f)).unwrap();
    assert_eq!(read("a.csv"), read("b.csv"));
    assert_ne!(read("a.csv"), read("c.csv"));
    assert_eq!(data_rows(&dir.path().join("a.csv")).len(), 2 * 3 * 2);
}

#[test]
fn sweep_writes_svg_and_defaults_to_output_dir() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["sweep", "--kind", "detuning-error", "--grid", "-0.2,0,0.2", "--svg"]);
    let csv = dir.path().join("out/sweep.csv");
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("# schema: qflip-sweep/1\n# config_fingerprint: "));
    assert_eq!(data_rows(&csv).len(), 3 * 3);
    let svg = std::fs::read_to_string(dir.path().join("out/sweep.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
}

#[test]
fn config_file_and_flags_combine() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("run.toml"),
        "seed = 3\n[sweep]\nkind = \"rabi-error\"\nmethods = [\"pi\"]\ngrid = { start = -0.1, stop = 0.1, points = 5 }\n",
    )
    .unwrap();
    let out = ok(dir.path(), &["--config", "run.toml", "sweep", "--out", "s.csv"]);
    assert!(out.contains("pi: p_hat range"));
    assert_eq!(data_rows(&dir.path().join("s.csv")).len(), 5);

    std::fs::write(dir.path().join("bad.toml"), "[sweep]\ngrdi = [0.1]\n").unwrap();
    let bad = qflip(dir.path(), &["--config", "bad.toml", "sweep"]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("grdi"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let code = |args: &[&str]| qflip(dir.path(), args).status.code();
    assert_eq!(code(&["--help"]), Some(0));
    assert_eq!(code(&["frobnicate"]), Some(1));
    assert_eq!(code(&["sta-design"]), Some(1));
    assert_eq!(code(&["sweep", "--method", "drl"]), Some(1));
    assert_eq!(code(&["sweep", "--method", "warp"]), Some(1));
    assert_eq!(code(&["sweep", "--kind", "rabi-time"]), Some(1));
    assert_eq!(code(&["--config", "absent.toml", "sweep"]), Some(3));
    assert_eq!(code(&["feedback", "--checkpoint", "absent.json"]), Some(3));
    assert_eq!(code(&["waveform", "--pulse", "absent.csv"]), Some(3));

    let missing = qflip(dir.path(), &["feedback"]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("checkpoint"));
}

#[test]
fn malformed_pulse_reports_row() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("p.csv"),
        "# schema: qflip-pulse/1\n# omega_rad_s: 20734.5\nstep_index,delta_over_omega,duration_s\n1,0.5,1e-5\n2,abc,1e-5\n",
    )
    .unwrap();
    let out = qflip(dir.path(), &["waveform", "--pulse", "p.csv"]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("row 5"), "{err}");
    assert!(err.contains("delta_over_omega"), "{err}");
}

#[test]
fn waveform_from_designed_pulse_is_continuous() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["sta-design", "--channel", "rabi", "--n-steps", "20", "--out", "p.csv"]);
    let out = ok(
        dir.path(),
        &["waveform", "--pulse", "p.csv", "--rate-hz", "1e9", "--out", "w.csv", "--plan-out", "plan.csv"],
    );
    assert_eq!(value(&out, "segments"), "20");
    let jump: f64 = value(&out, "max_phase_jump_rad").parse().unwrap();
    assert!(jump < 1e-9);
    assert_eq!(data_rows(&dir.path().join("plan.csv")).len(), 20);
    let samples: usize = value(&out, "samples").parse().unwrap();
    assert_eq!(data_rows(&dir.path().join("w.csv")).len(), samples);
}

#[test]
fn zero_episode_training_saves_the_initial_network() {
    let dir = tempfile::tempdir().unwrap();
    ok(
        dir.path(),
        &[
            "train", "--seed", "5", "--pretrain-episodes", "0", "--finetune-episodes", "0", "--out-checkpoint",
            "p.json",
        ],
    );
    let (net, _) = load_checkpoint(&dir.path().join("p.json")).unwrap();
    let fresh = PolicyNetwork::standard(&mut ChaCha8Rng::seed_from_u64(5));
    assert_eq!(net.params(), fresh.params());
    assert!(data_rows(&dir.path().join("p.curve.csv")).is_empty());
}

#[test]
fn training_is_byte_reproducible_and_feeds_feedback() {
    let dir = tempfile::tempdir().unwrap();
    let train = |name: &str| {
        ok(
            dir.path(),
            &[
                "train", "--seed", "9", "--threads", "2", "--pretrain-episodes", "48", "--finetune-episodes", "32",
                "--out-checkpoint", name,
            ],
        )
    };
    train("a.json");
    train("b.json");
    let read = |f: &str| std::fs::read(dir.path().join(f)).unwrap();
    assert_eq!(read("a.json"), read("b.json"));
    assert_eq!(read("a.curve.csv"), read("b.curve.csv"));
    assert_eq!(data_rows(&dir.path().join("a.curve.csv")).len(), 5);

    let out = ok(
        dir.path(),
        &[
            "feedback", "--checkpoint", "a.json", "--exact", "--rabi-error", "0.05", "--detuning-error", "-0.05",
            "--out", "f.csv", "--pulse-out", "fp.csv",
        ],
    );
    assert_eq!(value(&out, "cycles"), "20");
    assert_eq!(value(&out, "identical_to_open_loop"), "true");
    assert_eq!(value(&out, "final_probability"), value(&out, "open_loop_probability"));
    assert_eq!(data_rows(&dir.path().join("f.csv")).len(), 20);
    let (seq, _) = read_pulse_csv(&dir.path().join("fp.csv"), None).unwrap();
    assert_eq!(seq.len(), 20);
}
