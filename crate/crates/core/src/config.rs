//! Versioned TOML run configuration.
//!
//! Keys carrying physical quantities name their unit (`omega_hz`,
//! `total_time_s`, `delta_max_over_omega`, ...). Unknown keys are rejected.
//! The fingerprint is a SHA-256 digest of the resolved configuration and is
//! written into every output header.

use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bench::{BenchSetup, SweepKind};
use crate::error::{Error, Result};
use crate::measurement::DetectorModel;
use crate::ppo::{PpoHyperparams, Schedule};
use crate::rl_env::{EnvConfig, Phase};
use crate::waveform::{DEFAULT_F0_HZ, DEFAULT_FC_HZ};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub schema_version: u32,
    pub seed: u64,
    pub env: EnvSection,
    pub ppo: PpoHyperparams,
    pub schedule: Schedule,
    pub detector: DetectorModel,
    pub sweep: SweepSection,
    pub feedback: FeedbackSection,
    pub waveform: WaveformSection,
    pub output: OutputSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            schema_version: SCHEMA_VERSION,
            seed: 0,
            env: EnvSection::default(),
            ppo: PpoHyperparams::default(),
            schedule: Schedule::default(),
            detector: DetectorModel::default(),
            sweep: SweepSection::default(),
            feedback: FeedbackSection::default(),
            waveform: WaveformSection::default(),
            output: OutputSection::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvSection {
    /// Rabi frequency Ω/2π.
    pub omega_hz: f64,
    pub n_steps: usize,
    pub total_time_s: f64,
    pub delta_max_over_omega: f64,
    pub rabi_error_half_width: f64,
    /// In units of Ω.
    pub detuning_error_half_width: f64,
    pub t2_s: Option<f64>,
    pub success_threshold: f64,
    pub terminal_bonus: f64,
    pub substeps: usize,
}

impl Default for EnvSection {
    fn default() -> Self {
        let e = EnvConfig::default();
        EnvSection {
            omega_hz: 3300.0,
            n_steps: e.n_steps,
            total_time_s: e.total_time,
            delta_max_over_omega: 2.0,
            rabi_error_half_width: e.rabi_error_half_width,
            detuning_error_half_width: e.detuning_error_half_width,
            t2_s: e.t2,
            success_threshold: e.success_threshold,
            terminal_bonus: e.terminal_bonus,
            substeps: e.substeps,
        }
    }
}

impl EnvSection {
    pub fn omega(&self) -> f64 {
        TAU * self.omega_hz
    }

    pub fn to_env_config(&self) -> Result<EnvConfig> {
        let omega = self.omega();
        let cfg = EnvConfig {
            n_steps: self.n_steps,
            omega,
            total_time: self.total_time_s,
            delta_max: self.delta_max_over_omega * omega,
            phase: Phase::Pretrain,
            rabi_error_half_width: self.rabi_error_half_width,
            detuning_error_half_width: self.detuning_error_half_width,
            t2: self.t2_s,
            success_threshold: self.success_threshold,
            terminal_bonus: self.terminal_bonus,
            substeps: self.substeps,
        };
        cfg.validate().map_err(|e| Error::Config(format!("[env]: {e}")))?;
        Ok(cfg)
    }
}

/// A grid given either as explicit values or as an inclusive linear range.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    Values(Vec<f64>),
    Linspace { start: f64, stop: f64, points: usize },
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Grid::Values(v) => v.clone(),
            Grid::Linspace { start, stop, points } => match points {
                0 => Vec::new(),
                1 => vec![*start],
                n => (0..*n)
                    .map(|i| start + (stop - start) * i as f64 / (n - 1) as f64)
                    .collect(),
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub kind: SweepKind,
    pub methods: Vec<String>,
    /// Relative Rabi error for 1-D Rabi sweeps and the first hybrid axis;
    /// detuning error in units of Ω for 1-D detuning sweeps; time factors or
    /// repetition counts for dephasing sweeps.
    pub grid: Grid,
    /// Second hybrid axis (detuning error, units of Ω).
    pub grid_delta: Grid,
    /// Readouts per point; absent means exact probabilities.
    pub shots: Option<u64>,
    pub t2_s: Option<f64>,
    pub sta_steps: usize,
    pub checkpoint: Option<PathBuf>,
}

impl Default for SweepSection {
    fn default() -> Self {
        let grid = Grid::Linspace {
            start: -0.2,
            stop: 0.2,
            points: 41,
        };
        SweepSection {
            kind: SweepKind::RabiError,
            methods: vec!["pi".into(), "sta-detuning".into(), "sta-rabi".into()],
            grid: grid.clone(),
            grid_delta: grid,
            shots: None,
            t2_s: None,
            sta_steps: 200,
            checkpoint: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeedbackSection {
    /// Readouts per cycle; absent means exact `⟨σz⟩`.
    pub shots: Option<u64>,
    pub rabi_error: f64,
    /// In units of Ω.
    pub detuning_error: f64,
    pub checkpoint: Option<PathBuf>,
}

impl Default for FeedbackSection {
    fn default() -> Self {
        FeedbackSection {
            shots: Some(2000),
            rabi_error: 0.0,
            detuning_error: 0.0,
            checkpoint: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WaveformSection {
    pub f0_hz: f64,
    pub fc_hz: f64,
    pub sample_rate_hz: f64,
    pub a2: f64,
}

impl Default for WaveformSection {
    fn default() -> Self {
        WaveformSection {
            f0_hz: DEFAULT_F0_HZ,
            fc_hz: DEFAULT_FC_HZ,
            sample_rate_hz: 1.0e9,
            a2: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub svg: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: PathBuf::from("out"),
            svg: false,
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        RunConfig::from_toml_str(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("configuration is always representable as TOML")
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        self.env.to_env_config()?;
        self.ppo.validate().map_err(|e| Error::Config(format!("[ppo]: {e}")))?;
        self.detector
            .validate()
            .map_err(|e| Error::Config(format!("[detector]: {e}")))?;
        Ok(())
    }

    pub fn env_config(&self) -> Result<EnvConfig> {
        self.env.to_env_config()
    }

    pub fn bench_setup(&self) -> Result<BenchSetup> {
        let mut setup = BenchSetup::new(self.env_config()?);
        setup.sta_steps = self.sweep.sta_steps;
        Ok(setup)
    }

    /// Hex SHA-256 of the canonical JSON form of the resolved configuration.
    pub fn fingerprint(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("configuration serializes");
        let digest = Sha256::digest(&canonical);
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}
