//! Robust single-qubit flip pulses.
//!
//! Three ways to take a driven qubit from `|0⟩` to `|1⟩` are designed and
//! compared here: the resonant π pulse, invariant-based analog detuning
//! sweeps ([`sta`]) and 20-step digital detuning programs learned with PPO
//! ([`rl_env`], [`ppo`]). [`bench`] runs the robustness sweeps,
//! [`measurement`] adds photon-count readout statistics and [`waveform`]
//! compiles a program into the phase-modulated AWG signal.

pub mod bench;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod io;
pub mod measurement;
pub mod ppo;
pub mod quadrature;
pub mod rl_env;
pub mod sta;
pub mod waveform;

pub use dynamics::{ErrorModel, PulseSequence, PulseStep, QubitState};
pub use error::{Error, Result};
