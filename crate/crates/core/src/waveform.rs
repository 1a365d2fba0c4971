//! Compiles a detuning program into the phase-continuous AWG modulation
//! signal `I(t) = A₂ sin φ(t)`.
//!
//! Within segment `n` the phase advances at `(ω₀ − ω_c) + Δ_n` in local time
//! `τ`, starting from the terminal phase of segment `n − 1`.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::dynamics::{PulseSequence, PulseStep};
use crate::error::{Error, Result};

/// Qubit resonance (Hz).
pub const DEFAULT_F0_HZ: f64 = 12.6428e9;
/// Microwave carrier (Hz).
pub const DEFAULT_FC_HZ: f64 = 12.4428e9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    /// Detuning (rad/s).
    pub delta: f64,
    /// Local duration (s).
    pub duration: f64,
    /// Phase at the start of the segment (rad).
    pub phase_offset: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhasePlan {
    pub f0: f64,
    pub fc: f64,
    pub segments: Vec<Segment>,
}

impl PhasePlan {
    /// `ω₀ − ω_c` in rad/s.
    pub fn offset_angular(&self) -> f64 {
        TAU * (self.f0 - self.fc)
    }

    pub fn total_duration(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }

    /// Phase of segment `n` at local time `tau`.
    pub fn segment_phase(&self, n: usize, tau: f64) -> f64 {
        let s = &self.segments[n];
        (self.offset_angular() + s.delta) * tau + s.phase_offset
    }

    /// Phase at absolute time `t`, clamped to the plan's extent.
    pub fn phase_at(&self, t: f64) -> f64 {
        let mut start = 0.0;
        let last = self.segments.len() - 1;
        for (n, s) in self.segments.iter().enumerate() {
            if t < start + s.duration || n == last {
                return self.segment_phase(n, (t - start).clamp(0.0, s.duration));
            }
            start += s.duration;
        }
        unreachable!("plans have at least one segment")
    }

    pub fn max_abs_delta(&self) -> f64 {
        self.segments.iter().map(|s| s.delta.abs()).fold(0.0, f64::max)
    }

    /// Recovers the detuning program at Rabi frequency `omega`.
    pub fn to_sequence(&self, omega: f64) -> Result<PulseSequence> {
        let steps = self
            .segments
            .iter()
            .map(|s| PulseStep::new(s.delta, s.duration))
            .collect::<Result<Vec<_>>>()?;
        PulseSequence::new(omega, steps)
    }
}

pub fn build_phase_plan(seq: &PulseSequence, f0: f64, fc: f64) -> Result<PhasePlan> {
    if !(f0.is_finite() && fc.is_finite() && f0 > fc) {
        return Err(Error::invalid(format!(
            "resonance {f0} Hz must exceed carrier {fc} Hz"
        )));
    }
    seq.validate()?;
    let mut plan = PhasePlan {
        f0,
        fc,
        segments: Vec::with_capacity(seq.len()),
    };
    let mut phase = 0.0;
    for step in &seq.steps {
        plan.segments.push(Segment {
            delta: step.delta,
            duration: step.duration,
            phase_offset: phase,
        });
        phase = plan.segment_phase(plan.segments.len() - 1, step.duration);
    }
    Ok(plan)
}

/// Largest phase jump between the end of one segment and the start of the
/// next.
pub fn verify_continuity(plan: &PhasePlan) -> f64 {
    (1..plan.segments.len())
        .map(|n| {
            let end = plan.segment_phase(n - 1, plan.segments[n - 1].duration);
            (end - plan.segments[n].phase_offset).abs()
        })
        .fold(0.0, f64::max)
}

#[derive(Clone, Debug, PartialEq)]
pub struct WaveformSamples {
    pub sample_rate: f64,
    pub a2: f64,
    pub samples: Vec<f64>,
}

impl WaveformSamples {
    pub fn time(&self, k: usize) -> f64 {
        k as f64 / self.sample_rate
    }
}

/// Lowest admissible sample rate: twice the highest modulation frequency.
pub fn nyquist_rate(plan: &PhasePlan) -> f64 {
    2.0 * (plan.f0 - plan.fc + plan.max_abs_delta() / TAU)
}

pub fn sample_waveform(plan: &PhasePlan, rate: f64, a2: f64) -> Result<WaveformSamples> {
    if plan.segments.is_empty() {
        return Err(Error::invalid("phase plan has no segments"));
    }
    let nyquist = nyquist_rate(plan);
    if !(rate.is_finite() && rate > nyquist) {
        return Err(Error::invalid(format!(
            "sample rate {rate} Hz is not above the Nyquist rate {nyquist} Hz"
        )));
    }
    let total = plan.total_duration();
    // Tolerance keeps an exact product from rounding up to an extra sample.
    let n = (total * rate * (1.0 - 1e-12)).ceil() as usize;
    let mut samples = Vec::with_capacity(n);
    // Walk segments in order instead of searching per sample.
    let mut seg = 0;
    let mut seg_start = 0.0;
    for k in 0..n {
        let t = k as f64 / rate;
        while seg + 1 < plan.segments.len() && t >= seg_start + plan.segments[seg].duration {
            seg_start += plan.segments[seg].duration;
            seg += 1;
        }
        samples.push(a2 * plan.segment_phase(seg, t - seg_start).sin());
    }
    Ok(WaveformSamples {
        sample_rate: rate,
        a2,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const OMEGA: f64 = TAU * 3300.0;

    fn seq(deltas: &[f64], dt: f64) -> PulseSequence {
        PulseSequence::new(
            OMEGA,
            deltas.iter().map(|&d| PulseStep::new(d, dt).unwrap()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn resonant_single_segment() {
        let plan = build_phase_plan(&seq(&[0.0], 1e-6), 2e6, 1e6).unwrap();
        assert_eq!(plan.segments[0].phase_offset, 0.0);
        for t in [0.0, 3e-7, 1e-6] {
            assert!((plan.phase_at(t) - TAU * 1e6 * t).abs() < 1e-12);
        }
        assert_eq!(verify_continuity(&plan), 0.0);
    }

    #[test]
    fn equal_segments_collapse() {
        let d = 0.7 * OMEGA;
        let two = build_phase_plan(&seq(&[d, d], 5e-6), 3e6, 1e6).unwrap();
        let one = build_phase_plan(&seq(&[d], 1e-5), 3e6, 1e6).unwrap();
        for k in 0..=100 {
            let t = k as f64 * 1e-7;
            assert!((two.phase_at(t) - one.phase_at(t)).abs() < 1e-9, "t = {t}");
        }
    }

    #[test]
    fn twenty_segments_are_continuous() {
        let deltas: Vec<f64> = (0..20).map(|i| (i as f64 / 19.0 * 4.0 - 2.0) * OMEGA).collect();
        let plan = build_phase_plan(&seq(&deltas, 15e-6), DEFAULT_F0_HZ, DEFAULT_FC_HZ).unwrap();
        assert!(verify_continuity(&plan) < 1e-9);
        assert_eq!(plan.to_sequence(OMEGA).unwrap(), seq(&deltas, 15e-6));
    }

    #[test]
    fn injected_jump_is_reported() {
        let mut plan = build_phase_plan(&seq(&[0.0, OMEGA, -OMEGA], 1e-6), 2e6, 1e6).unwrap();
        plan.segments[2].phase_offset += 0.25;
        assert!((verify_continuity(&plan) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(build_phase_plan(&seq(&[0.0], 1e-6), 1e6, 1e6).is_err());
        let plan = build_phase_plan(&seq(&[OMEGA], 1e-6), 2e6, 1e6).unwrap();
        assert!(sample_waveform(&plan, 2.0e6, 1.0).is_err());
        assert!(sample_waveform(&plan, 2.1e6, 1.0).is_ok());
    }

    #[test]
    fn amplitude_linearity() {
        let plan = build_phase_plan(&seq(&[0.3 * OMEGA, -OMEGA], 2e-6), 2e6, 1e6).unwrap();
        let a = sample_waveform(&plan, 2e7, 1.0).unwrap();
        let b = sample_waveform(&plan, 2e7, 2.0).unwrap();
        let z = sample_waveform(&plan, 2e7, 0.0).unwrap();
        assert_eq!(a.samples.len(), 80);
        assert!(a.samples.iter().zip(&b.samples).all(|(x, y)| *y == 2.0 * x));
        assert!(z.samples.iter().all(|&x| x == 0.0));
    }
}
