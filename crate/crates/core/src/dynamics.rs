//! Driven two-level system under piecewise-constant detuning control.
//!
//! The Hamiltonian is `H = (Ω σx + Δ(t) σz) / 2` (ħ = 1, angular units).
//! Basis ordering is `[|0⟩, |1⟩]` with `σz |1⟩ = +|1⟩`, so
//! `σz = diag(-1, +1)` and a completed flip has `⟨σz⟩ = +1`.
//!
//! Noiseless evolution uses the exact 2×2 propagator. Dephasing uses a
//! fixed-step RK4 integration of the master equation with a single `σz`
//! collapse channel.

use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Default RK4 substeps per pulse interval for the dephasing integrator.
pub const DEFAULT_SUBSTEPS: usize = 64;

/// Trace drift tolerated by [`evolve_lindblad`] before it reports failure.
pub const TRACE_DRIFT_LIMIT: f64 = 1e-8;

/// Dense 2×2 complex matrix, row major.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat2(pub [[Complex64; 2]; 2]);

impl Mat2 {
    pub const fn identity() -> Self {
        Mat2([[ONE, ZERO], [ZERO, ONE]])
    }

    pub const fn zeros() -> Self {
        Mat2([[ZERO, ZERO], [ZERO, ZERO]])
    }

    pub fn sigma_x() -> Self {
        Mat2([[ZERO, ONE], [ONE, ZERO]])
    }

    pub fn sigma_y() -> Self {
        Mat2([[ZERO, -I], [I, ZERO]])
    }

    /// `σz` in the `[|0⟩, |1⟩]` basis with `σz|1⟩ = +|1⟩`.
    pub fn sigma_z() -> Self {
        Mat2([[-ONE, ZERO], [ZERO, ONE]])
    }

    pub fn dagger(&self) -> Self {
        let m = &self.0;
        Mat2([
            [m[0][0].conj(), m[1][0].conj()],
            [m[0][1].conj(), m[1][1].conj()],
        ])
    }

    pub fn trace(&self) -> Complex64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn det(&self) -> Complex64 {
        self.0[0][0] * self.0[1][1] - self.0[0][1] * self.0[1][0]
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let m = &self.0;
        Mat2([[m[0][0] * s, m[0][1] * s], [m[1][0] * s, m[1][1] * s]])
    }

    /// Largest elementwise modulus.
    pub fn max_abs(&self) -> f64 {
        self.0
            .iter()
            .flatten()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

impl Mul for Mat2 {
    type Output = Mat2;

    fn mul(self, rhs: Mat2) -> Mat2 {
        let a = &self.0;
        let b = &rhs.0;
        Mat2([
            [
                a[0][0] * b[0][0] + a[0][1] * b[1][0],
                a[0][0] * b[0][1] + a[0][1] * b[1][1],
            ],
            [
                a[1][0] * b[0][0] + a[1][1] * b[1][0],
                a[1][0] * b[0][1] + a[1][1] * b[1][1],
            ],
        ])
    }
}

impl Add for Mat2 {
    type Output = Mat2;

    fn add(self, rhs: Mat2) -> Mat2 {
        let mut out = self;
        for r in 0..2 {
            for c in 0..2 {
                out.0[r][c] += rhs.0[r][c];
            }
        }
        out
    }
}

impl Sub for Mat2 {
    type Output = Mat2;

    fn sub(self, rhs: Mat2) -> Mat2 {
        let mut out = self;
        for r in 0..2 {
            for c in 0..2 {
                out.0[r][c] -= rhs.0[r][c];
            }
        }
        out
    }
}

/// Density matrix of the qubit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QubitState {
    rho: Mat2,
}

impl QubitState {
    /// `|0⟩⟨0|`, the prepared state.
    pub fn ground() -> Self {
        QubitState {
            rho: Mat2([[ONE, ZERO], [ZERO, ZERO]]),
        }
    }

    /// `|1⟩⟨1|`, the flip target.
    pub fn excited() -> Self {
        QubitState {
            rho: Mat2([[ZERO, ZERO], [ZERO, ONE]]),
        }
    }

    pub fn maximally_mixed() -> Self {
        QubitState {
            rho: Mat2([[ONE * 0.5, ZERO], [ZERO, ONE * 0.5]]),
        }
    }

    /// Pure state `c0|0⟩ + c1|1⟩`; the amplitudes are normalized here.
    pub fn from_amplitudes(c0: Complex64, c1: Complex64) -> Result<Self> {
        let norm = (c0.norm_sqr() + c1.norm_sqr()).sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::invalid("state amplitudes must be finite and non-zero"));
        }
        let (a, b) = (c0 / norm, c1 / norm);
        Ok(QubitState {
            rho: Mat2([[a * a.conj(), a * b.conj()], [b * a.conj(), b * b.conj()]]),
        })
    }

    /// Validates trace, hermiticity and positivity before wrapping `rho`.
    pub fn from_matrix(rho: Mat2) -> Result<Self> {
        let state = QubitState { rho };
        state.check()?;
        Ok(state)
    }

    pub fn rho(&self) -> &Mat2 {
        &self.rho
    }

    /// Checks the density-matrix invariants.
    pub fn check(&self) -> Result<()> {
        if !self.rho.is_finite() {
            return Err(Error::numerical("density matrix has non-finite entries"));
        }
        let tr = self.rho.trace();
        if (tr - ONE).norm() > 1e-12 {
            return Err(Error::numerical(format!("trace {tr} differs from 1")));
        }
        let herm = (self.rho - self.rho.dagger()).max_abs();
        if herm > 1e-12 {
            return Err(Error::numerical(format!("density matrix not Hermitian ({herm:e})")));
        }
        let (lo, hi) = self.eigenvalues();
        if lo < -1e-10 || hi > 1.0 + 1e-10 {
            return Err(Error::numerical(format!(
                "eigenvalues ({lo}, {hi}) outside [0, 1]"
            )));
        }
        Ok(())
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let m = &self.rho.0;
        let a = m[0][0].re;
        let d = m[1][1].re;
        let b = 0.5 * (m[0][1] + m[1][0].conj());
        let mean = 0.5 * (a + d);
        let r = (0.25 * (a - d).powi(2) + b.norm_sqr()).sqrt();
        (mean - r, mean + r)
    }

    /// Bloch vector `(⟨σx⟩, ⟨σy⟩, ⟨σz⟩)`.
    pub fn bloch(&self) -> [f64; 3] {
        let m = &self.rho.0;
        [
            2.0 * m[0][1].re,
            -2.0 * m[0][1].im,
            (m[1][1] - m[0][0]).re,
        ]
    }

    fn conjugate_by(&self, u: &Mat2) -> QubitState {
        QubitState {
            rho: *u * self.rho * u.dagger(),
        }
    }
}

/// One piecewise-constant control interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseStep {
    /// Detuning in rad/s.
    pub delta: f64,
    /// Duration in seconds.
    pub duration: f64,
}

impl PulseStep {
    pub fn new(delta: f64, duration: f64) -> Result<Self> {
        let step = PulseStep { delta, duration };
        step.check()?;
        Ok(step)
    }

    fn check(&self) -> Result<()> {
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(Error::invalid(format!(
                "pulse step duration must be positive, got {}",
                self.duration
            )));
        }
        if !self.delta.is_finite() {
            return Err(Error::invalid("pulse step detuning must be finite"));
        }
        Ok(())
    }
}

/// A fixed-amplitude drive with a stepped detuning program.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseSequence {
    /// Nominal Rabi frequency in rad/s.
    pub omega: f64,
    pub steps: Vec<PulseStep>,
}

impl PulseSequence {
    pub fn new(omega: f64, steps: Vec<PulseStep>) -> Result<Self> {
        let seq = PulseSequence { omega, steps };
        seq.validate()?;
        Ok(seq)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega.is_finite() && self.omega > 0.0) {
            return Err(Error::invalid(format!(
                "Rabi frequency must be positive, got {}",
                self.omega
            )));
        }
        if self.steps.is_empty() {
            return Err(Error::invalid("pulse sequence has no steps"));
        }
        self.steps.iter().try_for_each(PulseStep::check)
    }

    pub fn total_duration(&self) -> f64 {
        self.steps.iter().map(|s| s.duration).sum()
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Same detuning program repeated `times` times back to back.
    pub fn repeated(&self, times: usize) -> PulseSequence {
        let mut steps = Vec::with_capacity(self.steps.len() * times);
        for _ in 0..times {
            steps.extend_from_slice(&self.steps);
        }
        PulseSequence {
            omega: self.omega,
            steps,
        }
    }

    /// Stretches the program in time by `factor` while lowering Ω and every
    /// detuning by the same factor, so the dimensionless shape is unchanged.
    pub fn time_scaled(&self, factor: f64) -> PulseSequence {
        PulseSequence {
            omega: self.omega / factor,
            steps: self
                .steps
                .iter()
                .map(|s| PulseStep {
                    delta: s.delta / factor,
                    duration: s.duration * factor,
                })
                .collect(),
        }
    }
}

/// Systematic control errors plus optional pure dephasing.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorModel {
    /// Relative Rabi error: Ω → Ω(1 + δ_Ω).
    pub delta_omega: f64,
    /// Detuning offset in units of the nominal Ω: Δ → Δ + δ_Δ Ω.
    pub delta_delta: f64,
    /// Coherence time in seconds; `None` means no dephasing.
    pub t2: Option<f64>,
}

impl ErrorModel {
    pub fn none() -> Self {
        ErrorModel::default()
    }

    pub fn systematic(delta_omega: f64, delta_delta: f64) -> Self {
        ErrorModel {
            delta_omega,
            delta_delta,
            t2: None,
        }
    }

    pub fn with_t2(mut self, t2: Option<f64>) -> Self {
        self.t2 = t2;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta_omega.is_finite() && self.delta_delta.is_finite()) {
            return Err(Error::invalid("systematic errors must be finite"));
        }
        match self.t2 {
            Some(t2) if !(t2.is_finite() && t2 > 0.0) => Err(Error::invalid(format!(
                "dephasing time must be positive, got {t2}"
            ))),
            _ => Ok(()),
        }
    }

    fn applied(&self, omega: f64, delta: f64) -> (f64, f64) {
        (
            omega * (1.0 + self.delta_omega),
            delta + self.delta_delta * omega,
        )
    }
}

/// Exact propagator `exp(-i H dt)` for constant Ω and Δ.
///
/// `U = cos φ I − i sin φ (n̂·σ)` with `φ = dt √(Ω²+Δ²) / 2` and
/// `n̂ = (Ω, 0, Δ) / √(Ω²+Δ²)`.
pub fn step_unitary(omega: f64, delta: f64, dt: f64) -> Mat2 {
    let w = omega.hypot(delta);
    if w == 0.0 || dt == 0.0 {
        return Mat2::identity();
    }
    let phi = 0.5 * w * dt;
    let (s, c) = phi.sin_cos();
    let nx = omega / w;
    let nz = delta / w;
    // n̂·σ = [[-nz, nx], [nx, nz]] with σz = diag(-1, 1)
    Mat2([
        [Complex64::new(c, s * nz), Complex64::new(0.0, -s * nx)],
        [Complex64::new(0.0, -s * nx), Complex64::new(c, -s * nz)],
    ])
}

/// Ordered product of the step propagators for `seq` under `err`
/// (dephasing ignored).
pub fn sequence_unitary(seq: &PulseSequence, err: &ErrorModel) -> Mat2 {
    seq.steps.iter().fold(Mat2::identity(), |acc, step| {
        let (om, de) = err.applied(seq.omega, step.delta);
        step_unitary(om, de, step.duration) * acc
    })
}

/// Noiseless evolution. Rejects error models that carry a dephasing time.
pub fn evolve_unitary(
    state: &QubitState,
    seq: &PulseSequence,
    err: &ErrorModel,
) -> Result<QubitState> {
    seq.validate()?;
    err.validate()?;
    if err.t2.is_some() {
        return Err(Error::invalid(
            "evolve_unitary is the noiseless path; use evolve_lindblad when t2 is set",
        ));
    }
    Ok(state.conjugate_by(&sequence_unitary(seq, err)))
}

fn hamiltonian(omega: f64, delta: f64) -> Mat2 {
    let h = 0.5;
    Mat2([
        [Complex64::new(-h * delta, 0.0), Complex64::new(h * omega, 0.0)],
        [Complex64::new(h * omega, 0.0), Complex64::new(h * delta, 0.0)],
    ])
}

/// Right-hand side of the dephasing master equation.
fn lindblad_rhs(h: &Mat2, gamma: f64, rho: &Mat2) -> Mat2 {
    let comm = *h * *rho - *rho * *h;
    let m = &rho.0;
    // σz ρ σz − ρ leaves the diagonal alone and doubles-out the coherences.
    let dephase = Mat2([[ZERO, m[0][1] * (-2.0)], [m[1][0] * (-2.0), ZERO]]);
    comm.scale(-I) + dephase.scale(Complex64::new(gamma, 0.0))
}

fn rk4_interval(rho: Mat2, h: &Mat2, gamma: f64, duration: f64, substeps: usize) -> Mat2 {
    let dt = duration / substeps as f64;
    let half = Complex64::new(0.5 * dt, 0.0);
    let full = Complex64::new(dt, 0.0);
    let sixth = Complex64::new(dt / 6.0, 0.0);
    let mut rho = rho;
    for _ in 0..substeps {
        let k1 = lindblad_rhs(h, gamma, &rho);
        let k2 = lindblad_rhs(h, gamma, &(rho + k1.scale(half)));
        let k3 = lindblad_rhs(h, gamma, &(rho + k2.scale(half)));
        let k4 = lindblad_rhs(h, gamma, &(rho + k3.scale(full)));
        let two = Complex64::new(2.0, 0.0);
        rho = rho + (k1 + k2.scale(two) + k3.scale(two) + k4).scale(sixth);
    }
    rho
}

/// Dephasing evolution `dρ/dt = −i[H, ρ] + γ(σz ρ σz − ρ)`, `γ = 1/(2 T2)`,
/// integrated with `substeps_per_pulse` RK4 steps per pulse interval.
pub fn evolve_lindblad(
    state: &QubitState,
    seq: &PulseSequence,
    err: &ErrorModel,
    substeps_per_pulse: usize,
) -> Result<QubitState> {
    seq.validate()?;
    err.validate()?;
    let t2 = err
        .t2
        .ok_or_else(|| Error::invalid("evolve_lindblad requires a dephasing time t2"))?;
    if substeps_per_pulse == 0 {
        return Err(Error::invalid("substeps_per_pulse must be at least 1"));
    }
    let gamma = 0.5 / t2;
    let mut rho = state.rho;
    for step in &seq.steps {
        let (om, de) = err.applied(seq.omega, step.delta);
        rho = rk4_interval(rho, &hamiltonian(om, de), gamma, step.duration, substeps_per_pulse);
    }
    finish_lindblad(rho)
}

fn finish_lindblad(rho: Mat2) -> Result<QubitState> {
    if !rho.is_finite() {
        return Err(Error::numerical("master-equation integration diverged"));
    }
    let drift = (rho.trace() - ONE).norm();
    if drift > TRACE_DRIFT_LIMIT {
        return Err(Error::numerical(format!(
            "trace drifted by {drift:e} during master-equation integration"
        )));
    }
    // Remove round-off so the returned state satisfies the strict invariants.
    let mut m = rho.0;
    let herm_off = 0.5 * (m[0][1] + m[1][0].conj());
    m[0][1] = herm_off;
    m[1][0] = herm_off.conj();
    let tr = m[0][0].re + m[1][1].re;
    m[0][0] = Complex64::new(m[0][0].re / tr, 0.0);
    m[1][1] = Complex64::new(m[1][1].re / tr, 0.0);
    Ok(QubitState { rho: Mat2(m) })
}

/// Dispatches to the exact path when `err.t2` is absent and to the RK4
/// master-equation path otherwise.
pub fn evolve(
    state: &QubitState,
    seq: &PulseSequence,
    err: &ErrorModel,
    substeps_per_pulse: usize,
) -> Result<QubitState> {
    if err.t2.is_some() {
        evolve_lindblad(state, seq, err, substeps_per_pulse)
    } else {
        evolve_unitary(state, seq, err)
    }
}

/// Evolves through a single interval at nominal Rabi frequency `omega`.
pub fn evolve_step(
    state: &QubitState,
    omega: f64,
    step: &PulseStep,
    err: &ErrorModel,
    substeps_per_pulse: usize,
) -> Result<QubitState> {
    let seq = PulseSequence::new(omega, vec![*step])?;
    evolve(state, &seq, err, substeps_per_pulse)
}

/// `tr(ρ σz)`.
pub fn expectation_z(state: &QubitState) -> f64 {
    (state.rho.0[1][1] - state.rho.0[0][0]).re
}

/// Population of `|1⟩`.
pub fn flip_probability(state: &QubitState) -> f64 {
    state.rho.0[1][1].re.clamp(0.0, 1.0)
}
