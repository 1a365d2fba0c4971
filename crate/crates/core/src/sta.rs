//! Invariant-based inverse engineering of a robust detuning sweep.
//!
//! The polar angle of the invariant eigenstate follows
//!
//! ```text
//! θ(s) = (ΩT/a) [ a s − (π²/2)(1−s)² + (π²/3)(1−s)³ + cos(πs) + A ],   s = t/T
//! A = π²/6 − 1,   T = πa / ((a + π²/6 − 2) Ω)
//! ```
//!
//! The three polynomial coefficients follow from θ(0) = 0, θ̇(0) = Ω and
//! θ̈(0) = 0; the conditions at t = T then hold by symmetry and fix T.
//! Eliminating the azimuth β from the auxiliary equations
//! (θ̇ = −Ω sin β, β̇ = −Ω cot θ cos β + Δ) with cos β = +√(1 − (θ̇/Ω)²) gives
//!
//! ```text
//! Δ(t) = −θ̈ / (Ω cos β) + Ω cot θ cos β
//! ```
//!
//! and the invariant phase `γ₊ = ½∫ θ̇ cot β / sin θ dt = −(Ω/2)∫ cos β / sin θ dt`.
//! Both `cos β` and `sin θ` vanish at the endpoints; their ratio tends to
//! `(π/ΩT)√(2/a)` there.
//!
//! Populations are invariant under a global sign flip of Δ(t), so the sign
//! printed by the formula above is used as is.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{PulseSequence, PulseStep};
use crate::error::{Error, Result};
use crate::quadrature::{integrate, QuadOptions};

const PI2: f64 = PI * PI;

/// `A = π²/6 − 1`.
pub const ANSATZ_OFFSET: f64 = PI2 / 6.0 - 1.0;

/// Lower bound of the `a` range where the duration formula is positive.
pub const A_POLE: f64 = 2.0 - PI2 / 6.0;

/// Endpoint offset (fraction of T) inside which integrands use their limits.
pub const ENDPOINT_OFFSET: f64 = 1e-6;

/// Largest refined residual accepted as an error-cancelling root.
pub const ROOT_TOLERANCE: f64 = 1e-3;

/// Which systematic error the free parameter is tuned against.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorChannel {
    /// Static detuning offset δ_Δ.
    Detuning,
    /// Relative Rabi-frequency error δ_Ω.
    Rabi,
}

impl fmt::Display for ErrorChannel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ErrorChannel::Detuning => "detuning",
            ErrorChannel::Rabi => "rabi",
        })
    }
}

impl FromStr for ErrorChannel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "detuning" | "delta" => Ok(ErrorChannel::Detuning),
            "rabi" | "omega" => Ok(ErrorChannel::Rabi),
            other => Err(Error::invalid(format!(
                "unknown error channel `{other}` (expected detuning or rabi)"
            ))),
        }
    }
}

/// θ and its time derivatives at one instant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThetaPoint {
    pub theta: f64,
    pub theta_dot: f64,
    pub theta_ddot: f64,
}

/// Total duration of the protocol for parameter `a`.
pub fn duration(a: f64, omega: f64) -> Result<f64> {
    if !(omega.is_finite() && omega > 0.0) {
        return Err(Error::invalid(format!("Rabi frequency must be positive, got {omega}")));
    }
    let denom = a + PI2 / 6.0 - 2.0;
    if !(a.is_finite() && denom > 0.0) {
        return Err(Error::invalid(format!(
            "ansatz parameter a = {a} gives a non-positive duration (need a > {A_POLE:.6})"
        )));
    }
    Ok(PI * a / (denom * omega))
}

// Bracketed polynomial-plus-cosine profile and its s-derivatives.
fn bracket(a: f64, s: f64) -> f64 {
    let u = 1.0 - s;
    a * s - 0.5 * PI2 * u * u + PI2 / 3.0 * u * u * u + (PI * s).cos() + ANSATZ_OFFSET
}

fn bracket_d1(a: f64, s: f64) -> f64 {
    a + PI2 * s * (1.0 - s) - PI * (PI * s).sin()
}

fn bracket_d2(s: f64) -> f64 {
    -PI2 + 2.0 * PI2 * (1.0 - s) - PI2 * (PI * s).cos()
}

/// `q = 1 − θ̇/Ω`, evaluated without subtracting nearly equal numbers at the
/// leading order.
fn one_minus_rate(a: f64, s: f64) -> f64 {
    (PI * (PI * s).sin() - PI2 * s * (1.0 - s)) / a
}

/// The θ ansatz for one value of the free parameter.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StaAnsatz {
    a: f64,
    omega: f64,
    duration: f64,
}

impl StaAnsatz {
    pub fn new(a: f64, omega: f64) -> Result<Self> {
        let duration = duration(a, omega)?;
        Ok(StaAnsatz { a, omega, duration })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    /// Protocol duration T in seconds.
    pub fn duration(&self) -> f64 {
        self.duration
    }

    /// θ, θ̇ and θ̈ at dimensionless time `s ∈ [0, 1]`.
    pub fn theta(&self, s: f64) -> Result<ThetaPoint> {
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::invalid(format!("s = {s} outside [0, 1]")));
        }
        Ok(self.theta_unchecked(s))
    }

    fn theta_unchecked(&self, s: f64) -> ThetaPoint {
        let scale = self.omega / self.a;
        ThetaPoint {
            theta: scale * self.duration * bracket(self.a, s),
            theta_dot: scale * bracket_d1(self.a, s),
            theta_ddot: scale / self.duration * bracket_d2(s),
        }
    }

    /// `cos β = √(1 − (θ̇/Ω)²)`; fails where the radicand is negative.
    fn cos_beta(&self, s: f64) -> Result<f64> {
        let q = one_minus_rate(self.a, s);
        let radicand = q * (2.0 - q);
        if radicand < -1e-12 {
            return Err(Error::numerical(format!(
                "1 − (θ̇/Ω)² = {radicand:e} < 0 at s = {s} for a = {}",
                self.a
            )));
        }
        Ok(radicand.max(0.0).sqrt())
    }

    /// Limit of `cos β / sin θ` at either endpoint.
    fn endpoint_ratio(&self) -> f64 {
        PI / (self.omega * self.duration) * (2.0 / self.a).sqrt()
    }

    /// Checks that θ stays strictly inside (0, π) and θ̇ ≥ −Ω over the open
    /// interval, which the inverse-engineered detuning needs to be finite.
    pub fn check_physical(&self) -> Result<()> {
        const SAMPLES: usize = 4000;
        for k in 1..SAMPLES {
            let s = k as f64 / SAMPLES as f64;
            let th = self.theta_unchecked(s).theta;
            if !(th > 0.0 && th < PI) {
                return Err(Error::numerical(format!(
                    "θ(s = {s}) = {th} leaves (0, π) for a = {}",
                    self.a
                )));
            }
            self.cos_beta(s)?;
        }
        Ok(())
    }

    fn s_of(&self, t: f64) -> Result<f64> {
        if !t.is_finite() || t < 0.0 || t > self.duration {
            return Err(Error::invalid(format!(
                "t = {t} outside [0, T = {}]",
                self.duration
            )));
        }
        Ok(t / self.duration)
    }

    /// Inverse-engineered detuning Δ(t) in rad/s. Endpoints return the
    /// one-sided limits `±2(π/T)√(2/a)`.
    pub fn delta_of_t(&self, t: f64) -> Result<f64> {
        let s = self.s_of(t)?;
        self.delta_at_s(s)
    }

    fn delta_at_s(&self, s: f64) -> Result<f64> {
        let edge = 2.0 * self.omega * self.endpoint_ratio();
        if s <= 0.0 {
            return Ok(edge);
        }
        if s >= 1.0 {
            return Ok(-edge);
        }
        let p = self.theta_unchecked(s);
        let cb = self.cos_beta(s)?;
        if cb == 0.0 {
            return Err(Error::numerical(format!("cos β vanishes at interior s = {s}")));
        }
        let value = -p.theta_ddot / (self.omega * cb) + self.omega * cb / p.theta.tan();
        if !value.is_finite() {
            return Err(Error::numerical(format!("Δ(s = {s}) is not finite")));
        }
        Ok(value)
    }

    /// Integrand of γ₊ with respect to s (i.e. multiplied by T).
    fn phase_rate(&self, s: f64) -> Result<f64> {
        let ratio = if !(ENDPOINT_OFFSET..=1.0 - ENDPOINT_OFFSET).contains(&s) {
            self.endpoint_ratio()
        } else {
            let cb = self.cos_beta(s)?;
            cb / self.theta_unchecked(s).theta.sin()
        };
        Ok(-0.5 * self.omega * self.duration * ratio)
    }

    fn phase_to(&self, s: f64) -> Result<f64> {
        let mut failure = None;
        let value = integrate(
            |x| match self.phase_rate(x) {
                Ok(v) => v,
                Err(e) => {
                    failure.get_or_insert(e);
                    f64::NAN
                }
            },
            0.0,
            s,
            QuadOptions::default(),
        );
        if let Some(e) = failure {
            return Err(e);
        }
        value
    }

    /// Invariant phase γ₊(t); γ₋ = −γ₊.
    pub fn lr_phase(&self, t: f64) -> Result<f64> {
        let s = self.s_of(t)?;
        self.phase_to(s)
    }

    /// Largest |Δ(t)| over the protocol (dense sampling plus the endpoint
    /// limits).
    pub fn max_detuning(&self) -> Result<f64> {
        const SAMPLES: usize = 10_000;
        (0..=SAMPLES).try_fold(0.0_f64, |acc, k| {
            let s = k as f64 / SAMPLES as f64;
            Ok(acc.max(self.delta_at_s(s)?.abs()))
        })
    }

    /// `n` equal steps sampling Δ at the interval midpoints.
    pub fn discretize(&self, n: usize) -> Result<PulseSequence> {
        if n == 0 {
            return Err(Error::invalid("discretization needs at least one step"));
        }
        let dt = self.duration / n as f64;
        let steps = (0..n)
            .map(|i| {
                let s = (i as f64 + 0.5) / n as f64;
                Ok(PulseStep {
                    delta: self.delta_at_s(s)?,
                    duration: dt,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        PulseSequence::new(self.omega, steps)
    }
}

/// First-order error-sensitivity modulus for one channel, normalized to be
/// dimensionless: `|∫ e^{2iγ₊} sin θ dt| / T` (detuning) or
/// `|∫ e^{2iγ₊} 2θ̇ sin²θ dt| / π` (Rabi).
pub fn error_functional(a: f64, channel: ErrorChannel, omega: f64) -> Result<f64> {
    let ansatz = StaAnsatz::new(a, omega)?;
    ansatz.check_physical()?;
    let mut failure = None;
    let opts = QuadOptions {
        abs_tol: 1e-10,
        rel_tol: 1e-10,
        max_depth: 30,
    };
    let integral = integrate(
        |s| {
            let gamma = match ansatz.phase_to(s) {
                Ok(g) => g,
                Err(e) => {
                    failure.get_or_insert(e);
                    return Complex64::new(f64::NAN, f64::NAN);
                }
            };
            let p = ansatz.theta_unchecked(s);
            let weight = match channel {
                // δ_Δ sin θ
                ErrorChannel::Detuning => Complex64::new(p.theta.sin(), 0.0),
                // −2i δ_Ω θ̇ sin²θ
                ErrorChannel::Rabi => {
                    Complex64::new(0.0, -2.0 * p.theta_dot * p.theta.sin().powi(2))
                }
            };
            Complex64::from_polar(1.0, 2.0 * gamma) * weight * ansatz.duration
        },
        0.0,
        1.0,
        opts,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    let modulus = integral?.norm();
    Ok(match channel {
        ErrorChannel::Detuning => modulus / ansatz.duration,
        ErrorChannel::Rabi => modulus / PI,
    })
}

/// Scan grid for [`solve_a`].
pub const SCAN_START: f64 = 0.36;
pub const SCAN_STOP: f64 = 1.5;
pub const SCAN_STEP: f64 = 0.01;

/// One candidate root found by [`find_roots`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RootCandidate {
    pub a: f64,
    pub residual: f64,
}

fn golden_section<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5.0_f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// All minima of the error modulus on the scan grid, refined by golden
/// section to `|Δa| < 1e-6`, whose residual is below [`ROOT_TOLERANCE`].
/// Grid points where the ansatz is unphysical are skipped.
pub fn find_roots(channel: ErrorChannel, omega: f64) -> Result<Vec<RootCandidate>> {
    let n = ((SCAN_STOP - SCAN_START) / SCAN_STEP).round() as usize;
    let grid: Vec<f64> = (0..=n).map(|k| SCAN_START + k as f64 * SCAN_STEP).collect();
    let values: Vec<Option<f64>> = grid
        .par_iter()
        .map(|&a| error_functional(a, channel, omega).ok())
        .collect();

    let objective = |a: f64| error_functional(a, channel, omega).unwrap_or(f64::INFINITY);
    let mut roots = Vec::new();
    for i in 1..grid.len() - 1 {
        let (Some(prev), Some(here), Some(next)) = (values[i - 1], values[i], values[i + 1]) else {
            continue;
        };
        if here <= prev && here <= next {
            let (a, residual) = golden_section(objective, grid[i - 1], grid[i + 1], 1e-6);
            if residual < ROOT_TOLERANCE {
                roots.push(RootCandidate { a, residual });
            }
        }
    }
    Ok(roots)
}

/// Error-cancelling ansatz parameter for `channel`.
///
/// The modulus has several zeros in the scanned range; the one with the
/// largest `a` (shortest protocol) is returned.
pub fn solve_a(channel: ErrorChannel, omega: f64) -> Result<f64> {
    let roots = find_roots(channel, omega)?;
    roots
        .iter()
        .map(|r| r.a)
        .reduce(f64::max)
        .ok_or_else(|| {
            Error::numerical(format!(
                "no error-cancelling root for the {channel} channel in a ∈ ({SCAN_START}, {SCAN_STOP})"
            ))
        })
}

/// Solved design: ansatz plus summary numbers.
#[derive(Clone, Debug)]
pub struct StaDesign {
    pub channel: ErrorChannel,
    pub ansatz: StaAnsatz,
    pub max_detuning: f64,
    pub sequence: PulseSequence,
}

/// `solve_a` → ansatz → `n`-step discretization.
pub fn design(channel: ErrorChannel, omega: f64, n_steps: usize) -> Result<StaDesign> {
    let a = solve_a(channel, omega)?;
    let ansatz = StaAnsatz::new(a, omega)?;
    Ok(StaDesign {
        channel,
        ansatz,
        max_detuning: ansatz.max_detuning()?,
        sequence: ansatz.discretize(n_steps)?,
    })
}
