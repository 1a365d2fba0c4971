//! Beta distribution on `[0, 1]` with the derivatives PPO needs.

use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};
use statrs::function::gamma::{digamma, ln_gamma};

use crate::error::{Error, Result};

/// Samples are kept this far from the support boundary so the log-density
/// stays finite.
pub const ACTION_EPS: f64 = 1e-7;

/// Polygamma of order one.
pub fn trigamma(x: f64) -> f64 {
    let mut x = x;
    let mut acc = 0.0;
    while x < 20.0 {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    let r = 1.0 / x;
    let r2 = r * r;
    acc + r
        + 0.5 * r2
        + r * r2 * (1.0 / 6.0 - r2 * (1.0 / 30.0 - r2 * (1.0 / 42.0 - r2 * (1.0 / 30.0))))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BetaParams {
    pub alpha: f64,
    pub beta: f64,
}

impl BetaParams {
    pub fn mean(&self) -> f64 {
        self.alpha / (self.alpha + self.beta)
    }

    pub fn variance(&self) -> f64 {
        let s = self.alpha + self.beta;
        self.alpha * self.beta / (s * s * (s + 1.0))
    }

    fn ln_beta_fn(&self) -> f64 {
        ln_gamma(self.alpha) + ln_gamma(self.beta) - ln_gamma(self.alpha + self.beta)
    }

    pub fn log_prob(&self, x: f64) -> f64 {
        let x = x.clamp(ACTION_EPS, 1.0 - ACTION_EPS);
        (self.alpha - 1.0) * x.ln() + (self.beta - 1.0) * (-x).ln_1p() - self.ln_beta_fn()
    }

    pub fn entropy(&self) -> f64 {
        let (a, b) = (self.alpha, self.beta);
        self.ln_beta_fn() - (a - 1.0) * digamma(a) - (b - 1.0) * digamma(b)
            + (a + b - 2.0) * digamma(a + b)
    }

    /// `(∂/∂α, ∂/∂β)` of [`Self::log_prob`] at `x`.
    pub fn grad_log_prob(&self, x: f64) -> (f64, f64) {
        let x = x.clamp(ACTION_EPS, 1.0 - ACTION_EPS);
        let psi_s = digamma(self.alpha + self.beta);
        (
            x.ln() - digamma(self.alpha) + psi_s,
            (-x).ln_1p() - digamma(self.beta) + psi_s,
        )
    }

    /// `(∂/∂α, ∂/∂β)` of [`Self::entropy`].
    pub fn grad_entropy(&self) -> (f64, f64) {
        let (a, b) = (self.alpha, self.beta);
        let t_s = (a + b - 2.0) * trigamma(a + b);
        (-(a - 1.0) * trigamma(a) + t_s, -(b - 1.0) * trigamma(b) + t_s)
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Result<f64> {
        let d = Beta::new(self.alpha, self.beta)
            .map_err(|e| Error::numerical(format!("invalid Beta parameters: {e}")))?;
        Ok(d.sample(rng).clamp(ACTION_EPS, 1.0 - ACTION_EPS))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{integrate, QuadOptions};
    use rand::SeedableRng;

    #[test]
    fn trigamma_reference_values() {
        // ψ1(1) = π²/6, ψ1(1/2) = π²/2
        let pi2 = std::f64::consts::PI.powi(2);
        assert!((trigamma(1.0) - pi2 / 6.0).abs() < 1e-13);
        assert!((trigamma(0.5) - pi2 / 2.0).abs() < 1e-12);
        // Derivative of digamma.
        for x in [1.3, 2.7, 9.5, 40.0] {
            let h = 1e-5;
            let fd = (digamma(x + h) - digamma(x - h)) / (2.0 * h);
            assert!((fd - trigamma(x)).abs() < 1e-8, "{x}");
        }
    }

    #[test]
    fn density_normalizes() {
        for (a, b) in [(1.0, 1.0), (2.5, 1.3), (7.0, 12.0)] {
            let p = BetaParams { alpha: a, beta: b };
            let z = integrate(|x: f64| p.log_prob(x).exp(), 0.0, 1.0, QuadOptions::default()).unwrap();
            assert!((z - 1.0).abs() < 1e-6, "({a},{b}) -> {z}");
        }
    }

    #[test]
    fn uniform_sampling() {
        let p = BetaParams { alpha: 1.0, beta: 1.0 };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 100_000;
        let mean = (0..n).map(|_| p.sample(&mut rng).unwrap()).sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 0.01);
        assert!(p.log_prob(0.3).abs() < 1e-12);
    }

    #[test]
    fn concentrated_sampling() {
        let p = BetaParams { alpha: 50.0, beta: 50.0 };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let xs: Vec<f64> = (0..20_000).map(|_| p.sample(&mut rng).unwrap()).collect();
        let m = xs.iter().sum::<f64>() / xs.len() as f64;
        let sd = (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64).sqrt();
        assert!(sd < 0.06);
        assert!((sd - p.variance().sqrt()).abs() < 2e-3);
    }

    #[test]
    fn entropy_matches_quadrature() {
        let p = BetaParams { alpha: 3.2, beta: 1.7 };
        let h = integrate(
            |x: f64| {
                let lp = p.log_prob(x);
                -lp.exp() * lp
            },
            0.0,
            1.0,
            QuadOptions::default(),
        )
        .unwrap();
        assert!((h - p.entropy()).abs() < 1e-8);
        // Uniform has zero differential entropy.
        assert!(BetaParams { alpha: 1.0, beta: 1.0 }.entropy().abs() < 1e-14);
    }

    #[test]
    fn analytic_partials() {
        let p = BetaParams { alpha: 2.3, beta: 4.1 };
        let h = 1e-6;
        let x = 0.37;
        let shift = |da: f64, db: f64| BetaParams { alpha: p.alpha + da, beta: p.beta + db };
        let (ga, gb) = p.grad_log_prob(x);
        let fa = (shift(h, 0.0).log_prob(x) - shift(-h, 0.0).log_prob(x)) / (2.0 * h);
        let fb = (shift(0.0, h).log_prob(x) - shift(0.0, -h).log_prob(x)) / (2.0 * h);
        assert!((ga - fa).abs() < 1e-7 && (gb - fb).abs() < 1e-7);
        let (ea, eb) = p.grad_entropy();
        let fa = (shift(h, 0.0).entropy() - shift(-h, 0.0).entropy()) / (2.0 * h);
        let fb = (shift(0.0, h).entropy() - shift(0.0, -h).entropy()) / (2.0 * h);
        assert!((ea - fa).abs() < 1e-7 && (eb - fb).abs() < 1e-7);
    }
}
