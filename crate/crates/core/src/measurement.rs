//! Fluorescence readout: Poisson photon counts thresholded into bright/dark.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use statrs::distribution::{DiscreteCDF, Poisson as PoissonDist};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectorModel {
    /// Mean photon count of the dark state.
    pub lambda_dark: f64,
    /// Mean photon count of the bright state; infinite means never dark.
    pub lambda_bright: f64,
    /// Counts strictly above this read as bright.
    pub threshold: u64,
    /// Probability the `|0⟩` preparation leaves the ion in `|1⟩`.
    pub prep_error: f64,
}

impl Default for DetectorModel {
    fn default() -> Self {
        DetectorModel {
            lambda_dark: 0.1,
            lambda_bright: 10.0,
            threshold: 2,
            prep_error: 0.005,
        }
    }
}

/// Bright-to-dark, dark-to-bright and average misassignment probabilities.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpamErrors {
    pub eps_b: f64,
    pub eps_d: f64,
    pub eps: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PopulationEstimate {
    pub p_hat: f64,
    pub std: f64,
    pub n_shots: u64,
}

fn poisson_cdf(lambda: f64, k: u64) -> f64 {
    if lambda == 0.0 {
        return 1.0;
    }
    if lambda.is_infinite() {
        return 0.0;
    }
    PoissonDist::new(lambda).expect("validated rate").cdf(k)
}

impl DetectorModel {
    /// Noise-free readout with perfect preparation.
    pub fn ideal() -> Self {
        DetectorModel {
            lambda_dark: 0.0,
            lambda_bright: f64::INFINITY,
            threshold: 0,
            prep_error: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.lambda_dark >= 0.0
            && self.lambda_dark.is_finite()
            && self.lambda_bright > self.lambda_dark
            && (0.0..1.0).contains(&self.prep_error);
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("invalid detector model {self:?}")))
        }
    }

    pub fn spam_errors(&self) -> SpamErrors {
        let eps_d = poisson_cdf(self.lambda_bright, self.threshold);
        let eps_b = 1.0 - poisson_cdf(self.lambda_dark, self.threshold);
        SpamErrors {
            eps_b,
            eps_d,
            eps: 0.5 * (eps_b + eps_d),
        }
    }

    /// Bright probability after a failed preparation swaps the roles of the
    /// two levels with probability `prep_error`.
    pub fn with_preparation(&self, p_bright: f64) -> f64 {
        (1.0 - self.prep_error) * p_bright + self.prep_error * (1.0 - p_bright)
    }

    /// Expected raw bright fraction for true bright probability `p_bright`.
    pub fn observed_probability(&self, p_bright: f64) -> f64 {
        let s = self.spam_errors();
        p_bright * (1.0 - s.eps_d) + (1.0 - p_bright) * s.eps_b
    }

    fn draw_count<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> Option<u64> {
        if lambda == 0.0 {
            Some(0)
        } else if lambda.is_infinite() {
            None
        } else {
            let d = Poisson::new(lambda).expect("validated rate");
            Some(d.sample(rng) as u64)
        }
    }

    /// One readout: draws the true state, then a thresholded photon count.
    pub fn simulate_shot<R: Rng + ?Sized>(&self, p_bright: f64, rng: &mut R) -> bool {
        let bright = rng.random_bool(p_bright.clamp(0.0, 1.0));
        let lambda = if bright { self.lambda_bright } else { self.lambda_dark };
        match Self::draw_count(lambda, rng) {
            Some(count) => count > self.threshold,
            None => true,
        }
    }

    /// Raw bright fraction over `n_shots` with its binomial standard error.
    pub fn estimate_population<R: Rng + ?Sized>(
        &self,
        p_bright: f64,
        n_shots: u64,
        rng: &mut R,
    ) -> Result<PopulationEstimate> {
        if n_shots == 0 {
            return Err(Error::invalid("n_shots must be at least 1"));
        }
        if !(0.0..=1.0).contains(&p_bright) {
            return Err(Error::invalid(format!("probability {p_bright} outside [0, 1]")));
        }
        let bright = (0..n_shots).filter(|_| self.simulate_shot(p_bright, rng)).count();
        Ok(PopulationEstimate::from_counts(bright as u64, n_shots))
    }
}

impl PopulationEstimate {
    pub fn from_counts(bright: u64, n_shots: u64) -> Self {
        let p_hat = bright as f64 / n_shots as f64;
        PopulationEstimate {
            p_hat,
            std: (p_hat * (1.0 - p_hat) / n_shots as f64).sqrt(),
            n_shots,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn default_spam_values() {
        let s = DetectorModel::default().spam_errors();
        let eps_d = (-10f64).exp() * 61.0;
        let eps_b = 1.0 - (-0.1f64).exp() * (1.0 + 0.1 + 0.005);
        assert!((s.eps_d - eps_d).abs() < 1e-12);
        assert!((s.eps_b - eps_b).abs() < 1e-12);
        assert!((s.eps_d - 2.77e-3).abs() < 1e-5);
        assert!((s.eps_b - 1.55e-4).abs() < 1e-6);
        assert!((s.eps - 1.46e-3).abs() < 1e-5);
    }

    #[test]
    fn spam_limits() {
        let no_dark = DetectorModel { lambda_dark: 0.0, ..Default::default() };
        assert_eq!(no_dark.spam_errors().eps_b, 0.0);
        let high = DetectorModel { threshold: 400, ..Default::default() };
        let s = high.spam_errors();
        assert!(s.eps_d > 1.0 - 1e-12 && s.eps_b < 1e-12);
        let ideal = DetectorModel::ideal().spam_errors();
        assert_eq!((ideal.eps_b, ideal.eps_d), (0.0, 0.0));
    }

    #[test]
    fn shot_edge_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let d = DetectorModel { lambda_dark: 0.0, ..Default::default() };
        assert!((0..1000).all(|_| !d.simulate_shot(0.0, &mut rng)));
        let ideal = DetectorModel::ideal();
        let e = ideal.estimate_population(1.0, 500, &mut rng).unwrap();
        assert_eq!((e.p_hat, e.std), (1.0, 0.0));
        assert!(ideal.estimate_population(0.5, 0, &mut rng).is_err());
    }

    #[test]
    fn bright_fraction_matches_eps_d() {
        let d = DetectorModel::default();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 100_000;
        let e = d.estimate_population(1.0, n, &mut rng).unwrap();
        let truth = 1.0 - d.spam_errors().eps_d;
        let sigma = (truth * (1.0 - truth) / n as f64).sqrt();
        assert!((e.p_hat - truth).abs() < 3.0 * sigma);
    }

    #[test]
    fn reproducible_stream() {
        let d = DetectorModel::default();
        let run = |s| {
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            (0..200).map(|_| d.simulate_shot(0.4, &mut rng)).collect::<Vec<_>>()
        };
        assert_eq!(run(9), run(9));
    }

    #[test]
    fn preparation_mixture() {
        let d = DetectorModel::default();
        assert!((d.with_preparation(1.0) - 0.995).abs() < 1e-15);
        assert!((d.with_preparation(0.0) - 0.005).abs() < 1e-15);
        assert_eq!(DetectorModel::ideal().with_preparation(0.3), 0.3);
    }

    #[test]
    fn validation() {
        assert!(DetectorModel::default().validate().is_ok());
        assert!(DetectorModel { lambda_bright: 0.05, ..Default::default() }.validate().is_err());
        assert!(DetectorModel { prep_error: 1.0, ..Default::default() }.validate().is_err());
        assert!(DetectorModel::ideal().validate().is_ok());
    }
}
