//! Lognormal flux prior and the log-space ensemble the filter carries.

use std::fmt::Write as _;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Parameters of `ln φ ~ Normal(mu, sigma²)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LognormalParams {
    pub mu: f64,
    pub sigma: f64,
}

impl LognormalParams {
    pub fn new(mu: f64, sigma: f64) -> Result<Self> {
        let p = Self { mu, sigma };
        p.validate()?;
        Ok(p)
    }

    /// Closed form from median and mode: `mu = ln(median)`, `sigma² = ln(median / mode)`.
    pub fn from_median_mode(median: f64, mode: f64) -> Result<Self> {
        if !(median > 0.0 && mode > 0.0 && mode < median) {
            return Err(domain(format!(
                "need 0 < mode < median, got median {median}, mode {mode}"
            )));
        }
        Self::new(median.ln(), (median / mode).ln().sqrt())
    }

    pub fn validate(&self) -> Result<()> {
        if !self.mu.is_finite() {
            return Err(domain(format!("lognormal mu must be finite, got {}", self.mu)));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(domain(format!("lognormal sigma must be > 0, got {}", self.sigma)));
        }
        Ok(())
    }

    pub fn median(&self) -> f64 {
        self.mu.exp()
    }

    pub fn mode(&self) -> f64 {
        (self.mu - self.sigma * self.sigma).exp()
    }

    pub fn mean(&self) -> f64 {
        (self.mu + 0.5 * self.sigma * self.sigma).exp()
    }

    /// Density in flux space.
    pub fn pdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let z = (x.ln() - self.mu) / self.sigma;
        (-0.5 * z * z).exp() / (x * self.sigma * (2.0 * std::f64::consts::PI).sqrt())
    }
}

impl Default for LognormalParams {
    /// Median 100, mode 30 mg CO₂ m⁻² s⁻¹.
    fn default() -> Self {
        Self::from_median_mode(100.0, 30.0).expect("valid constants")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub mean: f64,
    pub median: f64,
    pub sd: f64,
}

/// Ensemble of log-flux samples. Every flux `exp(member)` is strictly positive.
#[derive(Clone, Debug, PartialEq)]
pub struct FluxEnsemble {
    log_members: Vec<f64>,
}

impl FluxEnsemble {
    pub fn from_log_members(log_members: Vec<f64>) -> Result<Self> {
        if log_members.len() < 2 {
            return Err(domain(format!(
                "an ensemble needs at least 2 members, got {}",
                log_members.len()
            )));
        }
        if let Some(i) = log_members.iter().position(|m| !m.is_finite()) {
            return Err(domain(format!("ensemble member {i} is not finite")));
        }
        Ok(Self { log_members })
    }

    pub fn from_fluxes(fluxes: &[f64]) -> Result<Self> {
        if let Some(&bad) = fluxes.iter().find(|&&f| f.is_nan() || f <= 0.0) {
            return Err(domain(format!("fluxes must be strictly positive, got {bad}")));
        }
        Self::from_log_members(fluxes.iter().map(|f| f.ln()).collect())
    }

    /// `n` i.i.d. draws of `Normal(mu, sigma²)` in log space.
    pub fn sample_prior<R: Rng + ?Sized>(params: &LognormalParams, n: usize, rng: &mut R) -> Result<Self> {
        if n < 2 {
            return Err(domain(format!("an ensemble needs at least 2 members, got {n}")));
        }
        params.validate()?;
        let normal = Normal::new(params.mu, params.sigma).map_err(|e| domain(e.to_string()))?;
        Ok(Self { log_members: (0..n).map(|_| normal.sample(rng)).collect() })
    }

    pub fn len(&self) -> usize {
        self.log_members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_members.is_empty()
    }

    pub fn log_members(&self) -> &[f64] {
        &self.log_members
    }

    pub fn fluxes(&self) -> impl Iterator<Item = f64> + '_ {
        self.log_members.iter().map(|l| l.exp())
    }

    pub fn log_mean(&self) -> f64 {
        self.log_members.iter().sum::<f64>() / self.len() as f64
    }

    /// Sample variance (divisor `n - 1`) of the log members.
    pub fn log_variance(&self) -> f64 {
        sample_variance(&self.log_members)
    }

    /// Moment fit in log space: mean and `n - 1` standard deviation.
    pub fn fit_lognormal(&self) -> Result<LognormalParams> {
        let var = self.log_variance();
        if var.is_nan() || var <= 0.0 {
            return Err(Error::DegenerateEnsemble);
        }
        Ok(LognormalParams { mu: self.log_mean(), sigma: var.sqrt() })
    }

    /// Mean, median and standard deviation (`n - 1`) in flux space.
    ///
    /// For even sizes the median is the arithmetic mean of the two central
    /// fluxes.
    pub fn stats(&self) -> EnsembleStats {
        let mut fluxes: Vec<f64> = self.fluxes().collect();
        let n = fluxes.len();
        let mean = fluxes.iter().sum::<f64>() / n as f64;
        let sd = sample_variance(&fluxes).sqrt();
        fluxes.sort_by(f64::total_cmp);
        let median = if n % 2 == 1 {
            fluxes[n / 2]
        } else {
            0.5 * (fluxes[n / 2 - 1] + fluxes[n / 2])
        };
        EnsembleStats { mean, median, sd }
    }

    /// Debug dump: one flux per line.
    pub fn to_dump(&self) -> String {
        let mut out = String::with_capacity(self.len() * 20);
        for f in self.fluxes() {
            let _ = writeln!(out, "{f}");
        }
        out
    }

    pub fn parse_dump(text: &str) -> Result<Self> {
        let fluxes = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(|l| l.parse::<f64>().map_err(|e| Error::Parse(format!("bad flux {l:?}: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        Self::from_fluxes(&fluxes)
    }
}

pub(crate) fn sample_variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use approx::assert_relative_eq;

    #[test]
    fn default_prior_from_median_and_mode() {
        let p = LognormalParams::default();
        assert_relative_eq!(p.mu, 100f64.ln(), epsilon = 1e-15);
        assert_relative_eq!(p.sigma * p.sigma, (10.0f64 / 3.0).ln(), epsilon = 1e-14);
        assert_relative_eq!(p.median(), 100.0, epsilon = 1e-10);
        assert_relative_eq!(p.mode(), 30.0, epsilon = 1e-10);
    }

    #[test]
    fn rejects_bad_params() {
        assert!(LognormalParams::new(0.0, 0.0).is_err());
        assert!(LognormalParams::new(f64::NAN, 1.0).is_err());
        assert!(LognormalParams::from_median_mode(30.0, 100.0).is_err());
    }

    #[test]
    fn sample_prior_needs_two_members() {
        let p = LognormalParams::default();
        assert!(FluxEnsemble::sample_prior(&p, 1, &mut seeded(1)).is_err());
        assert!(FluxEnsemble::sample_prior(&p, 2, &mut seeded(1)).is_ok());
    }

    #[test]
    fn near_degenerate_prior_collapses_to_mu() {
        let p = LognormalParams::new(4.2, 1e-12).unwrap();
        let e = FluxEnsemble::sample_prior(&p, 50, &mut seeded(3)).unwrap();
        assert!(e.log_members().iter().all(|m| (m - 4.2).abs() < 1e-9));
    }

    #[test]
    fn same_seed_same_ensemble() {
        let p = LognormalParams::default();
        let a = FluxEnsemble::sample_prior(&p, 100, &mut seeded(11)).unwrap();
        let b = FluxEnsemble::sample_prior(&p, 100, &mut seeded(11)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn large_sample_median_and_mode() {
        let p = LognormalParams::default();
        let e = FluxEnsemble::sample_prior(&p, 100_000, &mut seeded(5)).unwrap();
        let stats = e.stats();
        assert!((stats.median / 100.0 - 1.0).abs() < 0.02, "median {}", stats.median);
        // Histogram of the flux in 10-unit buckets; the densest bucket sits near the mode.
        let mut buckets = vec![0usize; 100];
        for f in e.fluxes() {
            if f < 1000.0 {
                buckets[(f / 10.0) as usize] += 1;
            }
        }
        let top = buckets.iter().enumerate().max_by_key(|(_, c)| **c).unwrap().0;
        let centre = top as f64 * 10.0 + 5.0;
        assert!((centre - 30.0).abs() <= 15.0, "mode bucket centre {centre}");
    }

    #[test]
    fn two_point_fit() {
        let e = FluxEnsemble::from_log_members(vec![0.0, 2.0]).unwrap();
        let p = e.fit_lognormal().unwrap();
        assert_relative_eq!(p.mu, 1.0);
        assert_relative_eq!(p.sigma, 2f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn degenerate_fit_is_an_error() {
        let e = FluxEnsemble::from_log_members(vec![1.5; 10]).unwrap();
        assert!(matches!(e.fit_lognormal(), Err(Error::DegenerateEnsemble)));
    }

    #[test]
    fn fit_recovers_normal_parameters() {
        let p = LognormalParams::new(4.6, 1.1).unwrap();
        let e = FluxEnsemble::sample_prior(&p, 100_000, &mut seeded(9)).unwrap();
        assert!((e.fit_lognormal().unwrap().mu - 4.6).abs() < 0.02);

        let p = LognormalParams::default();
        let e = FluxEnsemble::sample_prior(&p, 1_000_000, &mut seeded(10)).unwrap();
        let fit = e.fit_lognormal().unwrap();
        assert!((fit.mu / p.mu - 1.0).abs() < 0.01);
        assert!((fit.sigma / p.sigma - 1.0).abs() < 0.01);
    }

    #[test]
    fn stats_of_constant_ensemble() {
        let e = FluxEnsemble::from_log_members(vec![250f64.ln(); 4]).unwrap();
        let s = e.stats();
        assert_relative_eq!(s.mean, 250.0, max_relative = 1e-14);
        assert_relative_eq!(s.median, 250.0, max_relative = 1e-14);
        assert!(s.sd < 1e-10);
    }

    #[test]
    fn even_median_is_arithmetic_midpoint() {
        let e = FluxEnsemble::from_fluxes(&[100.0, 400.0]).unwrap();
        assert_relative_eq!(e.stats().median, 250.0, max_relative = 1e-14);
    }

    #[test]
    fn prior_mean_matches_closed_form() {
        let p = LognormalParams::default();
        assert_relative_eq!(p.mean(), 182.574_185_835_055_4, max_relative = 1e-12);
        let e = FluxEnsemble::sample_prior(&p, 100_000, &mut seeded(12)).unwrap();
        assert!((e.stats().mean / p.mean() - 1.0).abs() < 0.02);
    }

    #[test]
    fn dump_round_trip() {
        let p = LognormalParams::default();
        let e = FluxEnsemble::sample_prior(&p, 20, &mut seeded(2)).unwrap();
        let back = FluxEnsemble::parse_dump(&e.to_dump()).unwrap();
        for (a, b) in e.fluxes().zip(back.fluxes()) {
            assert_relative_eq!(a, b, max_relative = 1e-14);
        }
        assert!(FluxEnsemble::parse_dump("1.0\n-2.0\n").is_err());
    }

    #[test]
    fn all_fluxes_positive() {
        let p = LognormalParams::new(0.0, 30.0).unwrap();
        let e = FluxEnsemble::sample_prior(&p, 1000, &mut seeded(4)).unwrap();
        assert!(e.fluxes().all(|f| f > 0.0));
    }
}
