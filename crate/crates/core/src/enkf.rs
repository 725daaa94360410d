//! Iterative ensemble Kalman update (ES-MDA) for a scalar observation.
//!
//! The ensemble lives in log-flux space. Each observation is assimilated
//! `iterations` times with inflated error variance `α_i · σ²`, where
//! `Σ 1/α_i = 1`; forward predictions are recomputed before every pass and
//! the observation perturbations are redrawn.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{config, domain, Error, Result};
use crate::plume::Point3;
use crate::prior::FluxEnsemble;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    /// Observed concentration, ppm.
    pub value: f64,
    /// Observation error standard deviation, ppm.
    pub noise_sd: f64,
    pub location: Point3,
    pub time_step: usize,
}

impl Observation {
    pub fn validate(&self) -> Result<()> {
        if !self.value.is_finite() {
            return Err(domain(format!("observation value must be finite, got {}", self.value)));
        }
        if !(self.noise_sd > 0.0 && self.noise_sd.is_finite()) {
            return Err(domain(format!("observation noise_sd must be > 0, got {}", self.noise_sd)));
        }
        Ok(())
    }
}

/// Maps a flux (mg m⁻² s⁻¹) to the predicted observation (ppm).
pub trait ForwardModel {
    fn predict(&self, flux: f64) -> f64;
}

impl<F: Fn(f64) -> f64> ForwardModel for F {
    fn predict(&self, flux: f64) -> f64 {
        self(flux)
    }
}

/// Plume response at a fixed receptor: `background + flux · per_unit_flux`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearResponse {
    pub background: f64,
    pub per_unit_flux: f64,
}

impl ForwardModel for LinearResponse {
    fn predict(&self, flux: f64) -> f64 {
        self.background + flux * self.per_unit_flux
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnkfConfig {
    pub iterations: usize,
    /// Observation-error variance multipliers, one per pass.
    pub inflation: Vec<f64>,
}

impl EnkfConfig {
    /// `iterations` passes with constant inflation `α = iterations`.
    pub fn constant(iterations: usize) -> Self {
        Self { iterations, inflation: vec![iterations as f64; iterations] }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(config("enkf iterations must be >= 1"));
        }
        if self.inflation.len() != self.iterations {
            return Err(config(format!(
                "enkf has {} iterations but {} inflation factors",
                self.iterations,
                self.inflation.len()
            )));
        }
        if let Some(a) = self.inflation.iter().find(|a| !(**a > 0.0 && a.is_finite())) {
            return Err(config(format!("inflation factors must be > 0, got {a}")));
        }
        let inverse_sum: f64 = self.inflation.iter().map(|a| 1.0 / a).sum();
        if (inverse_sum - 1.0).abs() > 1e-9 {
            return Err(config(format!(
                "inverse inflation factors must sum to 1, got {inverse_sum}"
            )));
        }
        Ok(())
    }
}

impl Default for EnkfConfig {
    fn default() -> Self {
        Self::constant(4)
    }
}

/// Assimilates one observation into the ensemble.
///
/// Draws exactly `iterations × len` standard normals from `rng`, in member
/// order within each pass, whatever the gain. A degenerate ensemble has zero
/// cross-covariance and comes back unchanged.
pub fn assimilate<M, R>(
    ensemble: &FluxEnsemble,
    obs: &Observation,
    forward: &M,
    cfg: &EnkfConfig,
    rng: &mut R,
) -> Result<FluxEnsemble>
where
    M: ForwardModel + ?Sized,
    R: Rng + ?Sized,
{
    cfg.validate()?;
    obs.validate()?;
    let n = ensemble.len();
    let nf = n as f64;
    let mut ell = ensemble.log_members().to_vec();
    let mut d = vec![0.0; n];
    let r2 = obs.noise_sd * obs.noise_sd;

    for &alpha in &cfg.inflation {
        for (j, (dj, lj)) in d.iter_mut().zip(&ell).enumerate() {
            let value = forward.predict(lj.exp());
            if !value.is_finite() {
                return Err(Error::NonFiniteForward { member: j, value });
            }
            *dj = value;
        }
        let mean_l = ell.iter().sum::<f64>() / nf;
        let mean_d = d.iter().sum::<f64>() / nf;
        let (mut cov_ld, mut var_d) = (0.0, 0.0);
        for (lj, dj) in ell.iter().zip(&d) {
            let dd = dj - mean_d;
            cov_ld += (lj - mean_l) * dd;
            var_d += dd * dd;
        }
        cov_ld /= nf - 1.0;
        var_d /= nf - 1.0;

        let gain = cov_ld / (var_d + alpha * r2);
        let perturbation_sd = alpha.sqrt() * obs.noise_sd;
        for (lj, dj) in ell.iter_mut().zip(&d) {
            let z: f64 = StandardNormal.sample(rng);
            *lj += gain * (obs.value + perturbation_sd * z - dj);
        }
    }

    FluxEnsemble::from_log_members(ell)
}

/// Folds [`assimilate`] over the observations in order.
pub fn sequential_assimilate_all<M, R>(
    prior: &FluxEnsemble,
    observations: &[Observation],
    forwards: &[M],
    cfg: &EnkfConfig,
    rng: &mut R,
) -> Result<FluxEnsemble>
where
    M: ForwardModel,
    R: Rng + ?Sized,
{
    if observations.len() != forwards.len() {
        return Err(domain(format!(
            "{} observations but {} forward models",
            observations.len(),
            forwards.len()
        )));
    }
    let mut ensemble = prior.clone();
    for (obs, forward) in observations.iter().zip(forwards) {
        ensemble = assimilate(&ensemble, obs, forward, cfg, rng)?;
    }
    Ok(ensemble)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plume::{unit_excess, PlumeConfig};
    use crate::prior::LognormalParams;
    use crate::rng::{seeded, substream};

    fn obs(value: f64, noise_sd: f64) -> Observation {
        Observation { value, noise_sd, location: Point3::new(0.0, 0.0, 10.0), time_step: 0 }
    }

    fn peak_response() -> LinearResponse {
        let cfg = PlumeConfig::default();
        LinearResponse {
            background: cfg.background_ppm,
            per_unit_flux: unit_excess(Point3::new(250.0, 750.0, 10.0), &cfg),
        }
    }

    #[test]
    fn config_validation() {
        assert!(EnkfConfig::default().validate().is_ok());
        assert!(EnkfConfig { iterations: 4, inflation: vec![2.0, 4.0, 8.0, 8.0] }.validate().is_ok());
        assert!(EnkfConfig { iterations: 2, inflation: vec![2.0, 3.0] }.validate().is_err());
        assert!(EnkfConfig { iterations: 0, inflation: vec![] }.validate().is_err());
        assert!(EnkfConfig { iterations: 2, inflation: vec![2.0] }.validate().is_err());
    }

    #[test]
    fn zero_innovation_barely_moves_the_mean() {
        let (a, b) = (50.0, 400.0);
        let forward = move |flux: f64| a * flux.ln() + b;
        let prior = LognormalParams::default();
        let e = FluxEnsemble::sample_prior(&prior, 100, &mut seeded(1)).unwrap();
        let mean_pred = e.log_members().iter().map(|l| a * l + b).sum::<f64>() / 100.0;
        let post = assimilate(&e, &obs(mean_pred, 1e-3), &forward, &EnkfConfig::default(), &mut seeded(2))
            .unwrap();
        let spread = e.log_variance().sqrt();
        assert!((post.log_mean() - e.log_mean()).abs() < spread / 10.0);
    }

    #[test]
    fn non_finite_forward_names_the_member() {
        let e = FluxEnsemble::from_log_members(vec![0.0, 1.0, 2.0]).unwrap();
        let forward = |flux: f64| if flux > 5.0 { f64::NAN } else { flux };
        let err = assimilate(&e, &obs(1.0, 1.0), &forward, &EnkfConfig::default(), &mut seeded(0))
            .unwrap_err();
        assert!(matches!(err, Error::NonFiniteForward { member: 2, .. }), "{err}");
    }

    #[test]
    fn degenerate_ensemble_is_unchanged() {
        let e = FluxEnsemble::from_log_members(vec![5.0; 8]).unwrap();
        let post = assimilate(&e, &obs(600.0, 8.0), &peak_response(), &EnkfConfig::default(), &mut seeded(0))
            .unwrap();
        assert_eq!(post, e);
    }

    /// Conjugate Normal-Normal update for `d = a ℓ + b + ε`.
    fn conjugate_posterior(m0: f64, s0: f64, a: f64, b: f64, y: f64, r: f64) -> (f64, f64) {
        let precision = 1.0 / (s0 * s0) + a * a / (r * r);
        let var = 1.0 / precision;
        (var * (m0 / (s0 * s0) + a * (y - b) / (r * r)), var.sqrt())
    }

    fn check_against_conjugate(inflation: Vec<f64>, a: f64, r: f64, y: f64, seed: u64) {
        let n = 10_000;
        let (m0, s0, b) = (4.6, 1.1, 400.0);
        let prior = FluxEnsemble::sample_prior(&LognormalParams::new(m0, s0).unwrap(), n, &mut seeded(seed))
            .unwrap();
        let cfg = EnkfConfig { iterations: inflation.len(), inflation };
        let forward = move |flux: f64| a * flux.ln() + b;
        let post = assimilate(&prior, &obs(y, r), &forward, &cfg, &mut seeded(seed + 1)).unwrap();
        let (mean, sd) = conjugate_posterior(m0, s0, a, b, y, r);
        let got_mean = post.log_mean();
        let got_sd = post.log_variance().sqrt();
        let se_mean = sd / (n as f64).sqrt();
        let se_sd = sd / (2.0 * n as f64).sqrt();
        assert!((got_mean - mean).abs() < 3.0 * se_mean, "mean {got_mean} vs {mean}");
        assert!((got_sd - sd).abs() < 3.0 * se_sd, "sd {got_sd} vs {sd}");
    }

    #[test]
    fn linear_gaussian_matches_conjugate_closed_form() {
        check_against_conjugate(vec![4.0; 4], 50.0, 30.0 / 12f64.sqrt(), 50.0 * 5.5 + 400.0, 100);
        check_against_conjugate(vec![2.0, 4.0, 8.0, 8.0], 50.0, 30.0 / 12f64.sqrt(), 50.0 * 5.5 + 400.0, 200);
        check_against_conjugate(vec![1.0], 2.0, 3.0, 2.0 * 4.0 + 400.0, 300);
        check_against_conjugate(vec![3.0; 3], 5.0, 4.0, 5.0 * 6.0 + 400.0, 400);
    }

    #[test]
    fn uninformative_receptor_leaves_ensemble_unchanged() {
        let forward = LinearResponse { background: 400.0, per_unit_flux: 0.0 };
        let prior = LognormalParams::default();
        let e = FluxEnsemble::sample_prior(&prior, 100, &mut seeded(7)).unwrap();
        let post = assimilate(&e, &obs(403.0, 8.66), &forward, &EnkfConfig::default(), &mut seeded(8))
            .unwrap();
        assert!((post.log_mean() - e.log_mean()).abs() < 1e-3 * e.log_variance().sqrt());
    }

    #[test]
    fn informative_observation_contracts_variance_on_average() {
        let forward = peak_response();
        let truth = 250.0;
        let prior = LognormalParams::default();
        let (mut before, mut after) = (0.0, 0.0);
        for seed in 0..100 {
            let mut rng = substream(42, seed);
            let e = FluxEnsemble::sample_prior(&prior, 100, &mut rng).unwrap();
            let y = forward.predict(truth) + 8.66 * Distribution::<f64>::sample(&StandardNormal, &mut rng);
            let post = assimilate(&e, &obs(y, 8.66), &forward, &EnkfConfig::default(), &mut rng).unwrap();
            before += e.log_variance();
            after += post.log_variance();
        }
        assert!(after < before);
    }

    #[test]
    fn sixteen_peak_observations_concentrate_near_truth() {
        let forward = peak_response();
        let noise = 30.0 / 12f64.sqrt();
        let truth = 250.0;
        let prior = LognormalParams::default();
        let mut good = 0;
        for seed in 0..200 {
            let mut rng = substream(9, seed);
            let e0 = FluxEnsemble::sample_prior(&prior, 100, &mut rng).unwrap();
            let mut e = e0.clone();
            for t in 0..16 {
                let z: f64 = StandardNormal.sample(&mut rng);
                let o = Observation { time_step: t, ..obs(forward.predict(truth) + noise * z, noise) };
                e = assimilate(&e, &o, &forward, &EnkfConfig::default(), &mut rng).unwrap();
            }
            let (s0, s1) = (e0.stats(), e.stats());
            if s1.sd < s0.sd / 5.0 && (s1.median - truth).abs() < 3.0 * s1.sd {
                good += 1;
            }
            assert!(e.fluxes().all(|f| f > 0.0));
        }
        assert!(good as f64 > 0.95 * 200.0, "{good}/200");
    }

    #[test]
    fn sequential_fold() {
        let prior = LognormalParams::default();
        let e = FluxEnsemble::sample_prior(&prior, 50, &mut seeded(1)).unwrap();
        let forward = peak_response();
        let none: [LinearResponse; 0] = [];
        assert_eq!(
            sequential_assimilate_all(&e, &[], &none, &EnkfConfig::default(), &mut seeded(2)).unwrap(),
            e
        );

        let o = obs(610.0, 8.66);
        let one = sequential_assimilate_all(&e, &[o], &[forward], &EnkfConfig::default(), &mut seeded(3))
            .unwrap();
        let direct = assimilate(&e, &o, &forward, &EnkfConfig::default(), &mut seeded(3)).unwrap();
        assert_eq!(one, direct);

        assert!(sequential_assimilate_all(&e, &[o, o], &[forward], &EnkfConfig::default(), &mut seeded(3))
            .is_err());
    }
}
