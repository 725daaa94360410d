//! Rewards and the final evaluation metric.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::prior::{FluxEnsemble, LognormalParams};

/// Fitted log-space σ below this is clamped before KL and entropy.
pub const MIN_FITTED_SIGMA: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RewardKind {
    /// `-CRPS` of the posterior ensemble against the true flux.
    #[serde(rename = "neg-crps")]
    NegCrps,
    /// `D_KL(posterior ‖ initial prior)` of the fitted lognormals.
    #[serde(rename = "kl")]
    KlGain,
    /// Negative differential entropy of the fitted lognormal posterior.
    #[serde(rename = "neg-entropy")]
    NegEntropy,
}

impl RewardKind {
    pub const ALL: [RewardKind; 3] = [RewardKind::NegCrps, RewardKind::KlGain, RewardKind::NegEntropy];

    pub fn as_str(self) -> &'static str {
        match self {
            RewardKind::NegCrps => "neg-crps",
            RewardKind::KlGain => "kl",
            RewardKind::NegEntropy => "neg-entropy",
        }
    }
}

impl fmt::Display for RewardKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RewardKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "neg-crps" => Ok(RewardKind::NegCrps),
            "kl" => Ok(RewardKind::KlGain),
            "neg-entropy" => Ok(RewardKind::NegEntropy),
            other => Err(Error::Parse(format!(
                "unknown reward kind {other:?} (expected neg-crps, kl or neg-entropy)"
            ))),
        }
    }
}

/// Ensemble CRPS by the plain double sum:
/// `(1/N) Σ|x_i − y| − (1/2N²) Σ_i Σ_j |x_i − x_j|`. O(N²).
pub fn crps_double_sum(samples: &[f64], truth: f64) -> f64 {
    let n = samples.len() as f64;
    let abs_error = samples.iter().map(|x| (x - truth).abs()).sum::<f64>() / n;
    let mut spread = 0.0;
    for xi in samples {
        for xj in samples {
            spread += (xi - xj).abs();
        }
    }
    abs_error - spread / (2.0 * n * n)
}

/// Same estimator as [`crps_double_sum`] in O(N log N), using
/// `Σ_i Σ_j |x_i − x_j| = 2 Σ_k (2k − N − 1) x_(k)` over the sorted samples.
pub fn crps_sorted(samples: &[f64], truth: f64) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let abs_error = sorted.iter().map(|x| (x - truth).abs()).sum::<f64>() / n;
    let spread: f64 = sorted
        .iter()
        .enumerate()
        .map(|(k, x)| (2.0 * (k as f64 + 1.0) - n - 1.0) * x)
        .sum();
    // Exact arithmetic gives a non-negative result; clamp rounding residue.
    (abs_error - spread / (n * n)).max(0.0)
}

/// CRPS of the ensemble's flux-space members against `truth`.
pub fn crps_ensemble(ensemble: &FluxEnsemble, truth: f64) -> f64 {
    let fluxes: Vec<f64> = ensemble.fluxes().collect();
    crps_sorted(&fluxes, truth)
}

fn check_sigma(p: &LognormalParams) -> Result<()> {
    if !(p.sigma > 0.0 && p.sigma.is_finite()) {
        return Err(domain(format!("lognormal sigma must be > 0, got {}", p.sigma)));
    }
    Ok(())
}

/// Forward KL divergence `D_KL(post ‖ prior)` in nats.
pub fn kl_lognormal(post: &LognormalParams, prior: &LognormalParams) -> Result<f64> {
    check_sigma(post)?;
    check_sigma(prior)?;
    let ratio = post.sigma / prior.sigma;
    let shift = (post.mu - prior.mu) / prior.sigma;
    Ok(-ratio.ln() + 0.5 * (ratio * ratio + shift * shift) - 0.5)
}

/// Differential entropy `μ + ½ ln(2πe σ²)` in nats.
pub fn entropy_lognormal(p: &LognormalParams) -> Result<f64> {
    check_sigma(p)?;
    Ok(p.mu + 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E * p.sigma * p.sigma).ln())
}

/// Lognormal fit of the ensemble with σ clamped to [`MIN_FITTED_SIGMA`].
pub fn fit_clamped(ensemble: &FluxEnsemble) -> LognormalParams {
    LognormalParams {
        mu: ensemble.log_mean(),
        sigma: ensemble.log_variance().sqrt().max(MIN_FITTED_SIGMA),
    }
}

/// Reward after assimilating an observation. Only `NegCrps` reads `truth`.
pub fn step_reward(
    kind: RewardKind,
    posterior: &FluxEnsemble,
    initial_prior: &LognormalParams,
    truth: f64,
) -> Result<f64> {
    match kind {
        RewardKind::NegCrps => Ok(-crps_ensemble(posterior, truth)),
        RewardKind::KlGain => kl_lognormal(&fit_clamped(posterior), initial_prior),
        RewardKind::NegEntropy => entropy_lognormal(&fit_clamped(posterior)).map(|h| -h),
    }
}
