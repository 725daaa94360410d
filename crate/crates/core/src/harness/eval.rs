use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::starts::StartSpec;
use crate::environment::{EpisodeRecord, Environment, ResetOptions, ScenarioConfig};
use crate::error::{config, Error, Result};
use crate::qlearning::{rollout, Policy};
use crate::rng::{stream_id, substream};
use crate::scoring::RewardKind;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub n_flights: usize,
    pub true_flux: f64,
    /// Start cells for greedy policies. Ignored for fixed paths, which start
    /// at their first cell.
    pub starts: Vec<StartSpec>,
    pub seed: u64,
    /// Reward computed along the way; the final CRPS does not depend on it.
    pub reward_kind: RewardKind,
    /// Keep every flight record in the report.
    pub keep_flights: bool,
    /// Worker threads; `None` uses the global pool, `Some(1)` runs serially.
    pub workers: Option<usize>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            n_flights: 5000,
            true_flux: 250.0,
            starts: StartSpec::CANONICAL.to_vec(),
            seed: 0,
            reward_kind: RewardKind::NegCrps,
            keep_flights: false,
            workers: None,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_flights == 0 {
            return Err(config("n_flights must be >= 1"));
        }
        if !(self.true_flux > 0.0 && self.true_flux.is_finite()) {
            return Err(config(format!("true_flux must be > 0, got {}", self.true_flux)));
        }
        if self.workers == Some(0) {
            return Err(config("workers must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StartReport {
    pub label: String,
    pub start_cell: (usize, usize),
    pub n_flights: usize,
    pub mean_crps: f64,
    /// Population standard deviation over flights.
    pub sd_crps: f64,
    /// Final CRPS per flight, in flight-index order.
    pub crps: Vec<f64>,
    pub flights: Option<Vec<EpisodeRecord>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub version: String,
    pub policy: String,
    /// Hex SHA-256 over the scenario, the evaluation config (minus the worker
    /// count) and the policy.
    pub config_hash: String,
    pub seed: u64,
    pub true_flux: f64,
    pub reward_kind: RewardKind,
    pub groups: Vec<StartReport>,
}

impl EvalReport {
    pub fn group(&self, label: &str) -> Option<&StartReport> {
        self.groups.iter().find(|g| g.label == label)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Mean and population standard deviation.
pub fn summarize(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn config_hash(policy: &Policy, cfg: &EvalConfig, sc: &ScenarioConfig) -> Result<String> {
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(sc)?);
    // Results do not depend on the worker count.
    h.update(serde_json::to_vec(&EvalConfig { workers: None, ..cfg.clone() })?);
    match policy {
        Policy::Greedy(q) => {
            for v in q.values() {
                h.update(v.to_le_bytes());
            }
        }
        Policy::FixedPath(cells) => {
            for (cx, cy) in cells {
                h.update((*cx as u64).to_le_bytes());
                h.update((*cy as u64).to_le_bytes());
            }
        }
    }
    Ok(hex::encode(h.finalize()))
}

/// Runs `n_flights` rollouts per start cell. Flight `i` of group `g` uses
/// substream `(seed, g << 32 | i)`, so results are independent of the
/// worker count.
pub fn evaluate(policy: &Policy, cfg: &EvalConfig, scenario: &ScenarioConfig) -> Result<EvalReport> {
    cfg.validate()?;
    policy.validate(scenario)?;
    let groups: Vec<(String, (usize, usize))> = match policy {
        Policy::FixedPath(cells) => vec![("path".to_string(), cells[0])],
        Policy::Greedy(_) => {
            if cfg.starts.is_empty() {
                return Err(config("a greedy evaluation needs at least one start cell"));
            }
            cfg.starts.iter().map(|s| Ok((s.to_string(), s.resolve(scenario)?))).collect::<Result<_>>()?
        }
    };
    let env = Environment::new(scenario.clone(), cfg.reward_kind)?;

    let mut reports = Vec::with_capacity(groups.len());
    for (g, (label, start)) in groups.into_iter().enumerate() {
        let opts = ResetOptions { true_flux: Some(cfg.true_flux), start: Some(start) };
        let fly = |env: &mut Environment, i: usize| -> Result<EpisodeRecord> {
            let mut rng = substream(cfg.seed, stream_id(g as u32, i as u32));
            rollout(policy, env, &opts, &mut rng)
        };
        let records: Vec<EpisodeRecord> = match cfg.workers {
            Some(1) => {
                let mut env = env.clone();
                (0..cfg.n_flights).map(|i| fly(&mut env, i)).collect::<Result<_>>()?
            }
            Some(k) => rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .map_err(|e| Error::Config(e.to_string()))?
                .install(|| run_parallel(&env, cfg.n_flights, &fly))?,
            None => run_parallel(&env, cfg.n_flights, &fly)?,
        };
        let crps: Vec<f64> = records.iter().map(|r| r.final_crps.expect("completed flight")).collect();
        let (mean_crps, sd_crps) = summarize(&crps);
        reports.push(StartReport {
            label,
            start_cell: start,
            n_flights: cfg.n_flights,
            mean_crps,
            sd_crps,
            crps,
            flights: cfg.keep_flights.then_some(records),
        });
    }

    Ok(EvalReport {
        version: env!("CARGO_PKG_VERSION").to_string(),
        policy: match policy {
            Policy::Greedy(_) => "greedy".into(),
            Policy::FixedPath(_) => "fixed-path".into(),
        },
        config_hash: config_hash(policy, cfg, scenario)?,
        seed: cfg.seed,
        true_flux: cfg.true_flux,
        reward_kind: cfg.reward_kind,
        groups: reports,
    })
}

fn run_parallel<F>(env: &Environment, n: usize, fly: &F) -> Result<Vec<EpisodeRecord>>
where
    F: Fn(&mut Environment, usize) -> Result<EpisodeRecord> + Sync,
{
    (0..n).into_par_iter().map_init(|| env.clone(), |env, i| fly(env, i)).collect()
}
