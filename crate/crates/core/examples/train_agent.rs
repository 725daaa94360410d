//! Trains a Q-table for one reward and shows the greedy route from each
//! canonical start.
//!
//! cargo run --release --example train_agent -- [neg-crps|kl|neg-entropy] [episodes]

use hotspot::harness::canonical_starts;
use hotspot::qlearning::{rollout, train};
use hotspot::rng::seeded;
use hotspot::{Environment, Policy, ResetOptions, RewardKind, ScenarioConfig, TrainConfig};

fn main() -> hotspot::Result<()> {
    let mut args = std::env::args().skip(1);
    let kind: RewardKind = args.next().map_or(Ok(RewardKind::NegCrps), |s| s.parse())?;
    let episodes: usize = args.next().map_or(50_000, |s| s.parse().expect("episodes must be an integer"));
    let sc = ScenarioConfig::default();
    let cfg = TrainConfig { episodes, reward_kind: kind, seed: 11, ..TrainConfig::default() };
    let outcome = train(&cfg, &sc)?;
    let block = (episodes / 10).max(1);
    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
    println!(
        "{kind}: first {block} episodes average {:.3}, last {block} average {:.3}",
        mean(&outcome.curve[..block]),
        mean(&outcome.curve[episodes - block..])
    );

    let policy = Policy::Greedy(outcome.table);
    let starts = canonical_starts(&sc)?;
    let mut env = Environment::new(sc.clone(), kind)?;
    println!("peak cell {:?}", sc.max_concentration_cell());
    for (label, start) in [("upwind", starts.upwind), ("downwind", starts.downwind), ("crosswind", starts.crosswind)] {
        let rec = rollout(&policy, &mut env, &ResetOptions { true_flux: Some(250.0), start: Some(start) }, &mut seeded(0))?;
        let cells: Vec<String> = rec.cells().map(|(x, y)| format!("{x}{y}")).collect();
        println!("{label:>9}: {}  CRPS {:.3}", cells.join(" "), rec.final_crps.expect("complete"));
    }
    Ok(())
}
