//! Trains briefly under each reward and prints the smoothed, range-normalized
//! learning curves side by side.

use hotspot::harness::postprocess_curve;
use hotspot::qlearning::train;
use hotspot::{RewardKind, ScenarioConfig, TrainConfig};

fn main() -> hotspot::Result<()> {
    let sc = ScenarioConfig::default();
    let episodes = 20_000;
    let window = 1000;
    let mut curves = Vec::new();
    for kind in RewardKind::ALL {
        let cfg = TrainConfig { episodes, reward_kind: kind, seed: 5, ..TrainConfig::default() };
        curves.push(postprocess_curve(&train(&cfg, &sc)?.curve, window)?);
    }
    print!("{:>8}", "episode");
    for kind in RewardKind::ALL {
        print!("{:>13}", kind.as_str());
    }
    println!();
    for k in (0..curves[0].len()).step_by(1000) {
        print!("{:>8}", curves[0][k].episode);
        for c in &curves {
            print!("{:>13.3}", c[k].normalized);
        }
        println!();
    }
    Ok(())
}
