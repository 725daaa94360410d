//! Compares the three rewards on ensembles that are wide, narrow and biased.

use hotspot::rng::seeded;
use hotspot::{step_reward, FluxEnsemble, LognormalParams, RewardKind};

fn main() -> hotspot::Result<()> {
    let prior = LognormalParams::default();
    let truth: f64 = 250.0;
    let mut rng = seeded(1);
    let cases = [
        ("prior draw", FluxEnsemble::sample_prior(&prior, 100, &mut rng)?),
        ("narrow at truth", FluxEnsemble::sample_prior(&LognormalParams::new(truth.ln(), 0.02)?, 100, &mut rng)?),
        ("narrow, 20% high", FluxEnsemble::sample_prior(&LognormalParams::new((1.2 * truth).ln(), 0.02)?, 100, &mut rng)?),
        ("wide at truth", FluxEnsemble::sample_prior(&LognormalParams::new(truth.ln(), 0.5)?, 100, &mut rng)?),
    ];
    print!("{:<18}", "ensemble");
    for kind in RewardKind::ALL {
        print!("{:>14}", kind.as_str());
    }
    println!();
    for (name, ensemble) in &cases {
        print!("{name:<18}");
        for kind in RewardKind::ALL {
            print!("{:>14.4}", step_reward(kind, ensemble, &prior, truth)?);
        }
        println!();
    }
    println!("only neg-crps sees the true flux; kl and neg-entropy reward any confident posterior");
    Ok(())
}
