//! Flies one episode with uniformly random legal moves and prints the trace.

use rand::seq::IteratorRandom;

use hotspot::environment::legal_actions;
use hotspot::rng::seeded;
use hotspot::{Environment, ResetOptions, RewardKind, ScenarioConfig};

fn main() -> hotspot::Result<()> {
    let sc = ScenarioConfig::default();
    let mut env = Environment::new(sc.clone(), RewardKind::NegCrps)?;
    let mut rng = seeded(3);
    let mut s = env.reset(&ResetOptions { true_flux: Some(250.0), start: None }, &mut rng)?;
    println!("start {:?}, true flux 250", s.cell());
    loop {
        let a = legal_actions(&s, &sc)?.iter().choose(&mut rng).expect("every cell has a legal move");
        let out = env.step(a, &mut rng)?;
        let obs = env.record().expect("episode running").observations.last().copied().expect("observed");
        println!(
            "t={:>2} {:<6} -> {:?}  {:>7.2} ppm  reward {:>9.3}",
            out.state.t,
            format!("{a:?}"),
            out.state.cell(),
            obs.value,
            out.reward
        );
        s = out.state;
        if out.done {
            break;
        }
    }
    let rec = env.take_record().expect("episode finished");
    let post = rec.final_posterior.expect("complete");
    println!(
        "posterior mean {:.2}, median {:.2}, sd {:.2}; final CRPS {:.3}",
        post.stats.mean,
        post.stats.median,
        post.stats.sd,
        rec.final_crps.expect("complete")
    );
    Ok(())
}
