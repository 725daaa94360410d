//! Draws the lognormal prior ensemble and assimilates repeated observations at
//! the peak cell, printing how the estimate tightens around the true flux.

use hotspot::environment::observe;
use hotspot::rng::seeded;
use hotspot::{assimilate, crps_ensemble, FluxEnsemble, ScenarioConfig};

fn main() -> hotspot::Result<()> {
    let sc = ScenarioConfig::default();
    let truth = 250.0;
    let mut rng = seeded(7);
    let prior = sc.prior;
    println!(
        "prior: median {:.1}, mode {:.1}, mean {:.1} (mu {:.4}, sigma {:.4})",
        prior.median(),
        prior.mode(),
        prior.mean(),
        prior.mu,
        prior.sigma
    );

    let cell = sc.max_concentration_cell();
    let forward = sc.cell_response(cell.0, cell.1);
    let mut ensemble = FluxEnsemble::sample_prior(&prior, sc.ensemble_size, &mut rng)?;
    println!("{:>4} {:>9} {:>9} {:>9} {:>8} {:>8}", "obs", "ppm", "mean", "median", "sd", "CRPS");
    let s = ensemble.stats();
    println!("{:>4} {:>9} {:>9.2} {:>9.2} {:>8.2} {:>8.3}", 0, "-", s.mean, s.median, s.sd, crps_ensemble(&ensemble, truth));
    for t in 0..sc.episode_length {
        let obs = observe(&sc, cell, t, truth, &mut rng)?;
        ensemble = assimilate(&ensemble, &obs, &forward, &sc.enkf, &mut rng)?;
        let s = ensemble.stats();
        println!(
            "{:>4} {:>9.2} {:>9.2} {:>9.2} {:>8.2} {:>8.3}",
            t + 1,
            obs.value,
            s.mean,
            s.median,
            s.sd,
            crps_ensemble(&ensemble, truth)
        );
    }
    Ok(())
}
