//! Evaluates the shipped serpentine path and a peak-only path over many
//! flights.

use hotspot::harness::{default_grid_path, evaluate, EvalConfig};
use hotspot::{Policy, ScenarioConfig};

fn main() -> hotspot::Result<()> {
    let sc = ScenarioConfig::default();
    let cfg = EvalConfig { n_flights: 2000, seed: 1, ..EvalConfig::default() };
    let peak = sc.max_concentration_cell();
    for (name, path) in [("grid path", default_grid_path()), ("peak only", vec![peak; sc.episode_length])] {
        let report = evaluate(&Policy::FixedPath(path), &cfg, &sc)?;
        let g = &report.groups[0];
        println!("{name:>10}: CRPS {:.2} ± {:.2} over {} flights", g.mean_crps, g.sd_crps, g.n_flights);
    }
    Ok(())
}
