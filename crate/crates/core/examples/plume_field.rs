//! Prints the noise-free concentration field at flight altitude as a text map
//! and marks the source and the peak cell.
//!
//! cargo run --example plume_field -- [flux]

use hotspot::harness::dump_field;
use hotspot::ScenarioConfig;

fn main() -> hotspot::Result<()> {
    let flux: f64 = std::env::args().nth(1).map_or(Ok(250.0), |s| s.parse()).expect("flux must be a number");
    let sc = ScenarioConfig::default();
    let field = dump_field(&sc, flux)?;
    let peak = sc.max_concentration_cell();
    let src = sc.plume.source;
    let src_cell = ((src.x / sc.cell_size()) as usize, (src.y / sc.cell_size()) as usize);

    println!(
        "flux {flux} mg/m²/s, wind from {}° at {} m/s, class {}",
        sc.plume.wind_direction_deg,
        sc.plume.wind_speed,
        sc.plume.stability_class.pasquill_letter()
    );
    println!("ppm at z = {} m (north up, S = source cell, * = peak)", sc.measurement_z);
    for cy in (0..sc.grid_ny).rev() {
        print!("{cy:>2} ");
        for cx in 0..sc.grid_nx {
            let c = &field[cy * sc.grid_nx + cx];
            let mark = if (cx, cy) == peak {
                '*'
            } else if (cx, cy) == src_cell {
                'S'
            } else {
                ' '
            };
            print!("{:>7.1}{mark}", c.ppm);
        }
        println!();
    }
    print!("   ");
    for cx in 0..sc.grid_nx {
        print!("{cx:>7} ");
    }
    println!();
    Ok(())
}
