//! Generates the level-M synthetic data set and writes it to a directory
//! (default `target/level-m`), in the layout `plume-inv invert --data` reads.

use std::path::PathBuf;

use plume_inversion::harness::commands::cmd_simulate;
use plume_inversion::harness::ScenarioConfig;

fn main() -> plume_inversion::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| "target/level-m".into());
    let cfg = ScenarioConfig::default();
    let data = cmd_simulate(&cfg, &out)?;
    let t = data.truth.as_ref().expect("synthetic data carry truth");
    let d = &data.observations.d;
    let peak = d.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    println!("wrote {} observations from {} sensors to {}", d.len(), data.array.sensors.len(), out.display());
    println!("truth: rate {:e} kg/s at ({}, {}), noise var {:e}", t.rate, t.location[0], t.location[1], t.noise_var);
    println!("peak reading {peak:.4} ppm over a background near {:.3}", t.beta[0]);
    Ok(())
}
