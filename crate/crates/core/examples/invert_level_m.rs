//! Level-M inversion with all four dispersion parameters estimated.
//! Pass `smoke`, `desk` or `paper` to choose the chain length.

use plume_inversion::diagnostics::summarize;
use plume_inversion::harness::scenario::build_problem;
use plume_inversion::harness::{simulate_dataset, ScalePreset, ScenarioConfig};
use plume_inversion::inference::{DispersionMode, Sampler};
use plume_inversion::plume::AscTables;

fn main() -> plume_inversion::Result<()> {
    let scale: ScalePreset = std::env::args().nth(1).as_deref().unwrap_or("smoke").parse()?;
    let tables = AscTables::shipped();
    let mut cfg = ScenarioConfig::default();
    cfg.apply_scale(scale);
    let data = simulate_dataset(&cfg, &tables)?;
    let truth = data.truth.clone().expect("synthetic data carry truth");
    let problem = build_problem(&cfg, &data, DispersionMode::EstimateDraxler, cfg.base.source, &tables)?;

    let mut sampler = Sampler::new(&problem, cfg.sampler.clone(), cfg.seeds.chain)?;
    let init = sampler.initialization().expect("fresh chain").clone();
    println!(
        "grid start: x {:.1}, y {:.1}, rate {:.3e}",
        init.grid_best[0], init.grid_best[1], init.grid_best[2]
    );
    let n = cfg.sampler.n_iter;
    for k in 1..=4 {
        sampler.run_until(k * n / 4)?;
        let row = sampler.trace().rows.last().expect("non-empty trace");
        println!(
            "iter {:6}: rate {:.4e}, x {:.2}, y {:.2}, step {:.3}",
            row.iteration + 1,
            row.params[0],
            row.params[1],
            row.params[2],
            row.step_size
        );
    }
    let summary = summarize(sampler.trace())?;
    println!("\nacceptance {:.2}", summary.acceptance_rate);
    println!("{:8} {:>12} {:>12} {:>12} {:>12} {:>7}", "param", "truth", "mean", "q2.5", "q97.5", "ess");
    for p in summary.params.iter().filter(|p| truth.value(&p.name).is_some()) {
        println!(
            "{:8} {:12.5e} {:12.5e} {:12.5e} {:12.5e} {:7.0}",
            p.name,
            truth.value(&p.name).unwrap(),
            p.mean,
            p.q025,
            p.q975,
            p.ess
        );
    }
    Ok(())
}
