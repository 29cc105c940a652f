//! Emission-rate bias when a_H is fixed at half and twice its true value,
//! against the run that estimates all dispersion parameters.

use plume_inversion::diagnostics::summarize;
use plume_inversion::harness::scenario::build_problem;
use plume_inversion::harness::{simulate_dataset, ScalePreset, ScenarioConfig};
use plume_inversion::inference::{run_chain, DispersionMode};
use plume_inversion::plume::{AscTables, DispersionSpec};

fn main() -> plume_inversion::Result<()> {
    let tables = AscTables::shipped();
    let mut cfg = ScenarioConfig::default();
    cfg.apply_scale(ScalePreset::Smoke);
    cfg.levels.dpv = [cfg.misspec.truth; 3];
    let data = simulate_dataset(&cfg, &tables)?;
    let truth = cfg.misspec.truth;
    let rate = cfg.ser();

    let mut runs = vec![("estimated".to_string(), DispersionMode::EstimateDraxler)];
    for f in [0.5, 2.0] {
        let mut p = truth;
        p.a_h *= f;
        runs.push((format!("a_H x {f}"), DispersionMode::Fixed { spec: DispersionSpec::Draxler(p) }));
    }
    println!("true rate {rate:e}");
    for (label, mode) in runs {
        let problem = build_problem(&cfg, &data, mode, cfg.base.source, &tables)?;
        let out = run_chain(&problem, &cfg.sampler, cfg.seeds.chain)?;
        let s = summarize(&out.trace)?;
        let r = s.get("rate").expect("rate is sampled");
        println!("{label:>10}: mean {:.4e} [{:.4e}, {:.4e}], bias {:+.1}%", r.mean, r.q025, r.q975, 100.0 * (r.mean / rate - 1.0));
    }
    Ok(())
}
