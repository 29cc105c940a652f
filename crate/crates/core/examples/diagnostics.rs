//! Posterior summaries, effective sample size, box-whisker statistics and
//! a kernel density grid from a short chain.

use plume_inversion::diagnostics::{box_whisker, kde_grid, model_fit, summarize};
use plume_inversion::harness::scenario::build_problem;
use plume_inversion::harness::{simulate_dataset, ScalePreset, ScenarioConfig};
use plume_inversion::inference::{run_chain, DispersionMode};
use plume_inversion::plume::AscTables;

fn main() -> plume_inversion::Result<()> {
    let tables = AscTables::shipped();
    let mut cfg = ScenarioConfig::default();
    cfg.apply_scale(ScalePreset::Smoke);
    let data = simulate_dataset(&cfg, &tables)?;
    let problem = build_problem(&cfg, &data, DispersionMode::EstimateDraxler, cfg.base.source, &tables)?;
    let out = run_chain(&problem, &cfg.sampler, cfg.seeds.chain)?;

    let s = summarize(&out.trace)?;
    println!("{} kept draws, acceptance {:.2}", s.n_draws, s.acceptance_rate);
    for p in s.params.iter().take(8) {
        println!("{:8} median {:11.4e}  sd {:10.3e}  ess {:6.1}", p.name, p.median, p.sd, p.ess);
    }

    let rate = out.trace.column("rate").expect("rate column");
    let b = box_whisker(&rate);
    println!(
        "\nrate box: [{:.4e} | {:.4e} {:.4e} {:.4e} | {:.4e}], {} outliers",
        b.whisker_lo, b.q1, b.median, b.q3, b.whisker_hi, b.n_outliers
    );
    let kde = kde_grid(&rate, 9);
    for (x, d) in kde {
        println!("{x:.4e} {}", "#".repeat((d / 2e5).round() as usize));
    }

    let fit = model_fit("est-draxler", &problem, &out.trace)?;
    println!("\nBIC {:.1}, RMSE {:.3e} ppm over {} observations", fit.bic, fit.rmse, fit.n_obs);
    Ok(())
}
