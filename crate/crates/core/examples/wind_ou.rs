//! Ornstein-Uhlenbeck wind series: stationary moments and a synthetic
//! record at the three direction-coverage levels.

use plume_inversion::diagnostics::{mean, sd};
use plume_inversion::wind::{simulate_ou, synthesize_wind, OuParams, WindScenario};

fn main() -> plume_inversion::Result<()> {
    let p = OuParams {
        mean: 6.0,
        std: 1.0,
        theta: 0.02,
        dt: 1.0,
        initial: None,
    };
    let x = simulate_ou(&p, 200_000, 7)?;
    let m = mean(&x);
    let lag1 = x.windows(2).map(|w| (w[0] - m) * (w[1] - m)).sum::<f64>()
        / x.iter().map(|v| (v - m).powi(2)).sum::<f64>();
    println!("OU: mean {m:.3}, sd {:.3} (target 1), lag-1 {lag1:.4} (target {:.4})", sd(&x), 1.0 - p.theta * p.dt);

    for coverage in [60.0, 140.0, 360.0] {
        let s = WindScenario {
            coverage_deg: coverage,
            ..WindScenario::default()
        };
        let w = synthesize_wind(&s, 1)?;
        let lo = w.direction.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = w.direction.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        println!(
            "coverage {coverage:5.0}: direction [{lo:7.2}, {hi:7.2}], mean speed {:.2}, mean gamma_h {:.3} rad",
            mean(&w.speed),
            mean(&w.gamma_h)
        );
    }
    Ok(())
}
