//! Reference implementations written independently of the library, used as
//! oracles by several test targets.
#![allow(dead_code)]

use plume_inversion::harness::ScenarioConfig;

/// Reflected Gaussian plume in PPM, with the image offsets written out
/// with floor division on integers.
#[allow(clippy::too_many_arguments)]
pub fn plume_ref(
    rate: f64,
    crosswind: f64,
    vertical: f64,
    height: f64,
    sigma_h: f64,
    sigma_v: f64,
    speed: f64,
    abl: f64,
    n_refl: u32,
    density: f64,
) -> f64 {
    let g = |z: f64| (-z * z / (2.0 * sigma_v * sigma_v)).exp();
    let mut total = g(vertical);
    for j in 1..=n_refl as i64 {
        let sgn = if j % 2 == 0 { 1.0 } else { -1.0 };
        let a = 2.0 * (j + 1).div_euclid(2) as f64 * abl + sgn * (vertical + height) - height;
        let b = 2.0 * j.div_euclid(2) as f64 * abl - sgn * (vertical + height) + height;
        total += g(a) + g(b);
    }
    1e6 / density * rate / (2.0 * std::f64::consts::PI * speed * sigma_h * sigma_v)
        * (-crosswind * crosswind / (2.0 * sigma_h * sigma_h)).exp()
        * total
}

pub fn draxler_sigma(a: f64, b: f64, downwind: f64, gamma: f64, aperture: f64) -> f64 {
    (a * (downwind * gamma.tan()).powf(b) + aperture).max(1e-6)
}

/// Unit-rate response of point receptors to a single source under the
/// Draxler scheme, one row per (sensor, time), sensor-major.
pub fn point_responses(
    positions: &[[f64; 3]],
    source: [f64; 3],
    cfg: &ScenarioConfig,
    wind: &plume_inversion::wind::WindRecord,
    p: plume_inversion::plume::DraxlerParams,
) -> Vec<f64> {
    let src = &cfg.base.source;
    let at = &cfg.atmosphere;
    let mut out = vec![];
    for r in positions {
        for t in 0..wind.len() {
            let th = wind.direction[t].to_radians();
            let (dx, dy) = (r[0] - source[0], r[1] - source[1]);
            let down = dx * th.cos() + dy * th.sin();
            if down <= 0.0 {
                out.push(0.0);
                continue;
            }
            let cross = -dx * th.sin() + dy * th.cos();
            let sh = draxler_sigma(p.a_h, p.b_h, down, wind.gamma_h[t], src.half_width);
            let sv = draxler_sigma(p.a_v, p.b_v, down, wind.gamma_v[t], src.half_height);
            out.push(plume_ref(
                1.0,
                cross,
                r[2] - source[2],
                src.height,
                sh,
                sv,
                wind.speed[t],
                at.abl_height,
                at.n_refl,
                at.gas_density,
            ));
        }
    }
    out
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}
