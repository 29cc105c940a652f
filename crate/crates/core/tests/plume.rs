mod common;

use common::{plume_ref, rel_err};
use plume_inversion::plume::{
    plume_concentration, receptor_frame, wind_sigmas, AscTables, AtmosphereSpec, DispersionSpec,
    DraxlerParams, ReceptorFrame, SourceGeometry,
};
use proptest::prelude::*;

fn source(height: f64) -> SourceGeometry {
    SourceGeometry {
        location: [0.0, 0.0, height],
        height,
        half_width: 1.0,
        half_height: 1.0,
    }
}

fn frame(crosswind: f64, vertical: f64) -> ReceptorFrame {
    ReceptorFrame {
        downwind: 50.0,
        crosswind,
        vertical,
        upwind: false,
    }
}

#[test]
fn matches_extended_precision_oracle() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/plume_oracle.csv");
    let mut rdr = csv::Reader::from_path(path).unwrap();
    let mut worst: f64 = 0.0;
    let mut n = 0;
    for row in rdr.records() {
        let r = row.unwrap();
        let v: Vec<f64> = r.iter().map(|s| s.parse().unwrap()).collect();
        let atmos = AtmosphereSpec {
            abl_height: v[7],
            n_refl: v[8] as u32,
            gas_density: v[9],
        };
        let c = plume_concentration(&source(v[3]), v[0], &frame(v[1], v[2]), v[4], v[5], v[6], &atmos).unwrap();
        worst = worst.max(rel_err(c, v[10]));
        n += 1;
    }
    assert_eq!(n, 1000);
    assert!(worst < 1e-10, "worst relative error {worst:e}");
}

#[test]
fn level_m_point_agrees_to_1e_12() {
    // 50 m downwind on the centreline, case-2 dispersion, gamma = 0.3 rad.
    let atmos = AtmosphereSpec::default();
    let sig = 50.0 * 0.3f64.tan() + 1.0;
    let c = plume_concentration(&source(5.0), 0.00039, &frame(0.0, 0.0), sig, sig, 6.0, &atmos).unwrap();
    let expected = 0.10652284932367298;
    assert!(rel_err(c, expected) < 1e-12);
}

#[test]
fn wind_blowing_north_puts_north_receptors_downwind() {
    // 90° counterclockwise from east is a wind blowing toward +y.
    let s = source(0.0);
    let f = receptor_frame([0.0, 100.0, 0.0], &s, 90.0).unwrap();
    assert!((f.downwind - 100.0).abs() < 1e-12 && f.crosswind.abs() < 1e-12 && !f.upwind);
    let f = receptor_frame([100.0, 0.0, 0.0], &s, 90.0).unwrap();
    assert!(f.downwind.abs() < 1e-12 && (f.crosswind.abs() - 100.0).abs() < 1e-12);
}

#[test]
fn reflection_series_has_converged_at_level_m() {
    let sig = 50.0 * 0.3f64.tan() + 1.0;
    let at = |n_refl| AtmosphereSpec {
        n_refl,
        ..AtmosphereSpec::default()
    };
    for vertical in [-4.0, 0.0, 6.0] {
        let c3 = plume_concentration(&source(5.0), 3.9e-4, &frame(3.0, vertical), sig, sig, 6.0, &at(3)).unwrap();
        let c50 = plume_concentration(&source(5.0), 3.9e-4, &frame(3.0, vertical), sig, sig, 6.0, &at(50)).unwrap();
        assert!(rel_err(c3, c50) < 1e-9);
    }
}

fn inputs() -> impl Strategy<Value = (f64, f64, f64, f64, f64, f64, f64, u32)> {
    (
        1e-6..1e-1f64,
        -200.0..200.0f64,
        -10.0..30.0f64,
        0.0..10.0f64,
        0.1..80.0f64,
        0.1..80.0f64,
        0.1..15.0f64,
        0u32..6,
    )
}

proptest! {
    #[test]
    fn concentration_is_non_negative((s, dh, dv, h, sh, sv, u, n) in inputs()) {
        let atmos = AtmosphereSpec { n_refl: n, ..AtmosphereSpec::default() };
        let c = plume_concentration(&source(h), s, &frame(dh, dv), sh, sv, u, &atmos).unwrap();
        prop_assert!(c >= 0.0 && c.is_finite());
    }

    #[test]
    fn crosswind_symmetric((s, dh, dv, h, sh, sv, u, n) in inputs()) {
        let atmos = AtmosphereSpec { n_refl: n, ..AtmosphereSpec::default() };
        let a = plume_concentration(&source(h), s, &frame(dh, dv), sh, sv, u, &atmos).unwrap();
        let b = plume_concentration(&source(h), s, &frame(-dh, dv), sh, sv, u, &atmos).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn decays_away_from_centreline((s, dh, dv, h, sh, sv, u, n) in inputs(), extra in 0.0..50.0f64) {
        let atmos = AtmosphereSpec { n_refl: n, ..AtmosphereSpec::default() };
        let near = plume_concentration(&source(h), s, &frame(dh.abs(), dv), sh, sv, u, &atmos).unwrap();
        let far = plume_concentration(&source(h), s, &frame(dh.abs() + extra, dv), sh, sv, u, &atmos).unwrap();
        prop_assert!(far <= near);
    }

    #[test]
    fn linear_in_rate((s, dh, dv, h, sh, sv, u, n) in inputs()) {
        let atmos = AtmosphereSpec { n_refl: n, ..AtmosphereSpec::default() };
        let one = plume_concentration(&source(h), s, &frame(dh, dv), sh, sv, u, &atmos).unwrap();
        let two = plume_concentration(&source(h), 2.0 * s, &frame(dh, dv), sh, sv, u, &atmos).unwrap();
        prop_assert!((two - 2.0 * one).abs() <= 1e-15 * two + 1e-300);
    }

    #[test]
    fn agrees_with_reference((s, dh, dv, h, sh, sv, u, n) in inputs()) {
        let atmos = AtmosphereSpec { n_refl: n, ..AtmosphereSpec::default() };
        let c = plume_concentration(&source(h), s, &frame(dh, dv), sh, sv, u, &atmos).unwrap();
        let r = plume_ref(s, dh, dv, h, sh, sv, u, atmos.abl_height, n, atmos.gas_density);
        prop_assert!(rel_err(c, r) < 1e-12 || (c < 1e-300 && r < 1e-300));
    }

    #[test]
    fn reflection_increments_shrink(dv in -5.0..500.0f64, sv in 1.0..300.0f64) {
        // Image sources move further from the receptor with every pair.
        let atmos = |n_refl| AtmosphereSpec { abl_height: 1000.0, n_refl, gas_density: 0.656 };
        let c = |n| plume_concentration(&source(5.0), 1e-3, &frame(0.0, dv), 10.0, sv, 5.0, &atmos(n)).unwrap();
        let mut prev = f64::INFINITY;
        for j in 1..6 {
            let inc = c(j) - c(j - 1);
            prop_assert!(inc >= 0.0 && inc <= prev);
            prev = inc;
        }
    }

    #[test]
    fn upwind_receptors_get_nothing(x in -300.0..-0.5f64, y in -100.0..100.0f64, s in 1e-6..1.0f64) {
        let src = source(1.0);
        let f = receptor_frame([x, y, 1.0], &src, 0.0).unwrap();
        prop_assert!(f.upwind);
        let c = plume_concentration(&src, s, &f, 5.0, 5.0, 3.0, &AtmosphereSpec::default()).unwrap();
        prop_assert_eq!(c, 0.0);
    }

    #[test]
    fn unit_draxler_without_aperture_is_geometric(down in 0.5..500.0f64, gh in 1e-3..1.5f64, gv in 1e-3..1.5f64) {
        let src = SourceGeometry { location: [0.0; 3], height: 0.0, half_width: 0.0, half_height: 0.0 };
        let f = receptor_frame([down, 0.0, 1.0], &src, 0.0).unwrap();
        let (sh, sv) = wind_sigmas(&DispersionSpec::Draxler(DraxlerParams::UNIT), &AscTables::shipped(), &f, gh, gv, &src).unwrap();
        prop_assert!(rel_err(sh, f.downwind * gh.tan()) < 1e-15);
        prop_assert!(rel_err(sv, f.downwind * gv.tan()) < 1e-15);
    }
}
