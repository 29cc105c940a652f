use plume_inversion::wind::{
    rolling_direction_std, simulate_ou, synthesize_wind, OuParams, WindRecord, WindScenario, GAMMA_FLOOR,
    SPEED_FLOOR,
};
use proptest::prelude::*;

#[test]
fn alternating_directions_approach_one_degree() {
    let dirs: Vec<f64> = (0..400).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
    let s = rolling_direction_std(&dirs, 200.0, 1.0).unwrap();
    let target = 1f64.to_radians();
    assert!((s[200] - target).abs() < 1e-12);
}

#[test]
fn level_m_record_respects_floors_and_coverage() {
    let w = synthesize_wind(&WindScenario::default(), 4).unwrap();
    assert_eq!(w.len(), 100);
    for v in [&w.speed, &w.direction, &w.gamma_h, &w.gamma_v] {
        assert_eq!(v.len(), w.times.len());
    }
    assert!(w.speed.iter().all(|&s| s >= SPEED_FLOOR));
    assert!(w.gamma_h.iter().chain(&w.gamma_v).all(|&g| g >= GAMMA_FLOOR));
    let lo = w.direction.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = w.direction.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    assert!(hi - lo <= 140.0 + 1e-9 && hi - lo >= 0.8 * 140.0);
}

#[test]
fn csv_round_trip_is_exact() {
    let w = synthesize_wind(&WindScenario::default(), 9).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("wind.csv");
    w.write_csv(&p).unwrap();
    let header = std::fs::read_to_string(&p).unwrap().lines().next().unwrap().to_string();
    assert_eq!(header, "t,speed,direction,gamma_h,gamma_v");
    assert_eq!(WindRecord::read_csv(&p).unwrap(), w);
}

#[test]
fn lag_one_autocorrelation() {
    let p = OuParams {
        mean: 0.0,
        std: 2.0,
        theta: 0.1,
        dt: 0.5,
        initial: None,
    };
    let x = simulate_ou(&p, 400_000, 5).unwrap();
    let m = x.iter().sum::<f64>() / x.len() as f64;
    let c0: f64 = x.iter().map(|v| (v - m).powi(2)).sum();
    let c1: f64 = x.windows(2).map(|w| (w[0] - m) * (w[1] - m)).sum();
    assert!((c1 / c0 - 0.95).abs() < 0.005);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rolling_std_ignores_rotation(
        dirs in proptest::collection::vec(-40.0..40.0f64, 5..60),
        shift in -720.0..720.0f64,
        window in 1.0..20.0f64,
    ) {
        let a = rolling_direction_std(&dirs, window, 1.0).unwrap();
        let shifted: Vec<f64> = dirs.iter().map(|d| (d + shift).rem_euclid(360.0)).collect();
        let b = rolling_direction_std(&shifted, window, 1.0).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn vertical_spread_never_zero(seed in 0u64..1000, std in 0.0..20.0f64) {
        let s = WindScenario { vertical_std_deg: std, ..WindScenario::default() };
        let w = synthesize_wind(&s, seed).unwrap();
        prop_assert!(w.gamma_v.iter().all(|&g| g >= GAMMA_FLOOR && g.is_finite()));
    }

    #[test]
    fn seeded_wind_is_reproducible(seed in 0u64..10_000) {
        let s = WindScenario::default();
        prop_assert_eq!(synthesize_wind(&s, seed).unwrap(), synthesize_wind(&s, seed).unwrap());
    }
}
