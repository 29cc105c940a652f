mod common;

use common::{point_responses, rel_err};
use plume_inversion::harness::scenario::sensor_array;
use plume_inversion::harness::{simulate_dataset, ScenarioConfig};
use plume_inversion::plume::{AscTables, AtmosphereSpec, DispersionSpec, DraxlerParams, SourceGeometry};
use plume_inversion::sensing::chilbolton::{ingest, AggregationConfig};
use plume_inversion::sensing::{
    beam_receptors, coupling_matrix, synthesize_observations, BackgroundModel, ObservationLayout, Sensor,
    SensorArray, SensorGeometry,
};
use plume_inversion::wind::WindRecord;
use proptest::prelude::*;

fn wind(direction: &[f64]) -> WindRecord {
    let n = direction.len();
    WindRecord {
        times: (0..n).map(|t| t as f64).collect(),
        speed: vec![4.0; n],
        direction: direction.to_vec(),
        gamma_h: vec![0.3; n],
        gamma_v: vec![0.2; n],
    }
}

fn src() -> SourceGeometry {
    SourceGeometry {
        location: [0.0, 0.0, 1.0],
        height: 1.0,
        half_width: 0.5,
        half_height: 0.5,
    }
}

fn points(ps: &[[f64; 3]]) -> SensorArray {
    SensorArray {
        sample_rate: 1.0,
        beam_spacing: 0.4,
        sensors: ps
            .iter()
            .enumerate()
            .map(|(i, p)| Sensor {
                id: format!("p{i}"),
                geometry: SensorGeometry::Point { position: *p },
            })
            .collect(),
    }
}

fn unit() -> DispersionSpec {
    DispersionSpec::Draxler(DraxlerParams::UNIT)
}

#[test]
fn level_m_columns_match_reference() {
    let cfg = ScenarioConfig::default();
    let tables = AscTables::shipped();
    let data = simulate_dataset(&cfg, &tables).unwrap();
    let array = sensor_array(&cfg);
    let a = coupling_matrix(
        &[cfg.base.source],
        &array,
        &data.observations.wind,
        &DispersionSpec::Draxler(cfg.dpv()),
        &cfg.atmosphere,
        &tables,
    )
    .unwrap();
    let positions: Vec<[f64; 3]> = array
        .sensors
        .iter()
        .map(|s| match s.geometry {
            SensorGeometry::Point { position } => position,
            _ => unreachable!(),
        })
        .collect();
    let r = point_responses(&positions, cfg.base.source.location, &cfg, &data.observations.wind, cfg.dpv());
    assert_eq!(a.n_obs(), 3600);
    let sum_a: f64 = (0..a.n_obs()).map(|k| a.get(k, 0)).sum();
    let sum_r: f64 = r.iter().sum();
    assert!(rel_err(sum_a, sum_r) < 1e-10);
    for (k, v) in r.iter().enumerate() {
        assert!(rel_err(a.get(k, 0), *v) < 1e-10 || (a.get(k, 0) - v).abs() < 1e-300);
    }
}

#[test]
fn all_upwind_gives_zero_matrix() {
    let array = points(&[[-10.0, 0.0, 1.0], [-50.0, 5.0, 2.0]]);
    let a = coupling_matrix(&[src()], &array, &wind(&[0.0, 10.0, -20.0]), &unit(), &AtmosphereSpec::default(), &AscTables::shipped()).unwrap();
    assert!((0..a.n_obs()).all(|k| a.get(k, 0) == 0.0));
}

#[test]
fn point_equals_degenerate_beam() {
    let p = [40.0, 3.0, 1.5];
    let mut array = points(&[p]);
    array.sensors.push(Sensor {
        id: "beam".into(),
        geometry: SensorGeometry::Beam {
            origin: p,
            reflector: [p[0], p[1], p[2] + 1e-9],
        },
    });
    array.beam_spacing = 1e-9;
    let a = coupling_matrix(&[src()], &array, &wind(&[0.0, 5.0]), &unit(), &AtmosphereSpec::default(), &AscTables::shipped()).unwrap();
    for t in 0..2 {
        assert!(rel_err(a.get(t, 0), a.get(2 + t, 0)) < 1e-8);
    }
}

#[test]
fn synthesis_without_noise_is_exact() {
    let array = points(&[[30.0, 0.0, 1.0], [30.0, 4.0, 1.0]]);
    let w = wind(&[0.0, 3.0, 6.0]);
    let a = coupling_matrix(&[src()], &array, &w, &unit(), &AtmosphereSpec::default(), &AscTables::shipped()).unwrap();
    let layout = ObservationLayout::full(array.ids(), w.len());
    let bg = BackgroundModel::uniform(2, 1.9, 0.0);
    let syn = synthesize_observations(&a, &[2e-3], &bg, 0.0, &layout, &w, 3).unwrap();
    for k in 0..a.n_obs() {
        assert_eq!(syn.observations.d[k], a.get(k, 0) * 2e-3 + 1.9);
    }
}

#[test]
fn null_source_averages_to_background() {
    let array = points(&[[30.0, 0.0, 1.0], [30.0, 4.0, 1.0], [20.0, -3.0, 2.0]]);
    let n_t = 400;
    let w = wind(&vec![0.0; n_t]);
    let a = coupling_matrix(&[src()], &array, &w, &unit(), &AtmosphereSpec::default(), &AscTables::shipped()).unwrap();
    let layout = ObservationLayout::full(array.ids(), n_t);
    let bg = BackgroundModel {
        mean: vec![1.9, 2.0, 2.1],
        var: vec![0.0; 3],
    };
    let sigma = 0.01;
    let syn = synthesize_observations(&a, &[0.0], &bg, sigma * sigma, &layout, &w, 8).unwrap();
    for j in 0..3 {
        let m: f64 = syn.observations.d[j * n_t..(j + 1) * n_t].iter().sum::<f64>() / n_t as f64;
        assert!((m - bg.mean[j]).abs() < 3.0 * sigma / (n_t as f64).sqrt());
    }
}

#[test]
fn level_m_noise_variance_is_recovered() {
    let cfg = ScenarioConfig::default();
    let tables = AscTables::shipped();
    let data = simulate_dataset(&cfg, &tables).unwrap();
    let t = data.truth.unwrap();
    let array = sensor_array(&cfg);
    let a = coupling_matrix(&[cfg.base.source], &array, &data.observations.wind, &DispersionSpec::Draxler(cfg.dpv()), &cfg.atmosphere, &tables).unwrap();
    let layout = &data.observations.layout;
    let resid: Vec<f64> = (0..a.n_obs())
        .map(|k| data.observations.d[k] - a.get(k, 0) * t.rate - t.beta[layout.sensor_index[k]])
        .collect();
    let var = resid.iter().map(|r| r * r).sum::<f64>() / resid.len() as f64;
    assert!((var / 1e-6 - 1.0).abs() < 0.1, "residual variance {var:e}");
}

#[test]
fn ten_metre_beam_has_26_points() {
    assert_eq!(beam_receptors([0.0; 3], [10.0, 0.0, 0.0], 0.4).unwrap().len(), 26);
    assert_eq!(beam_receptors([0.0; 3], [0.0, 1.0, 0.0], 1.0).unwrap().len(), 2);
}

fn write_trial(dir: &std::path::Path, ppm: impl Fn(usize, usize) -> f64, n_scans: usize) {
    let beams = [("b1", [60.0, -5.0, 1.5]), ("b2", [60.0, 5.0, 1.5])];
    let array = SensorArray {
        sample_rate: 1.0 / 60.0,
        beam_spacing: 1.0,
        sensors: beams
            .iter()
            .map(|(id, r)| Sensor {
                id: id.to_string(),
                geometry: SensorGeometry::Beam {
                    origin: [20.0, 0.0, 1.5],
                    reflector: *r,
                },
            })
            .collect(),
    };
    array.write_json(dir.join("sensors.json")).unwrap();
    let mut c = String::from("time,beam_id,ppm\n");
    for k in 0..n_scans {
        let b = k % 2;
        c += &format!("{},{},{}\n", 3 * k, beams[b].0, ppm(k, b));
    }
    std::fs::write(dir.join("concentrations.csv"), c).unwrap();
    let mut w = String::from("time,speed,direction_deg,elevation_deg\n");
    for t in 0..3 * n_scans {
        w += &format!("{t},3.0,{},{}\n", 10.0 * ((t as f64) / 7.0).sin(), 2.0 * ((t as f64) / 5.0).cos());
    }
    std::fs::write(dir.join("wind.csv"), w).unwrap();
}

#[test]
fn twenty_scans_make_one_window() {
    let dir = tempfile::tempdir().unwrap();
    write_trial(dir.path(), |_, _| 2.0, 40);
    let t = ingest(dir.path(), &AggregationConfig::default()).unwrap();
    assert_eq!(t.observations.d.len(), 4);
    assert_eq!(t.report.windows_kept, 2);
    assert!(t.observations.d.iter().all(|&v| v == 2.0));
}

#[test]
fn aggregation_conserves_the_mean() {
    let dir = tempfile::tempdir().unwrap();
    let f = |k: usize, b: usize| 1.9 + 0.013 * ((k * 7919 + b * 31) % 97) as f64;
    write_trial(dir.path(), f, 200);
    let t = ingest(dir.path(), &AggregationConfig::default()).unwrap();
    let layout = &t.observations.layout;
    for b in 0..2 {
        let raw: Vec<f64> = (0..200).filter(|k| k % 2 == b).map(|k| f(k, b)).collect();
        let raw_mean = raw.iter().sum::<f64>() / raw.len() as f64;
        let win: Vec<f64> = (0..layout.len())
            .filter(|&k| layout.sensor_index[k] == b)
            .map(|k| t.observations.d[k])
            .collect();
        let win_mean = win.iter().sum::<f64>() / win.len() as f64;
        assert!((raw_mean - win_mean).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn beam_lies_within_its_receptors(
        x0 in 10.0..80.0f64, y0 in -30.0..0.0f64, x1 in 10.0..80.0f64, y1 in 0.1..30.0f64,
        z in 0.5..4.0f64, dir in -30.0..30.0f64,
    ) {
        let origin = [x0, y0, z];
        let reflector = [x1, y1, z];
        let pts = beam_receptors(origin, reflector, 0.4).unwrap();
        let mut array = points(&pts);
        array.sensors.push(Sensor { id: "beam".into(), geometry: SensorGeometry::Beam { origin, reflector } });
        let a = coupling_matrix(&[src()], &array, &wind(&[dir]), &unit(), &AtmosphereSpec::default(), &AscTables::shipped()).unwrap();
        let n = pts.len();
        let lo = (0..n).map(|k| a.get(k, 0)).fold(f64::INFINITY, f64::min);
        let hi = (0..n).map(|k| a.get(k, 0)).fold(f64::NEG_INFINITY, f64::max);
        let beam = a.get(n, 0);
        prop_assert!(beam >= lo * (1.0 - 1e-12) && beam <= hi * (1.0 + 1e-12));
    }

    #[test]
    fn permuting_sensors_permutes_rows(perm in Just(vec![0usize, 1, 2, 3]).prop_shuffle()) {
        let ps = [[30.0, 0.0, 1.0], [40.0, 5.0, 2.0], [25.0, -6.0, 1.0], [60.0, 2.0, 3.0]];
        let w = wind(&[0.0, 8.0, -4.0]);
        let base = points(&ps);
        let mut shuffled = base.clone();
        shuffled.sensors = perm.iter().map(|&i| base.sensors[i].clone()).collect();
        let tables = AscTables::shipped();
        let a = coupling_matrix(&[src()], &base, &w, &unit(), &AtmosphereSpec::default(), &tables).unwrap();
        let b = coupling_matrix(&[src()], &shuffled, &w, &unit(), &AtmosphereSpec::default(), &tables).unwrap();
        for (new_j, &old_j) in perm.iter().enumerate() {
            for t in 0..3 {
                prop_assert_eq!(b.get(new_j * 3 + t, 0), a.get(old_j * 3 + t, 0));
            }
        }
    }

    #[test]
    fn coupling_is_rate_free_and_predictions_linear(rate in 1e-6..1.0f64) {
        let array = points(&[[30.0, 1.0, 1.0], [45.0, -2.0, 1.5]]);
        let w = wind(&[0.0, 4.0]);
        let a = coupling_matrix(&[src()], &array, &w, &unit(), &AtmosphereSpec::default(), &AscTables::shipped()).unwrap();
        let one = a.apply(&[rate]).unwrap();
        let two = a.apply(&[2.0 * rate]).unwrap();
        for (x, y) in one.iter().zip(&two) {
            prop_assert!(rel_err(2.0 * x, *y) < 1e-15);
        }
    }
}
