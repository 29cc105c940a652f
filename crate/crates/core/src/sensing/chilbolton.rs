//! Ingestion of open-path release-trial data and a synthetic generator for
//! data sets with the same layout.
//!
//! A data directory holds:
//!
//! * `sensors.json`: a [`SensorArray`] of beams (laser origin to reflector).
//! * `concentrations.csv`: columns `time,beam_id,ppm`, one row per beam
//!   scan. An empty `ppm` cell marks a failed scan.
//! * `wind.csv`: columns `time,speed,direction_deg,elevation_deg` from a
//!   sonic anemometer, sorted by time. Direction follows the crate
//!   convention (counterclockwise from east, toward which the wind blows).
//! * `release.json` (optional): a [`ReleaseInfo`].
//!
//! Times are seconds. Both streams are cut into tumbling windows of
//! `window` seconds starting at the earliest timestamp. Each window keeps
//! the mean beam concentration, the mean speed, the circular mean direction,
//! and the window mean of the rolling direction and elevation standard
//! deviations computed on the raw anemometer series.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{ObservationLayout, Observations, PlumeOperator, SensorArray, SensorGeometry, Sensor};
use crate::error::{Error, Result};
use crate::plume::{AscTables, AtmosphereSpec, DispersionSpec, DraxlerParams, SourceGeometry};
use crate::wind::{
    rolling_direction_std, simulate_ou, stream_rng, synthesize_wind, OuParams, WindRecord,
    WindScenario,
};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AggregationConfig {
    /// Tumbling window length, seconds.
    pub window: f64,
    /// Rolling window for the raw direction and elevation spread, seconds.
    pub gamma_window: f64,
}

impl Default for AggregationConfig {
    fn default() -> Self {
        Self {
            window: 60.0,
            gamma_window: 60.0,
        }
    }
}

/// Release metadata shipped with a trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReleaseInfo {
    pub source: SourceGeometry,
    /// Metered release rate, kg/s, when known.
    #[serde(default)]
    pub rate: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct IngestReport {
    pub concentration_rows: usize,
    pub wind_rows: usize,
    pub windows_kept: usize,
    /// Windows with no usable wind or no usable concentration.
    pub windows_dropped: usize,
    /// Kept windows in which a beam had no usable scan.
    pub missing_beam_windows: usize,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct TrialData {
    pub array: SensorArray,
    pub observations: Observations,
    pub release: Option<ReleaseInfo>,
    pub report: IngestReport,
}

#[derive(Debug, Deserialize, Serialize)]
struct ConcentrationRow {
    time: f64,
    beam_id: String,
    ppm: Option<f64>,
}

#[derive(Debug, Deserialize, Serialize)]
struct AnemometerRow {
    time: f64,
    speed: f64,
    direction_deg: f64,
    elevation_deg: f64,
}

/// Raw anemometer series.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RawWind {
    pub time: Vec<f64>,
    pub speed: Vec<f64>,
    pub direction_deg: Vec<f64>,
    pub elevation_deg: Vec<f64>,
}

impl RawWind {
    /// Median positive spacing between samples.
    fn sample_interval(&self) -> Result<f64> {
        let mut diffs: Vec<f64> = self
            .time
            .windows(2)
            .map(|w| w[1] - w[0])
            .filter(|d| *d > 0.0)
            .collect();
        if diffs.is_empty() {
            return Err(Error::InvalidInput(
                "wind record needs at least two distinct timestamps".into(),
            ));
        }
        diffs.sort_by(f64::total_cmp);
        Ok(diffs[diffs.len() / 2])
    }
}

/// Wind summary for one tumbling window.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WindowWind {
    pub index: i64,
    pub speed: f64,
    pub direction: f64,
    pub gamma_h: f64,
    pub gamma_v: f64,
}

fn window_index(t: f64, t0: f64, window: f64) -> i64 {
    ((t - t0) / window).floor() as i64
}

/// Per-window wind summaries, keyed by window index.
pub fn aggregate_wind(raw: &RawWind, t0: f64, cfg: &AggregationConfig) -> Result<BTreeMap<i64, WindowWind>> {
    let dt = raw.sample_interval()?;
    let gh = rolling_direction_std(&raw.direction_deg, cfg.gamma_window, dt)?;
    let gv = rolling_direction_std(&raw.elevation_deg, cfg.gamma_window, dt)?;
    // (n, Σu, Σsin, Σcos, Σγh, Σγv)
    let mut acc: BTreeMap<i64, [f64; 6]> = BTreeMap::new();
    for i in 0..raw.time.len() {
        let w = window_index(raw.time[i], t0, cfg.window);
        let th = raw.direction_deg[i].to_radians();
        let a = acc.entry(w).or_insert([0.0; 6]);
        a[0] += 1.0;
        a[1] += raw.speed[i];
        a[2] += th.sin();
        a[3] += th.cos();
        a[4] += gh[i];
        a[5] += gv[i];
    }
    Ok(acc
        .into_iter()
        .map(|(w, a)| {
            let n = a[0];
            (
                w,
                WindowWind {
                    index: w,
                    speed: a[1] / n,
                    direction: a[2].atan2(a[3]).to_degrees(),
                    gamma_h: a[4] / n,
                    gamma_v: a[5] / n,
                },
            )
        })
        .collect())
}

pub fn read_wind_csv(path: &Path) -> Result<RawWind> {
    let mut r = csv::Reader::from_path(path)?;
    let mut raw = RawWind::default();
    for (i, row) in r.deserialize::<AnemometerRow>().enumerate() {
        let line = i as u64 + 2;
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let row = row.map_err(|e| parse_err(e.to_string()))?;
        if ![row.time, row.speed, row.direction_deg, row.elevation_deg]
            .iter()
            .all(|v| v.is_finite())
        {
            return Err(parse_err("non-finite value".into()));
        }
        if row.speed < 0.0 {
            return Err(parse_err(format!("negative wind speed {}", row.speed)));
        }
        if raw.time.last().is_some_and(|&t| row.time < t) {
            return Err(parse_err(format!("time {} goes backwards", row.time)));
        }
        raw.time.push(row.time);
        raw.speed.push(row.speed);
        raw.direction_deg.push(row.direction_deg);
        raw.elevation_deg.push(row.elevation_deg);
    }
    if raw.time.is_empty() {
        return Err(Error::InvalidInput(format!("{} has no rows", path.display())));
    }
    Ok(raw)
}

/// Reads and aggregates a trial directory.
pub fn ingest(dir: impl AsRef<Path>, cfg: &AggregationConfig) -> Result<TrialData> {
    let dir = dir.as_ref();
    if !(cfg.window > 0.0 && cfg.gamma_window > 0.0) {
        return Err(Error::Config("aggregation windows must be positive".into()));
    }
    let array = SensorArray::read_json(dir.join("sensors.json"))?;
    let release_path = dir.join("release.json");
    let release = if release_path.exists() {
        let text =
            std::fs::read_to_string(&release_path).map_err(|e| Error::io(&release_path, e))?;
        let info: ReleaseInfo = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", release_path.display())))?;
        Some(info)
    } else {
        None
    };

    let raw = read_wind_csv(&dir.join("wind.csv"))?;

    let conc_path = dir.join("concentrations.csv");
    let beam_pos: HashMap<&str, usize> = array
        .sensors
        .iter()
        .enumerate()
        .map(|(j, s)| (s.id.as_str(), j))
        .collect();
    let mut scans: Vec<(f64, usize, Option<f64>)> = vec![];
    let mut r = csv::Reader::from_path(&conc_path)?;
    for (i, row) in r.deserialize::<ConcentrationRow>().enumerate() {
        let line = i as u64 + 2;
        let parse_err = |message: String| Error::Parse {
            path: conc_path.clone(),
            line,
            message,
        };
        let row = row.map_err(|e| parse_err(e.to_string()))?;
        let j = *beam_pos
            .get(row.beam_id.as_str())
            .ok_or_else(|| parse_err(format!("unknown beam {}", row.beam_id)))?;
        if !row.time.is_finite() {
            return Err(parse_err("non-finite time".into()));
        }
        scans.push((row.time, j, row.ppm.filter(|v| v.is_finite())));
    }

    let mut report = IngestReport {
        concentration_rows: scans.len(),
        wind_rows: raw.time.len(),
        ..Default::default()
    };
    let t0 = scans
        .iter()
        .map(|s| s.0)
        .chain(raw.time.iter().copied())
        .fold(f64::INFINITY, f64::min);
    let winds = aggregate_wind(&raw, t0, cfg)?;

    let n_beams = array.sensors.len();
    // window -> per-beam (count, sum)
    let mut conc: BTreeMap<i64, Vec<(usize, f64)>> = BTreeMap::new();
    for &(t, j, ppm) in &scans {
        let w = window_index(t, t0, cfg.window);
        let slot = conc.entry(w).or_insert_with(|| vec![(0, 0.0); n_beams]);
        if let Some(v) = ppm {
            slot[j].0 += 1;
            slot[j].1 += v;
        }
    }

    let last = conc
        .keys()
        .chain(winds.keys())
        .copied()
        .max()
        .unwrap_or(0);
    let mut kept: Vec<(i64, WindowWind, Vec<(usize, f64)>)> = vec![];
    for w in 0..=last {
        match (winds.get(&w), conc.get(&w)) {
            (Some(ww), Some(c)) if c.iter().any(|b| b.0 > 0) => {
                kept.push((w, *ww, c.clone()));
            }
            _ => {
                report.windows_dropped += 1;
                report
                    .warnings
                    .push(format!("window {w}: missing wind or concentration data, dropped"));
            }
        }
    }
    if kept.is_empty() {
        return Err(Error::InvalidInput(format!(
            "{}: no window has both wind and concentration data",
            dir.display()
        )));
    }

    let mut wind = WindRecord {
        times: kept
            .iter()
            .map(|(w, ..)| t0 + (*w as f64 + 0.5) * cfg.window)
            .collect(),
        speed: kept.iter().map(|k| k.1.speed).collect(),
        direction: kept.iter().map(|k| k.1.direction).collect(),
        gamma_h: kept.iter().map(|k| k.1.gamma_h).collect(),
        gamma_v: kept.iter().map(|k| k.1.gamma_v).collect(),
    };
    wind.apply_floors();

    let (mut si, mut ti, mut d) = (vec![], vec![], vec![]);
    for j in 0..n_beams {
        for (t, (w, _, c)) in kept.iter().enumerate() {
            let (n, sum) = c[j];
            if n == 0 {
                report.missing_beam_windows += 1;
                report.warnings.push(format!(
                    "beam {} has no usable scan in window {w}",
                    array.sensors[j].id
                ));
                continue;
            }
            si.push(j);
            ti.push(t);
            d.push(sum / n as f64);
        }
    }
    report.windows_kept = kept.len();
    let observations = Observations {
        layout: ObservationLayout {
            sensor_ids: array.ids(),
            sensor_index: si,
            time_index: ti,
        },
        wind,
        d,
    };
    observations.validate()?;
    Ok(TrialData {
        array,
        observations,
        release,
        report,
    })
}

/// Settings for a synthetic trial directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixtureSpec {
    pub duration: f64,
    /// One beam is scanned per period, cycling through the beams.
    pub scan_period: f64,
    pub aggregation: AggregationConfig,
    pub laser: [f64; 3],
    pub reflectors: Vec<[f64; 3]>,
    pub beam_spacing: f64,
    pub source: SourceGeometry,
    pub rate: f64,
    pub truth: DraxlerParams,
    pub background: f64,
    pub noise_sd: f64,
    pub wind: WindScenario,
    pub elevation_std_deg: f64,
    /// (beam, window) pairs with every scan failed.
    pub gaps: Vec<(usize, i64)>,
}

impl Default for FixtureSpec {
    fn default() -> Self {
        Self {
            duration: 2400.0,
            scan_period: 3.0,
            aggregation: AggregationConfig::default(),
            laser: [50.0, 50.0, 1.5],
            reflectors: vec![
                [75.0, 38.0, 1.5],
                [76.0, 46.0, 1.5],
                [76.0, 54.0, 1.5],
                [75.0, 62.0, 1.5],
            ],
            beam_spacing: 1.0,
            source: SourceGeometry {
                location: [30.0, 50.0, 0.5],
                height: 0.5,
                half_width: 0.5,
                half_height: 0.5,
            },
            rate: 2e-4,
            truth: DraxlerParams {
                a_h: 0.9,
                b_h: 0.85,
                a_v: 0.7,
                b_v: 0.8,
            },
            background: 1.95,
            noise_sd: 0.002,
            wind: WindScenario {
                speed_mean: 3.0,
                speed_std: 0.6,
                speed_theta: 0.05,
                direction_mean: 0.0,
                direction_std: 15.0,
                direction_theta: 0.02,
                coverage_deg: 60.0,
                vertical_std_deg: 6.0,
                vertical_theta: 0.2,
                duration: 2400.0,
                dt: 1.0,
                gamma_window: 60.0,
            },
            elevation_std_deg: 6.0,
            gaps: vec![(0, 7), (2, 19)],
        }
    }
}

/// Ground truth written next to a synthetic trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixtureTruth {
    pub rate: f64,
    pub location: [f64; 3],
    pub dispersion: DraxlerParams,
    pub background: f64,
    pub noise_sd: f64,
}

/// Writes a synthetic trial directory. Each scan reads the plume computed
/// from its window's aggregated wind, so the aggregated data follow the
/// Draxler model exactly up to scan noise.
pub fn write_fixture(dir: impl AsRef<Path>, spec: &FixtureSpec, seed: u64) -> Result<FixtureTruth> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let cfg = spec.aggregation;

    let base = synthesize_wind(
        &WindScenario {
            duration: spec.duration,
            ..spec.wind.clone()
        },
        seed,
    )?;
    let elevation = simulate_ou(
        &OuParams {
            mean: 0.0,
            std: spec.elevation_std_deg,
            theta: spec.wind.vertical_theta,
            dt: spec.wind.dt,
            initial: None,
        },
        base.len(),
        seed ^ 0x5eed,
    )?;
    let raw = RawWind {
        time: base.times.clone(),
        speed: base.speed.clone(),
        direction_deg: base.direction.clone(),
        elevation_deg: elevation,
    };
    let mut w = csv::Writer::from_path(dir.join("wind.csv"))?;
    for i in 0..raw.time.len() {
        w.serialize(AnemometerRow {
            time: raw.time[i],
            speed: raw.speed[i],
            direction_deg: raw.direction_deg[i],
            elevation_deg: raw.elevation_deg[i],
        })?;
    }
    w.flush().map_err(|e| Error::io(dir.join("wind.csv"), e))?;

    let array = SensorArray {
        sample_rate: 1.0 / spec.scan_period,
        beam_spacing: spec.beam_spacing,
        sensors: spec
            .reflectors
            .iter()
            .enumerate()
            .map(|(j, r)| Sensor {
                id: format!("beam{}", j + 1),
                geometry: SensorGeometry::Beam {
                    origin: spec.laser,
                    reflector: *r,
                },
            })
            .collect(),
    };
    array.write_json(dir.join("sensors.json"))?;
    let release = ReleaseInfo {
        source: spec.source,
        rate: Some(spec.rate),
    };
    std::fs::write(
        dir.join("release.json"),
        serde_json::to_string_pretty(&release)? + "\n",
    )
    .map_err(|e| Error::io(dir.join("release.json"), e))?;

    // Plume per (beam, window) from the aggregated wind.
    let t0 = raw.time[0];
    let winds = aggregate_wind(&raw, t0, &cfg)?;
    let idx: Vec<i64> = winds.keys().copied().collect();
    let mut agg = WindRecord {
        times: idx.iter().map(|&k| k as f64).collect(),
        speed: winds.values().map(|w| w.speed).collect(),
        direction: winds.values().map(|w| w.direction).collect(),
        gamma_h: winds.values().map(|w| w.gamma_h).collect(),
        gamma_v: winds.values().map(|w| w.gamma_v).collect(),
    };
    agg.apply_floors();
    let layout = ObservationLayout::full(array.ids(), agg.len());
    let op = PlumeOperator::new(&array, &agg, &layout, spec.source, AtmosphereSpec::default())?;
    let unit = op.responses(&DispersionSpec::Draxler(spec.truth), &AscTables::shipped())?;

    let n_beams = array.sensors.len();
    let noise = Normal::new(0.0, spec.noise_sd)
        .map_err(|e| Error::Config(format!("fixture noise: {e}")))?;
    let mut rng = stream_rng(seed, 21);
    let mut w = csv::Writer::from_path(dir.join("concentrations.csv"))?;
    let n_scans = (spec.duration / spec.scan_period).floor() as usize;
    for i in 0..n_scans {
        let t = t0 + i as f64 * spec.scan_period;
        let j = i % n_beams;
        let win = window_index(t, t0, cfg.window);
        let Ok(col) = idx.binary_search(&win) else {
            continue;
        };
        let eps = noise.sample(&mut rng);
        let ppm = if spec.gaps.contains(&(j, win)) {
            None
        } else {
            Some(spec.background + spec.rate * unit[j * agg.len() + col] + eps)
        };
        w.serialize(ConcentrationRow {
            time: t,
            beam_id: array.sensors[j].id.clone(),
            ppm,
        })?;
    }
    w.flush().map_err(|e| Error::io(dir.join("concentrations.csv"), e))?;

    let truth = FixtureTruth {
        rate: spec.rate,
        location: spec.source.location,
        dispersion: spec.truth,
        background: spec.background,
        noise_sd: spec.noise_sd,
    };
    std::fs::write(
        dir.join("truth.json"),
        serde_json::to_string_pretty(&truth)? + "\n",
    )
    .map_err(|e| Error::io(dir.join("truth.json"), e))?;
    Ok(truth)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circular_mean_crosses_the_cut() {
        let raw = RawWind {
            time: vec![0.0, 1.0, 2.0, 3.0],
            speed: vec![1.0, 2.0, 3.0, 4.0],
            direction_deg: vec![170.0, -170.0, 175.0, -175.0],
            elevation_deg: vec![0.0; 4],
        };
        let w = aggregate_wind(&raw, 0.0, &AggregationConfig::default()).unwrap();
        let ww = w[&0];
        assert_eq!(w.len(), 1);
        assert!((ww.speed - 2.5).abs() < 1e-12);
        assert!((ww.direction.abs() - 180.0).abs() < 1e-9, "{}", ww.direction);
    }

    #[test]
    fn fixture_round_trip_has_gaps() {
        let dir = std::env::temp_dir().join(format!("trial-fixture-{}", std::process::id()));
        let spec = FixtureSpec {
            duration: 600.0,
            gaps: vec![(1, 3)],
            ..FixtureSpec::default()
        };
        write_fixture(&dir, &spec, 3).unwrap();
        let data = ingest(&dir, &AggregationConfig::default()).unwrap();
        assert_eq!(data.report.windows_kept, 10);
        assert_eq!(data.report.missing_beam_windows, 1);
        assert_eq!(data.observations.n_obs(), 4 * 10 - 1);
        assert!(data.release.is_some());
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn bad_row_reports_line() {
        let dir = std::env::temp_dir().join(format!("trial-bad-{}", std::process::id()));
        write_fixture(
            &dir,
            &FixtureSpec {
                duration: 120.0,
                ..FixtureSpec::default()
            },
            1,
        )
        .unwrap();
        let path = dir.join("concentrations.csv");
        let mut text = std::fs::read_to_string(&path).unwrap();
        text.push_str("12.0,beam1,abc\n");
        std::fs::write(&path, &text).unwrap();
        let err = ingest(&dir, &AggregationConfig::default()).unwrap_err();
        let lines = text.lines().count() as u64;
        assert!(matches!(err, Error::Parse { line, .. } if line == lines), "{err}");
        std::fs::remove_dir_all(&dir).ok();
    }
}
