//! Sensor arrays, the coupling matrix and measurement vectors.
//!
//! Observations are ordered sensor-major: every time step of the first
//! sensor, then every time step of the second, and so on. Ingested data may
//! drop individual (sensor, time) rows, so each observation carries its own
//! sensor and time index instead of relying on a dense grid.

pub mod chilbolton;

use std::collections::HashMap;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::plume::{
    horizontal_offsets, plume_kernel, wind_unit, AscTables, AtmosphereSpec, DispersionSpec,
    SigmaForm, SourceGeometry, Vec3,
};
use crate::real::Real;
use crate::wind::{stream_rng, WindRecord};

/// Receptor spacing along open-path beams, metres.
pub const DEFAULT_BEAM_SPACING: f64 = 0.4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SensorGeometry {
    Point { position: Vec3 },
    Beam { origin: Vec3, reflector: Vec3 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sensor {
    pub id: String,
    #[serde(flatten)]
    pub geometry: SensorGeometry,
}

fn default_spacing() -> f64 {
    DEFAULT_BEAM_SPACING
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensorArray {
    /// Samples per second.
    pub sample_rate: f64,
    #[serde(default = "default_spacing")]
    pub beam_spacing: f64,
    pub sensors: Vec<Sensor>,
}

impl SensorArray {
    pub fn validate(&self) -> Result<()> {
        if self.sensors.is_empty() {
            return Err(Error::InvalidInput("sensor array is empty".into()));
        }
        let mut seen = HashMap::new();
        for s in &self.sensors {
            if seen.insert(s.id.as_str(), ()).is_some() {
                return Err(Error::InvalidInput(format!("duplicate sensor id {}", s.id)));
            }
            let pts: Vec<&Vec3> = match &s.geometry {
                SensorGeometry::Point { position } => vec![position],
                SensorGeometry::Beam { origin, reflector } => {
                    if origin == reflector {
                        return Err(Error::InvalidInput(format!(
                            "beam {} has coincident endpoints",
                            s.id
                        )));
                    }
                    vec![origin, reflector]
                }
            };
            if pts.iter().any(|p| !p.iter().all(|v| v.is_finite())) {
                return Err(Error::InvalidInput(format!(
                    "sensor {} has non-finite coordinates",
                    s.id
                )));
            }
        }
        Ok(())
    }

    pub fn ids(&self) -> Vec<String> {
        self.sensors.iter().map(|s| s.id.clone()).collect()
    }

    /// Receptor points for each sensor: one for a point sensor, the beam
    /// discretisation for a beam.
    pub fn receptors(&self) -> Result<Vec<Vec<Vec3>>> {
        self.sensors
            .iter()
            .map(|s| match &s.geometry {
                SensorGeometry::Point { position } => Ok(vec![*position]),
                SensorGeometry::Beam { origin, reflector } => {
                    beam_receptors(*origin, *reflector, self.beam_spacing)
                        .map_err(|e| e.context(format!("beam {}", s.id)))
                }
            })
            .collect()
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let array: SensorArray = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        array.validate()?;
        Ok(array)
    }
}

/// Evenly spaced points from `origin` to `reflector`, both included;
/// `floor(length / spacing) + 1` points in total.
pub fn beam_receptors(origin: Vec3, reflector: Vec3, spacing: f64) -> Result<Vec<Vec3>> {
    let d = [
        reflector[0] - origin[0],
        reflector[1] - origin[1],
        reflector[2] - origin[2],
    ];
    let length = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
    if !(length > 0.0) || !length.is_finite() {
        return Err(Error::InvalidInput("beam has zero length".into()));
    }
    if !(spacing > 0.0 && spacing <= length * (1.0 + 1e-12)) {
        return Err(Error::InvalidInput(format!(
            "receptor spacing {spacing} must be positive and no longer than the beam ({length})"
        )));
    }
    let intervals = ((length / spacing) + 1e-9).floor() as usize;
    Ok((0..=intervals)
        .map(|k| {
            let f = k as f64 / intervals as f64;
            [
                origin[0] + f * d[0],
                origin[1] + f * d[1],
                origin[2] + f * d[2],
            ]
        })
        .collect())
}

/// Dense `n_obs × n_src` matrix of unit-rate plume responses, PPM per kg/s.
#[derive(Clone, Debug, PartialEq)]
pub struct CouplingMatrix {
    n_obs: usize,
    n_src: usize,
    data: Vec<f64>,
}

impl CouplingMatrix {
    pub fn from_rows(n_src: usize, data: Vec<f64>) -> Self {
        assert!(n_src > 0 && data.len() % n_src == 0);
        Self {
            n_obs: data.len() / n_src,
            n_src,
            data,
        }
    }

    pub fn n_obs(&self) -> usize {
        self.n_obs
    }

    pub fn n_src(&self) -> usize {
        self.n_src
    }

    pub fn get(&self, k: usize, i: usize) -> f64 {
        self.data[k * self.n_src + i]
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.data[k * self.n_src..(k + 1) * self.n_src]
    }

    /// `A s`.
    pub fn apply(&self, rates: &[f64]) -> Result<Vec<f64>> {
        if rates.len() != self.n_src {
            return Err(Error::InvalidInput(format!(
                "{} rates for {} sources",
                rates.len(),
                self.n_src
            )));
        }
        Ok((0..self.n_obs)
            .map(|k| self.row(k).iter().zip(rates).map(|(a, s)| a * s).sum())
            .collect())
    }

    pub fn column_sums(&self) -> Vec<f64> {
        (0..self.n_src)
            .map(|i| (0..self.n_obs).map(|k| self.get(k, i)).sum())
            .collect()
    }
}

/// Which (sensor, time) pair each observation belongs to.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservationLayout {
    pub sensor_ids: Vec<String>,
    pub sensor_index: Vec<usize>,
    pub time_index: Vec<usize>,
}

impl ObservationLayout {
    /// Every sensor at every time step, sensor-major.
    pub fn full(sensor_ids: Vec<String>, n_times: usize) -> Self {
        let n_sns = sensor_ids.len();
        Self {
            sensor_ids,
            sensor_index: (0..n_sns).flat_map(|j| std::iter::repeat_n(j, n_times)).collect(),
            time_index: (0..n_sns).flat_map(|_| 0..n_times).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.sensor_index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sensor_index.is_empty()
    }

    pub fn n_sensors(&self) -> usize {
        self.sensor_ids.len()
    }

    /// Number of observations recorded by each sensor.
    pub fn counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.n_sensors()];
        for &j in &self.sensor_index {
            c[j] += 1;
        }
        c
    }
}

/// Measured (or synthesised) concentrations with their layout and wind.
#[derive(Clone, Debug, PartialEq)]
pub struct Observations {
    pub layout: ObservationLayout,
    pub wind: WindRecord,
    /// PPM, one entry per observation.
    pub d: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ObsRow {
    obs_id: usize,
    sensor_id: String,
    t: f64,
    ppm: f64,
}

impl Observations {
    pub fn n_obs(&self) -> usize {
        self.d.len()
    }

    pub fn n_sensors(&self) -> usize {
        self.layout.n_sensors()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.d.len();
        if self.layout.sensor_index.len() != n || self.layout.time_index.len() != n {
            return Err(Error::InvalidInput("observation layout length mismatch".into()));
        }
        if self.d.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("observations must be finite".into()));
        }
        if self.layout.time_index.iter().any(|&t| t >= self.wind.len())
            || self.layout.sensor_index.iter().any(|&j| j >= self.n_sensors())
        {
            return Err(Error::InvalidInput("observation index out of range".into()));
        }
        Ok(())
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path)?;
        for k in 0..self.n_obs() {
            w.serialize(ObsRow {
                obs_id: k,
                sensor_id: self.layout.sensor_ids[self.layout.sensor_index[k]].clone(),
                t: self.wind.times[self.layout.time_index[k]],
                ppm: self.d[k],
            })?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    /// Reads an observation CSV against a known sensor list and wind record.
    pub fn read_csv(path: impl AsRef<Path>, sensor_ids: Vec<String>, wind: WindRecord) -> Result<Self> {
        let path = path.as_ref();
        let sensor_pos: HashMap<&str, usize> = sensor_ids
            .iter()
            .enumerate()
            .map(|(j, s)| (s.as_str(), j))
            .collect();
        let time_pos: HashMap<u64, usize> = wind
            .times
            .iter()
            .enumerate()
            .map(|(t, v)| (v.to_bits(), t))
            .collect();
        let mut r = csv::Reader::from_path(path)?;
        let (mut si, mut ti, mut d) = (vec![], vec![], vec![]);
        for (i, row) in r.deserialize::<ObsRow>().enumerate() {
            let line = i as u64 + 2;
            let parse_err = |message: String| Error::Parse {
                path: path.to_path_buf(),
                line,
                message,
            };
            let row = row.map_err(|e| parse_err(e.to_string()))?;
            let j = *sensor_pos
                .get(row.sensor_id.as_str())
                .ok_or_else(|| parse_err(format!("unknown sensor {}", row.sensor_id)))?;
            let t = *time_pos
                .get(&row.t.to_bits())
                .ok_or_else(|| parse_err(format!("time {} not in wind record", row.t)))?;
            si.push(j);
            ti.push(t);
            d.push(row.ppm);
        }
        let obs = Observations {
            layout: ObservationLayout {
                sensor_ids,
                sensor_index: si,
                time_index: ti,
            },
            wind,
            d,
        };
        obs.validate()?;
        Ok(obs)
    }
}

#[derive(Clone, Copy, Debug)]
struct WindSample {
    unit: (f64, f64),
    speed: f64,
    tan_gamma_h: f64,
    tan_gamma_v: f64,
}

/// Everything needed to evaluate unit-rate plume responses for one source
/// at every observation, with the source's horizontal position and the
/// dispersion parameters left free.
#[derive(Clone, Debug)]
pub struct PlumeOperator {
    receptors: Vec<Vec<Vec3>>,
    wind: Vec<WindSample>,
    rows: Vec<(usize, usize)>,
    source: SourceGeometry,
    atmos: AtmosphereSpec,
}

impl PlumeOperator {
    pub fn new(
        array: &SensorArray,
        wind: &WindRecord,
        layout: &ObservationLayout,
        source: SourceGeometry,
        atmos: AtmosphereSpec,
    ) -> Result<Self> {
        array.validate()?;
        wind.validate()?;
        source.validate()?;
        atmos.validate(&source)?;
        if array.sensors.len() != layout.n_sensors() {
            return Err(Error::InvalidInput(format!(
                "layout names {} sensors, array has {}",
                layout.n_sensors(),
                array.sensors.len()
            )));
        }
        if layout.time_index.iter().any(|&t| t >= wind.len()) {
            return Err(Error::InvalidInput(
                "wind record does not cover every observation time".into(),
            ));
        }
        let wind = (0..wind.len())
            .map(|t| WindSample {
                unit: wind_unit(wind.direction[t]),
                speed: wind.speed[t],
                tan_gamma_h: wind.gamma_h[t].tan(),
                tan_gamma_v: wind.gamma_v[t].tan(),
            })
            .collect();
        Ok(Self {
            receptors: array.receptors()?,
            wind,
            rows: layout
                .sensor_index
                .iter()
                .copied()
                .zip(layout.time_index.iter().copied())
                .collect(),
            source,
            atmos,
        })
    }

    pub fn n_obs(&self) -> usize {
        self.rows.len()
    }

    pub fn source(&self) -> &SourceGeometry {
        &self.source
    }

    /// Unit-rate response at observation `k` for a source at `(sx, sy)`:
    /// the mean over the sensor's receptors.
    #[inline]
    pub(crate) fn unit_response<R: Real>(&self, k: usize, sx: R, sy: R, form: &SigmaForm<R>) -> R {
        let (j, t) = self.rows[k];
        let w = &self.wind[t];
        let pts = &self.receptors[j];
        let mut acc = R::cst(0.0);
        for p in pts {
            let (downwind, crosswind) = horizontal_offsets(p, sx, sy, w.unit);
            if !(downwind.value() > 0.0) {
                continue;
            }
            let (sig_h, sig_v) = form.sigmas(
                downwind,
                w.tan_gamma_h,
                w.tan_gamma_v,
                self.source.half_width,
                self.source.half_height,
            );
            acc += plume_kernel(
                R::cst(1.0),
                crosswind,
                p[2] - self.source.location[2],
                self.source.height,
                sig_h,
                sig_v,
                w.speed,
                &self.atmos,
            );
        }
        if pts.len() > 1 {
            acc / pts.len() as f64
        } else {
            acc
        }
    }

    pub(crate) fn unit_responses_f64(&self, sx: f64, sy: f64, form: &SigmaForm<f64>) -> Vec<f64> {
        (0..self.n_obs())
            .into_par_iter()
            .map(|k| self.unit_response(k, sx, sy, form))
            .collect()
    }

    /// Unit responses for the operator's source and a dispersion spec.
    pub fn responses(&self, spec: &DispersionSpec, tables: &AscTables) -> Result<Vec<f64>> {
        spec.validate()?;
        let form = SigmaForm::resolve(spec, tables);
        Ok(self.unit_responses_f64(self.source.location[0], self.source.location[1], &form))
    }
}

/// Coupling matrix for every sensor at every wind time step.
pub fn coupling_matrix(
    sources: &[SourceGeometry],
    array: &SensorArray,
    wind: &WindRecord,
    disp: &DispersionSpec,
    atmos: &AtmosphereSpec,
    tables: &AscTables,
) -> Result<CouplingMatrix> {
    let layout = ObservationLayout::full(array.ids(), wind.len());
    coupling_matrix_for(sources, array, wind, &layout, disp, atmos, tables)
}

/// Coupling matrix over an explicit observation layout.
pub fn coupling_matrix_for(
    sources: &[SourceGeometry],
    array: &SensorArray,
    wind: &WindRecord,
    layout: &ObservationLayout,
    disp: &DispersionSpec,
    atmos: &AtmosphereSpec,
    tables: &AscTables,
) -> Result<CouplingMatrix> {
    if sources.is_empty() {
        return Err(Error::InvalidInput("at least one source is required".into()));
    }
    let columns = sources
        .iter()
        .enumerate()
        .map(|(i, src)| {
            PlumeOperator::new(array, wind, layout, *src, *atmos)
                .and_then(|op| op.responses(disp, tables))
                .map_err(|e| e.context(format!("source {i}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let n_src = sources.len();
    let n_obs = layout.len();
    let mut data = vec![0.0; n_obs * n_src];
    for (i, col) in columns.iter().enumerate() {
        for (k, &v) in col.iter().enumerate() {
            if !(v.is_finite() && v >= 0.0) {
                let (j, t) = (layout.sensor_index[k], layout.time_index[k]);
                return Err(Error::Domain(format!(
                    "non-finite plume response at sensor {}, time step {t}, source {i}",
                    layout.sensor_ids[j]
                )));
            }
            data[k * n_src + i] = v;
        }
    }
    Ok(CouplingMatrix::from_rows(n_src, data))
}

/// Per-sensor background: prior mean and variance, PPM and PPM².
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BackgroundModel {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

impl BackgroundModel {
    pub fn uniform(n_sensors: usize, mean: f64, var: f64) -> Self {
        Self {
            mean: vec![mean; n_sensors],
            var: vec![var; n_sensors],
        }
    }

    pub fn validate(&self, n_sensors: usize) -> Result<()> {
        if self.mean.len() != n_sensors || self.var.len() != n_sensors {
            return Err(Error::InvalidInput(format!(
                "background model has {} means and {} variances for {n_sensors} sensors",
                self.mean.len(),
                self.var.len()
            )));
        }
        if self.var.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidInput("background variances must be >= 0".into()));
        }
        Ok(())
    }

    /// One draw per sensor.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        self.mean
            .iter()
            .zip(&self.var)
            .map(|(&m, &v)| {
                let z: f64 = StandardNormal.sample(rng);
                m + v.sqrt() * z
            })
            .collect()
    }
}

/// Synthetic data with the realised background, for ground truth.
#[derive(Clone, Debug)]
pub struct Synthesis {
    pub observations: Observations,
    /// Per-sensor background actually added.
    pub beta: Vec<f64>,
}

/// `d = A s + β + ε` with β drawn once per sensor and ε i.i.d. N(0, σ²).
pub fn synthesize_observations(
    a: &CouplingMatrix,
    rates: &[f64],
    background: &BackgroundModel,
    noise_var: f64,
    layout: &ObservationLayout,
    wind: &WindRecord,
    seed: u64,
) -> Result<Synthesis> {
    if a.n_obs() != layout.len() {
        return Err(Error::InvalidInput(format!(
            "coupling matrix has {} rows, layout {}",
            a.n_obs(),
            layout.len()
        )));
    }
    if !(noise_var.is_finite() && noise_var >= 0.0) {
        return Err(Error::InvalidInput(format!("noise variance {noise_var} must be >= 0")));
    }
    background.validate(layout.n_sensors())?;
    let signal = a.apply(rates)?;
    let beta = background.sample(&mut stream_rng(seed, 11));
    let noise = Normal::new(0.0, noise_var.sqrt()).expect("valid std");
    let mut rng = stream_rng(seed, 12);
    let d = signal
        .iter()
        .zip(&layout.sensor_index)
        .map(|(m, &j)| m + beta[j] + noise.sample(&mut rng))
        .collect();
    let observations = Observations {
        layout: layout.clone(),
        wind: wind.clone(),
        d,
    };
    observations.validate()?;
    Ok(Synthesis { observations, beta })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn beam_point_counts() {
        let pts = beam_receptors([0.0, 0.0, 1.0], [10.0, 0.0, 1.0], 0.4).unwrap();
        assert_eq!(pts.len(), 26);
        let pts = beam_receptors([0.0, 0.0, 0.0], [1.0, 0.0, 0.0], 1.0).unwrap();
        assert_eq!(pts, vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]]);
    }

    #[test]
    fn beam_points_are_collinear() {
        let (o, r) = ([1.0, -2.0, 0.5], [13.0, 7.0, 3.0]);
        let pts = beam_receptors(o, r, 0.4).unwrap();
        let d = [r[0] - o[0], r[1] - o[1], r[2] - o[2]];
        let len = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
        for p in &pts {
            let v = [p[0] - o[0], p[1] - o[1], p[2] - o[2]];
            let cross = [
                v[1] * d[2] - v[2] * d[1],
                v[2] * d[0] - v[0] * d[2],
                v[0] * d[1] - v[1] * d[0],
            ];
            let dist = (cross[0].powi(2) + cross[1].powi(2) + cross[2].powi(2)).sqrt() / len;
            assert!(dist < 1e-12);
        }
        assert_eq!(pts[0], o);
        assert_eq!(*pts.last().unwrap(), r);
    }

    #[test]
    fn zero_length_beam() {
        assert!(beam_receptors([1.0; 3], [1.0; 3], 0.4).is_err());
        assert!(beam_receptors([0.0; 3], [1.0, 0.0, 0.0], 2.0).is_err());
    }

    #[test]
    fn full_layout_is_sensor_major() {
        let l = ObservationLayout::full(vec!["a".into(), "b".into()], 3);
        assert_eq!(l.sensor_index, vec![0, 0, 0, 1, 1, 1]);
        assert_eq!(l.time_index, vec![0, 1, 2, 0, 1, 2]);
        assert_eq!(l.counts(), vec![3, 3]);
    }

    #[test]
    fn apply_checks_dimensions() {
        let a = CouplingMatrix::from_rows(2, vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(a.apply(&[1.0, 1.0]).unwrap(), vec![3.0, 7.0]);
        assert!(a.apply(&[1.0]).is_err());
        assert_eq!(a.column_sums(), vec![4.0, 6.0]);
    }
}
