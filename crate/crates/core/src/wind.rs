//! Unsteady single-point wind: Ornstein-Uhlenbeck speed and direction
//! series plus the rolling direction variability used by the wind sigmas.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Wind speeds below this are clipped before entering the plume model.
pub const SPEED_FLOOR: f64 = 0.1;
/// Rolling standard deviations are kept inside `[GAMMA_FLOOR, GAMMA_CEIL]`
/// radians so that `tan(γ)` is positive and finite.
pub const GAMMA_FLOOR: f64 = 1e-4;
pub const GAMMA_CEIL: f64 = std::f64::consts::FRAC_PI_2 - 1e-3;

/// Seeded generator for one named random stream.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OuParams {
    pub mean: f64,
    /// Stationary standard deviation ξ.
    pub std: f64,
    /// Mean-reversion rate Θ in 1/s.
    pub theta: f64,
    pub dt: f64,
    /// Starting value; the mean when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<f64>,
}

impl OuParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.std.is_finite() && self.std >= 0.0) {
            return Err(Error::InvalidInput(format!("OU std {} must be >= 0", self.std)));
        }
        if !(self.theta > 0.0 && self.dt > 0.0 && self.mean.is_finite()) {
            return Err(Error::InvalidInput(
                "OU rate and time step must be positive".into(),
            ));
        }
        if self.theta * self.dt >= 1.0 {
            return Err(Error::Stability(format!(
                "theta*dt = {} must be below 1",
                self.theta * self.dt
            )));
        }
        Ok(())
    }
}

/// Euler-Maruyama discretisation of the OU process, applied to deviations
/// from the mean. Returns `n_steps` values starting at the initial value.
pub fn simulate_ou(params: &OuParams, n_steps: usize, seed: u64) -> Result<Vec<f64>> {
    params.validate()?;
    if n_steps == 0 {
        return Err(Error::InvalidInput("n_steps must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(ou_path(params, n_steps, &mut rng))
}

fn ou_path(params: &OuParams, n_steps: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let decay = 1.0 - params.theta * params.dt;
    let kick = params.std * (2.0 * params.dt * params.theta).sqrt();
    let mut eta = params.initial.unwrap_or(params.mean) - params.mean;
    let mut out = Vec::with_capacity(n_steps);
    out.push(params.mean + eta);
    for _ in 1..n_steps {
        let nu: f64 = StandardNormal.sample(rng);
        eta = decay * eta + nu * kick;
        out.push(params.mean + eta);
    }
    out
}

/// Removes 360° jumps so consecutive samples differ by at most 180°.
pub fn unwrap_degrees(direction: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(direction.len());
    let mut offset = 0.0;
    for (i, &d) in direction.iter().enumerate() {
        if i > 0 {
            let prev = direction[i - 1];
            let step = d - prev;
            offset -= 360.0 * (step / 360.0).round();
        }
        out.push(d + offset);
    }
    out
}

/// Centred rolling population standard deviation of a direction series, in
/// radians. The window holds `ceil(window / dt)` samples and is truncated
/// at the series edges.
pub fn rolling_direction_std(direction_deg: &[f64], window: f64, dt: f64) -> Result<Vec<f64>> {
    if direction_deg.is_empty() {
        return Err(Error::InvalidInput("direction series is empty".into()));
    }
    if !(dt > 0.0 && window >= dt) {
        return Err(Error::InvalidInput(format!(
            "window {window} s must be at least dt {dt} s"
        )));
    }
    let unwrapped = unwrap_degrees(direction_deg);
    let n = unwrapped.len();
    let width = (window / dt - 1e-9).ceil().max(1.0) as usize;
    let left = (width - 1) / 2;
    let right = width - 1 - left;
    // Two passes per window: prefix sums of squares cancel badly when the
    // spread is small.
    Ok((0..n)
        .map(|i| {
            let w = &unwrapped[i.saturating_sub(left)..(i + right + 1).min(n)];
            let m = w.len() as f64;
            let mean = w.iter().sum::<f64>() / m;
            let var = w.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / m;
            var.sqrt().to_radians()
        })
        .collect())
}

/// Wind observed at a single anemometer, one entry per time step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindRecord {
    pub times: Vec<f64>,
    pub speed: Vec<f64>,
    /// Degrees, counterclockwise from east, direction the wind blows toward.
    pub direction: Vec<f64>,
    pub gamma_h: Vec<f64>,
    pub gamma_v: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct WindRow {
    t: f64,
    speed: f64,
    direction: f64,
    gamma_h: f64,
    gamma_v: f64,
}

impl WindRecord {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.times.len();
        if [&self.speed, &self.direction, &self.gamma_h, &self.gamma_v]
            .iter()
            .any(|s| s.len() != n)
        {
            return Err(Error::InvalidInput("wind series lengths differ".into()));
        }
        if self.speed.iter().any(|&u| !(u > 0.0 && u.is_finite())) {
            return Err(Error::InvalidInput("wind speeds must be positive".into()));
        }
        if self
            .gamma_h
            .iter()
            .chain(&self.gamma_v)
            .any(|&g| !(g > 0.0 && g < std::f64::consts::FRAC_PI_2))
        {
            return Err(Error::InvalidInput("gamma series must lie in (0, π/2)".into()));
        }
        if self.direction.iter().any(|d| !d.is_finite()) {
            return Err(Error::InvalidInput("wind directions must be finite".into()));
        }
        Ok(())
    }

    /// Applies the speed and gamma floors in place.
    pub fn apply_floors(&mut self) {
        for u in &mut self.speed {
            *u = u.max(SPEED_FLOOR);
        }
        for g in self.gamma_h.iter_mut().chain(self.gamma_v.iter_mut()) {
            *g = g.clamp(GAMMA_FLOOR, GAMMA_CEIL);
        }
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path)?;
        for i in 0..self.len() {
            w.serialize(WindRow {
                t: self.times[i],
                speed: self.speed[i],
                direction: self.direction[i],
                gamma_h: self.gamma_h[i],
                gamma_v: self.gamma_v[i],
            })?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut r = csv::Reader::from_path(path)?;
        let mut rec = WindRecord {
            times: vec![],
            speed: vec![],
            direction: vec![],
            gamma_h: vec![],
            gamma_v: vec![],
        };
        for (i, row) in r.deserialize::<WindRow>().enumerate() {
            let row = row.map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: i as u64 + 2,
                message: e.to_string(),
            })?;
            rec.times.push(row.t);
            rec.speed.push(row.speed);
            rec.direction.push(row.direction);
            rec.gamma_h.push(row.gamma_h);
            rec.gamma_v.push(row.gamma_v);
        }
        rec.validate().map_err(|e| e.context(path.display().to_string()))?;
        Ok(rec)
    }
}

/// Settings for a synthetic wind record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindScenario {
    pub speed_mean: f64,
    pub speed_std: f64,
    pub speed_theta: f64,
    /// Mean bearing, degrees counterclockwise from east.
    pub direction_mean: f64,
    pub direction_std: f64,
    pub direction_theta: f64,
    /// Target spread max − min of the direction series, degrees.
    pub coverage_deg: f64,
    /// Stationary std of the synthetic vertical wind angle, degrees.
    pub vertical_std_deg: f64,
    pub vertical_theta: f64,
    pub duration: f64,
    pub dt: f64,
    /// Rolling window for the gamma series, seconds.
    pub gamma_window: f64,
}

impl Default for WindScenario {
    fn default() -> Self {
        Self {
            speed_mean: 6.0,
            speed_std: 1.0,
            speed_theta: 0.1,
            direction_mean: 0.0,
            direction_std: 40.0,
            direction_theta: 0.05,
            coverage_deg: 140.0,
            vertical_std_deg: 8.0,
            vertical_theta: 0.2,
            duration: 100.0,
            dt: 1.0,
            gamma_window: 60.0,
        }
    }
}

/// Synthesises speed, direction and variability series for a scenario.
///
/// The direction OU path is mapped affinely onto `[mean − c/2, mean + c/2]`
/// for a coverage `c < 360`; a full-circle coverage keeps the raw path.
/// The vertical variability comes from an independent OU angle series.
pub fn synthesize_wind(scenario: &WindScenario, seed: u64) -> Result<WindRecord> {
    let c = scenario.coverage_deg;
    if !(c > 0.0 && c <= 360.0) {
        return Err(Error::Config(format!(
            "wind direction coverage {c}° must lie in (0, 360]"
        )));
    }
    if !(scenario.duration > 0.0 && scenario.dt > 0.0) {
        return Err(Error::Config("wind duration and dt must be positive".into()));
    }
    let n = ((scenario.duration / scenario.dt).round() as usize).max(1);
    let ou = |mean: f64, std: f64, theta: f64| OuParams {
        mean,
        std,
        theta,
        dt: scenario.dt,
        initial: None,
    };
    let speed_p = ou(scenario.speed_mean, scenario.speed_std, scenario.speed_theta);
    let dir_p = ou(0.0, scenario.direction_std, scenario.direction_theta);
    let vert_p = ou(0.0, scenario.vertical_std_deg, scenario.vertical_theta);
    for p in [&speed_p, &dir_p, &vert_p] {
        p.validate().map_err(|e| Error::Config(e.to_string()))?;
    }

    let speed = ou_path(&speed_p, n, &mut stream_rng(seed, 1));
    let raw_dir = ou_path(&dir_p, n, &mut stream_rng(seed, 2));
    let vertical = ou_path(&vert_p, n, &mut stream_rng(seed, 3));

    let direction: Vec<f64> = if c >= 360.0 {
        raw_dir.iter().map(|d| scenario.direction_mean + d).collect()
    } else {
        let lo = raw_dir.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = raw_dir.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mid = 0.5 * (lo + hi);
        let gain = if hi > lo { c / (hi - lo) } else { 0.0 };
        raw_dir
            .iter()
            .map(|d| scenario.direction_mean + (d - mid) * gain)
            .collect()
    };

    let gamma_h = rolling_direction_std(&direction, scenario.gamma_window, scenario.dt)?;
    let gamma_v = rolling_direction_std(&vertical, scenario.gamma_window, scenario.dt)?;
    let mut rec = WindRecord {
        times: (0..n).map(|k| k as f64 * scenario.dt).collect(),
        speed,
        direction,
        gamma_h,
        gamma_v,
    };
    rec.apply_floors();
    Ok(rec)
}
