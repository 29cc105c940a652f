use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{ScenarioConfig, SensorLayoutKind};
use crate::error::{Error, Result};
use crate::inference::{DispersionMode, Problem};
use crate::inference::init::linspace;
use crate::plume::{AscTables, DispersionSpec, DraxlerParams, SourceGeometry};
use crate::sensing::{
    coupling_matrix_for, synthesize_observations, BackgroundModel, ObservationLayout, Observations,
    Sensor, SensorArray, SensorGeometry,
};
use crate::wind::{synthesize_wind, WindRecord, WindScenario};

/// Values the synthetic data were generated from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub rate: f64,
    pub location: [f64; 3],
    pub dispersion: DraxlerParams,
    pub beta: Vec<f64>,
    pub noise_var: f64,
}

impl GroundTruth {
    /// True value of a named trace quantity, when defined.
    pub fn value(&self, name: &str) -> Option<f64> {
        match name {
            "rate" => Some(self.rate),
            "x" => Some(self.location[0]),
            "y" => Some(self.location[1]),
            "a_h" => Some(self.dispersion.a_h),
            "b_h" => Some(self.dispersion.b_h),
            "a_v" => Some(self.dispersion.a_v),
            "b_v" => Some(self.dispersion.b_v),
            "sigma2" => Some(self.noise_var),
            _ => None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Dataset {
    pub array: SensorArray,
    pub observations: Observations,
    pub truth: Option<GroundTruth>,
}

impl Dataset {
    pub fn write(&self, dir: &Path) -> Result<Vec<String>> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        self.array.write_json(dir.join("sensors.json"))?;
        self.observations.wind.write_csv(dir.join("wind.csv"))?;
        self.observations.write_csv(dir.join("observations.csv"))?;
        let mut files = vec!["sensors.json".to_string(), "wind.csv".into(), "observations.csv".into()];
        if let Some(t) = &self.truth {
            let p = dir.join("truth.json");
            std::fs::write(&p, serde_json::to_string_pretty(t)? + "\n").map_err(|e| Error::io(&p, e))?;
            files.push("truth.json".into());
        }
        Ok(files)
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let array = SensorArray::read_json(dir.join("sensors.json"))?;
        let wind = WindRecord::read_csv(dir.join("wind.csv"))?;
        let observations = Observations::read_csv(dir.join("observations.csv"), array.ids(), wind)?;
        let tp = dir.join("truth.json");
        let truth = if tp.exists() {
            let text = std::fs::read_to_string(&tp).map_err(|e| Error::io(&tp, e))?;
            Some(
                serde_json::from_str(&text)
                    .map_err(|e| Error::Config(format!("{}: {e}", tp.display())))?,
            )
        } else {
            None
        };
        Ok(Self {
            array,
            observations,
            truth,
        })
    }
}

/// Sensors on a plane `dts` metres downwind of the source.
pub fn sensor_array(cfg: &ScenarioConfig) -> SensorArray {
    let b = &cfg.base;
    let x = b.source.location[0] + cfg.dts();
    let positions: Vec<[f64; 3]> = match cfg.sl() {
        SensorLayoutKind::Grid => linspace(b.sensor_y[0], b.sensor_y[1], 6)
            .into_iter()
            .flat_map(|y| {
                linspace(b.sensor_z[0], b.sensor_z[1], 6)
                    .into_iter()
                    .map(move |z| [x, y, z])
            })
            .collect(),
        SensorLayoutKind::Line => linspace(b.sensor_y[0], b.sensor_y[1], 36)
            .into_iter()
            .map(|y| [x, y, b.line_z])
            .collect(),
        SensorLayoutKind::SparseLine => linspace(b.sensor_y[0], b.sensor_y[1], 6)
            .into_iter()
            .map(|y| [x, y, b.line_z])
            .collect(),
    };
    SensorArray {
        sample_rate: b.sample_rate,
        beam_spacing: crate::sensing::DEFAULT_BEAM_SPACING,
        sensors: positions
            .into_iter()
            .enumerate()
            .map(|(i, position)| Sensor {
                id: format!("s{:02}", i + 1),
                geometry: SensorGeometry::Point { position },
            })
            .collect(),
    }
}

pub fn wind_scenario(cfg: &ScenarioConfig) -> WindScenario {
    let dt = 1.0 / cfg.base.sample_rate;
    WindScenario {
        coverage_deg: cfg.wdc(),
        duration: cfg.ops() as f64 * dt,
        dt,
        ..cfg.base.wind.clone()
    }
}

/// Synthetic data for the configured factor levels.
pub fn simulate_dataset(cfg: &ScenarioConfig, tables: &AscTables) -> Result<Dataset> {
    cfg.validate()?;
    let seed = cfg.seeds.data;
    let array = sensor_array(cfg);
    let wind = synthesize_wind(&wind_scenario(cfg), seed)?;
    let layout = ObservationLayout::full(array.ids(), wind.len());
    let source = cfg.base.source;
    let dispersion = cfg.dpv();
    let a = coupling_matrix_for(
        &[source],
        &array,
        &wind,
        &layout,
        &DispersionSpec::Draxler(dispersion),
        &cfg.atmosphere,
        tables,
    )?;
    let rate = cfg.ser();
    let bg = BackgroundModel::uniform(array.sensors.len(), cfg.base.background[0], cfg.base.background[1]);
    let syn = synthesize_observations(&a, &[rate], &bg, cfg.base.noise_var, &layout, &wind, seed)?;
    Ok(Dataset {
        array,
        observations: syn.observations,
        truth: Some(GroundTruth {
            rate,
            location: source.location,
            dispersion,
            beta: syn.beta,
            noise_var: cfg.base.noise_var,
        }),
    })
}

/// Inversion problem for a data set under the configured model.
pub fn build_problem(
    cfg: &ScenarioConfig,
    data: &Dataset,
    mode: DispersionMode,
    source: SourceGeometry,
    tables: &AscTables,
) -> Result<Problem> {
    Problem::new(
        &data.observations,
        &data.array,
        source,
        cfg.atmosphere,
        mode,
        cfg.priors.clone(),
        tables,
    )
}
