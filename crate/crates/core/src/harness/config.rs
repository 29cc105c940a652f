use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{DispersionMode, Priors, SamplerConfig};
use crate::plume::{AtmosphereSpec, DispersionSpec, DraxlerParams, SourceGeometry, StabilityClass};
use crate::sensing::chilbolton::AggregationConfig;
use crate::wind::WindScenario;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Level {
    L,
    #[default]
    M,
    H,
}

impl Level {
    pub const ALL: [Level; 3] = [Level::L, Level::M, Level::H];

    fn idx(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// The six experimental factors.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Factor {
    Wdc,
    Dpv,
    Ser,
    Dts,
    Ops,
    Sl,
}

impl Factor {
    pub const ALL: [Factor; 6] = [Factor::Wdc, Factor::Dpv, Factor::Ser, Factor::Dts, Factor::Ops, Factor::Sl];
}

impl fmt::Display for Factor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Factor::Wdc => "WDC",
            Factor::Dpv => "DPV",
            Factor::Ser => "SER",
            Factor::Dts => "DTS",
            Factor::Ops => "OPS",
            Factor::Sl => "SL",
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Factors {
    #[serde(default)]
    pub wdc: Level,
    #[serde(default)]
    pub dpv: Level,
    #[serde(default)]
    pub ser: Level,
    #[serde(default)]
    pub dts: Level,
    #[serde(default)]
    pub ops: Level,
    #[serde(default)]
    pub sl: Level,
}

impl Factors {
    pub fn get(&self, f: Factor) -> Level {
        match f {
            Factor::Wdc => self.wdc,
            Factor::Dpv => self.dpv,
            Factor::Ser => self.ser,
            Factor::Dts => self.dts,
            Factor::Ops => self.ops,
            Factor::Sl => self.sl,
        }
    }

    pub fn set(&mut self, f: Factor, level: Level) {
        match f {
            Factor::Wdc => self.wdc = level,
            Factor::Dpv => self.dpv = level,
            Factor::Ser => self.ser = level,
            Factor::Dts => self.dts = level,
            Factor::Ops => self.ops = level,
            Factor::Sl => self.sl = level,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SensorLayoutKind {
    /// 36 × 1 line across the plume.
    Line,
    /// 6 × 6 vertical grid across the plume.
    Grid,
    /// 6 × 1 line across the plume.
    SparseLine,
}

/// Values taken by each factor at L, M and H. DTS and OPS values and the
/// middle WDC angle beyond the documented ones are adjustable defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LevelTable {
    /// Wind direction coverage, degrees.
    pub wdc: [f64; 3],
    pub dpv: [DraxlerParams; 3],
    /// kg/s.
    pub ser: [f64; 3],
    /// Downwind distance from source to the sensor plane, metres.
    pub dts: [f64; 3],
    /// Observations per sensor.
    pub ops: [usize; 3],
    pub sl: [SensorLayoutKind; 3],
}

impl Default for LevelTable {
    fn default() -> Self {
        Self {
            wdc: [60.0, 140.0, 360.0],
            dpv: [
                DraxlerParams {
                    a_h: 1.4,
                    b_h: 0.9,
                    a_v: 1.2,
                    b_v: 0.95,
                },
                DraxlerParams::UNIT,
                DraxlerParams {
                    a_h: 0.9,
                    b_h: 0.8,
                    a_v: 0.7,
                    b_v: 0.85,
                },
            ],
            ser: [0.000195, 0.00039, 0.00078],
            dts: [25.0, 40.0, 55.0],
            ops: [50, 100, 200],
            sl: [SensorLayoutKind::Line, SensorLayoutKind::Grid, SensorLayoutKind::SparseLine],
        }
    }
}

/// Fixed scenario settings shared by every level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaseScenario {
    pub source: SourceGeometry,
    /// Noise variance, PPM².
    pub noise_var: f64,
    /// Mean and variance of the true per-sensor background, PPM and PPM².
    pub background: [f64; 2],
    /// Crosswind extent of the sensor layouts, metres.
    pub sensor_y: [f64; 2],
    /// Vertical extent of the grid layout, metres.
    pub sensor_z: [f64; 2],
    /// Height of the line layouts, metres.
    pub line_z: f64,
    /// Hz.
    pub sample_rate: f64,
    /// Speed, direction and vertical variability; coverage and duration are
    /// set by the WDC and OPS levels.
    pub wind: WindScenario,
}

impl Default for BaseScenario {
    fn default() -> Self {
        Self {
            source: SourceGeometry {
                location: [50.0, 50.0, 5.0],
                height: 5.0,
                half_width: 1.0,
                half_height: 1.0,
            },
            noise_var: 1e-6,
            background: [1.93, 1e-4],
            sensor_y: [25.0, 75.0],
            sensor_z: [1.0, 11.0],
            line_z: 5.0,
            sample_rate: 1.0,
            wind: WindScenario::default(),
        }
    }
}

/// Which dispersion model an inversion uses.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ModelChoice {
    #[default]
    EstDraxler,
    EstSmith(StabilityClass),
    Briggs(StabilityClass),
    Smith(StabilityClass),
    /// Draxler parameters fixed at the scenario's true values.
    DraxlerTruth,
}

impl ModelChoice {
    /// The fourteen models of the trial comparison.
    pub fn comparison_set() -> Vec<ModelChoice> {
        let mut v: Vec<ModelChoice> = StabilityClass::ALL.iter().map(|&c| ModelChoice::Briggs(c)).collect();
        v.extend(StabilityClass::ALL.iter().map(|&c| ModelChoice::Smith(c)));
        v.push(ModelChoice::EstSmith(StabilityClass::B));
        v.push(ModelChoice::EstDraxler);
        v
    }

    pub fn to_mode(self, truth: DraxlerParams) -> DispersionMode {
        match self {
            ModelChoice::EstDraxler => DispersionMode::EstimateDraxler,
            ModelChoice::EstSmith(class) => DispersionMode::EstimateSmith { class },
            ModelChoice::Briggs(class) => DispersionMode::Fixed {
                spec: DispersionSpec::Briggs { class },
            },
            ModelChoice::Smith(class) => DispersionMode::Fixed {
                spec: DispersionSpec::Smith { class, scale: None },
            },
            ModelChoice::DraxlerTruth => DispersionMode::Fixed {
                spec: DispersionSpec::Draxler(truth),
            },
        }
    }
}

impl fmt::Display for ModelChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelChoice::EstDraxler => f.write_str("est-draxler"),
            ModelChoice::EstSmith(c) => write!(f, "est-smith:{c}"),
            ModelChoice::Briggs(c) => write!(f, "briggs:{c}"),
            ModelChoice::Smith(c) => write!(f, "smith:{c}"),
            ModelChoice::DraxlerTruth => f.write_str("draxler-truth"),
        }
    }
}

impl FromStr for ModelChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        let (head, class) = match lower.split_once(':') {
            Some((h, c)) => (h, Some(c.parse::<StabilityClass>()?)),
            None => (lower.as_str(), None),
        };
        Ok(match (head, class) {
            ("est-draxler", None) => ModelChoice::EstDraxler,
            ("est-smith", c) => ModelChoice::EstSmith(c.unwrap_or(StabilityClass::B)),
            ("briggs", Some(c)) => ModelChoice::Briggs(c),
            ("smith", Some(c)) => ModelChoice::Smith(c),
            ("draxler-truth", None) => ModelChoice::DraxlerTruth,
            _ => {
                return Err(Error::Config(format!(
                    "unknown model {s:?}; expected est-draxler, est-smith[:class], briggs:<class>, smith:<class> or draxler-truth"
                )))
            }
        })
    }
}

impl Serialize for ModelChoice {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for ModelChoice {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Seeds {
    pub data: u64,
    pub chain: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Self { data: 1, chain: 2 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MisspecConfig {
    pub truth: DraxlerParams,
    /// Multipliers applied to the one misspecified parameter.
    pub factors: Vec<f64>,
}

impl Default for MisspecConfig {
    fn default() -> Self {
        Self {
            truth: DraxlerParams {
                a_h: 1.0,
                b_h: 0.8,
                a_v: 1.0,
                b_v: 0.8,
            },
            factors: vec![0.5, 2.0],
        }
    }
}

/// Settings for the release-trial comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrialConfig {
    /// Trial directory; a synthetic trial is generated when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data_dir: Option<std::path::PathBuf>,
    pub models: Vec<ModelChoice>,
    pub aggregation: AggregationConfig,
    pub priors: Priors,
}

impl Default for TrialConfig {
    fn default() -> Self {
        let mut priors = Priors::default();
        priors.rate.log_mean = 2e-4f64.ln();
        priors.background.mean = 1.95;
        priors.noise.scale = 1e-6;
        Self {
            data_dir: None,
            models: ModelChoice::comparison_set(),
            aggregation: AggregationConfig::default(),
            priors,
        }
    }
}

/// Complete configuration for every command.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub factors: Factors,
    #[serde(default)]
    pub levels: LevelTable,
    #[serde(default)]
    pub base: BaseScenario,
    #[serde(default)]
    pub atmosphere: AtmosphereSpec,
    #[serde(default)]
    pub priors: Priors,
    #[serde(default)]
    pub sampler: SamplerConfig,
    #[serde(default)]
    pub model: ModelChoice,
    #[serde(default)]
    pub seeds: Seeds,
    #[serde(default)]
    pub misspec: MisspecConfig,
    #[serde(default)]
    pub trial: TrialConfig,
}

/// Iteration presets selectable on the command line.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalePreset {
    Smoke,
    Desk,
    Paper,
}

impl FromStr for ScalePreset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "smoke" => Ok(ScalePreset::Smoke),
            "desk" => Ok(ScalePreset::Desk),
            "paper" => Ok(ScalePreset::Paper),
            other => Err(Error::Config(format!(
                "unknown scale {other:?}; expected smoke, desk or paper"
            ))),
        }
    }
}

impl ScalePreset {
    /// (iterations, burn-in) for synthetic inversions.
    pub fn iterations(self) -> (usize, usize) {
        match self {
            ScalePreset::Smoke => (200, 100),
            ScalePreset::Desk => (2000, 1000),
            ScalePreset::Paper => (20000, 10000),
        }
    }

    /// (iterations, burn-in) for the trial comparison.
    pub fn trial_iterations(self) -> (usize, usize) {
        match self {
            ScalePreset::Smoke => (200, 100),
            ScalePreset::Desk => (2000, 800),
            ScalePreset::Paper => (10000, 4000),
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| e.context(path.display().to_string()))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<()> {
        let field = |path: &str, e: Error| Error::Config(format!("{path}: {e}"));
        self.priors.validate().map_err(|e| field("priors", e))?;
        self.sampler.validate().map_err(|e| field("sampler", e))?;
        self.trial.priors.validate().map_err(|e| field("trial.priors", e))?;
        self.base.source.validate().map_err(|e| field("base.source", e))?;
        self.atmosphere
            .validate(&self.base.source)
            .map_err(|e| field("atmosphere", e))?;
        let b = &self.base;
        if !(b.noise_var >= 0.0 && b.background[1] >= 0.0 && b.sample_rate > 0.0) {
            return Err(Error::Config(
                "base: noise_var and background variance must be >= 0, sample_rate > 0".into(),
            ));
        }
        for (i, w) in self.levels.wdc.iter().enumerate() {
            if !(*w > 0.0 && *w <= 360.0) {
                return Err(Error::Config(format!("levels.wdc[{i}] = {w} must lie in (0, 360]")));
            }
        }
        for (i, p) in self.levels.dpv.iter().enumerate() {
            DispersionSpec::Draxler(*p)
                .validate()
                .map_err(|e| field(&format!("levels.dpv[{i}]"), e))?;
        }
        for (i, s) in self.levels.ser.iter().enumerate() {
            if !(*s > 0.0) {
                return Err(Error::Config(format!("levels.ser[{i}] must be positive")));
            }
        }
        for (i, d) in self.levels.dts.iter().enumerate() {
            if !(*d > 0.0) {
                return Err(Error::Config(format!("levels.dts[{i}] must be positive")));
            }
        }
        if self.levels.ops.contains(&0) {
            return Err(Error::Config("levels.ops entries must be positive".into()));
        }
        if self.misspec.factors.iter().any(|f| !(*f > 0.0)) {
            return Err(Error::Config("misspec.factors must be positive".into()));
        }
        Ok(())
    }

    pub fn apply_scale(&mut self, scale: ScalePreset) {
        let (n, b) = scale.iterations();
        self.sampler.n_iter = n;
        self.sampler.burn_in = b;
    }

    pub fn wdc(&self) -> f64 {
        self.levels.wdc[self.factors.wdc.idx()]
    }

    pub fn dpv(&self) -> DraxlerParams {
        self.levels.dpv[self.factors.dpv.idx()]
    }

    pub fn ser(&self) -> f64 {
        self.levels.ser[self.factors.ser.idx()]
    }

    pub fn dts(&self) -> f64 {
        self.levels.dts[self.factors.dts.idx()]
    }

    pub fn ops(&self) -> usize {
        self.levels.ops[self.factors.ops.idx()]
    }

    pub fn sl(&self) -> SensorLayoutKind {
        self.levels.sl[self.factors.sl.idx()]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_default() {
        let c = ScenarioConfig::default();
        let text = c.to_toml_string();
        assert_eq!(ScenarioConfig::from_toml_str(&text).unwrap(), c);
    }

    #[test]
    fn empty_file_is_level_m() {
        let c = ScenarioConfig::from_toml_str("").unwrap();
        assert_eq!(c.ser(), 0.00039);
        assert_eq!(c.sl(), SensorLayoutKind::Grid);
        assert_eq!(c.wdc(), 140.0);
    }

    #[test]
    fn unknown_field_is_config_error() {
        let err = ScenarioConfig::from_toml_str("[factors]\nwdc = \"M\"\nbogus = 1\n").unwrap_err();
        assert!(err.is_config());
        assert!(err.to_string().contains("bogus"), "{err}");
    }

    #[test]
    fn model_names_parse() {
        for m in ModelChoice::comparison_set() {
            assert_eq!(m.to_string().parse::<ModelChoice>().unwrap(), m);
        }
        assert_eq!(ModelChoice::comparison_set().len(), 14);
        assert!("briggs".parse::<ModelChoice>().is_err());
    }
}
