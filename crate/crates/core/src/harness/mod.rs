//! Configuration-driven experiments: synthetic scenarios, inversions,
//! factor sweeps, the misspecification study and the trial comparison.

pub mod commands;
pub mod config;
pub mod scenario;

pub use config::{Factor, Level, ModelChoice, ScalePreset, ScenarioConfig};
pub use scenario::{simulate_dataset, Dataset, GroundTruth};
