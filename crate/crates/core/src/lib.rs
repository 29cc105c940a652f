pub mod diagnostics;
pub mod error;
pub mod harness;
pub mod inference;
pub mod plume;
pub mod real;

pub use error::{Error, Result};
pub mod sensing;
pub mod wind;
