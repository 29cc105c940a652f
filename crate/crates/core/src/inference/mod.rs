//! Single-source Bayesian inversion: M-MALA on the source parameters within
//! a Gibbs sweep over the background and noise variance.

pub mod chain;
pub mod gibbs;
pub mod init;
pub mod mmala;
pub mod model;
pub mod priors;

pub use chain::{run_chain, ChainOutput, ChainState, Checkpoint, Sampler, SamplerConfig, Trace, TraceRow};
pub use init::{initialize, InitConfig, Initialization};
pub use mmala::{mmala_step, Evaluation, MalaPoint, Metric, Target};
pub use model::{DispersionMode, Problem, Sufficient};
pub use priors::Priors;
