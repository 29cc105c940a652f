use std::path::Path;

use nalgebra::DVector;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::gibbs::{gibbs_beta, gibbs_sigma2};
use super::init::{initialize, InitConfig, Initialization};
use super::mmala::{adapt_step_size, mmala_step, MalaPoint};
use super::model::{Problem, Sufficient};
use crate::error::{Error, Result};
use crate::wind::stream_rng;

const INIT_STREAM: u64 = 30;
const CHAIN_STREAM: u64 = 31;
const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainState {
    /// Sampler coordinates: log rate, position, log dispersion.
    pub theta: Vec<f64>,
    pub sigma2: f64,
    /// One background per sensor, PPM.
    pub beta: Vec<f64>,
    pub step_size: f64,
    /// Completed iterations.
    pub iteration: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    pub n_iter: usize,
    pub burn_in: usize,
    pub initial_step: f64,
    pub target_accept: f64,
    #[serde(default)]
    pub init: InitConfig,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            n_iter: 2000,
            burn_in: 1000,
            initial_step: 1.0,
            target_accept: 0.57,
            init: InitConfig::default(),
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_iter == 0 || self.burn_in >= self.n_iter {
            return Err(Error::Config(format!(
                "need 0 <= burn_in ({}) < n_iter ({})",
                self.burn_in, self.n_iter
            )));
        }
        if !(self.initial_step > 0.0 && self.initial_step.is_finite()) {
            return Err(Error::Config("initial_step must be positive".into()));
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return Err(Error::Config("target_accept must lie in (0, 1)".into()));
        }
        self.init.validate()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    /// Constrained parameters in [`Trace::names`] order.
    pub params: Vec<f64>,
    pub sigma2: f64,
    pub beta: Vec<f64>,
    pub log_posterior: f64,
    pub log_likelihood: f64,
    pub accept_prob: f64,
    pub accepted: bool,
    pub step_size: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    pub names: Vec<String>,
    pub sensor_ids: Vec<String>,
    pub burn_in: usize,
    pub rows: Vec<TraceRow>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Post-burn-in rows.
    pub fn kept(&self) -> &[TraceRow] {
        &self.rows[self.burn_in.min(self.rows.len())..]
    }

    pub fn param_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Post-burn-in draws of a named quantity: a parameter, `sigma2`,
    /// `beta_<sensor>`, `log_posterior` or `log_likelihood`.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let kept = self.kept();
        if let Some(i) = self.param_index(name) {
            return Some(kept.iter().map(|r| r.params[i]).collect());
        }
        if let Some(id) = name.strip_prefix("beta_") {
            let j = self.sensor_ids.iter().position(|s| s == id)?;
            return Some(kept.iter().map(|r| r.beta[j]).collect());
        }
        match name {
            "sigma2" => Some(kept.iter().map(|r| r.sigma2).collect()),
            "log_posterior" => Some(kept.iter().map(|r| r.log_posterior).collect()),
            "log_likelihood" => Some(kept.iter().map(|r| r.log_likelihood).collect()),
            _ => None,
        }
    }

    pub fn acceptance_rate(&self) -> f64 {
        let k = self.kept();
        if k.is_empty() {
            return f64::NAN;
        }
        k.iter().filter(|r| r.accepted).count() as f64 / k.len() as f64
    }

    fn header(&self) -> Vec<String> {
        let mut h = vec!["iteration".to_string()];
        h.extend(self.names.iter().cloned());
        h.push("sigma2".into());
        h.extend(self.sensor_ids.iter().map(|s| format!("beta_{s}")));
        h.extend(
            ["log_posterior", "log_likelihood", "accept_prob", "accepted", "step_size"]
                .map(String::from),
        );
        h
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(self.header())?;
        for r in &self.rows {
            let mut rec = vec![r.iteration.to_string()];
            rec.extend(r.params.iter().map(f64::to_string));
            rec.push(r.sigma2.to_string());
            rec.extend(r.beta.iter().map(f64::to_string));
            rec.push(r.log_posterior.to_string());
            rec.push(r.log_likelihood.to_string());
            rec.push(r.accept_prob.to_string());
            rec.push(u8::from(r.accepted).to_string());
            rec.push(r.step_size.to_string());
            w.write_record(rec)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Reads a trace written by [`Trace::write_csv`] for the given layout.
    pub fn read_csv(
        path: impl AsRef<Path>,
        names: Vec<String>,
        sensor_ids: Vec<String>,
        burn_in: usize,
    ) -> Result<Self> {
        let path = path.as_ref();
        let mut trace = Trace {
            names,
            sensor_ids,
            burn_in,
            rows: vec![],
        };
        let mut r = csv::Reader::from_path(path)?;
        let expected = trace.header();
        let got: Vec<String> = r.headers()?.iter().map(String::from).collect();
        if got != expected {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: 1,
                message: "trace header does not match the model".into(),
            });
        }
        let (np, ns) = (trace.names.len(), trace.sensor_ids.len());
        for (i, rec) in r.records().enumerate() {
            let line = i as u64 + 2;
            let err = |message: String| Error::Parse {
                path: path.to_path_buf(),
                line,
                message,
            };
            let rec = rec.map_err(|e| err(e.to_string()))?;
            let f = |c: usize| -> Result<f64> {
                rec[c].parse::<f64>().map_err(|e| err(format!("column {c}: {e}")))
            };
            let iteration = rec[0].parse::<usize>().map_err(|e| err(e.to_string()))?;
            let mut c = 1;
            let params = (0..np).map(|k| f(c + k)).collect::<Result<Vec<_>>>()?;
            c += np;
            let sigma2 = f(c)?;
            c += 1;
            let beta = (0..ns).map(|k| f(c + k)).collect::<Result<Vec<_>>>()?;
            c += ns;
            trace.rows.push(TraceRow {
                iteration,
                params,
                sigma2,
                beta,
                log_posterior: f(c)?,
                log_likelihood: f(c + 1)?,
                accept_prob: f(c + 2)?,
                accepted: &rec[c + 3] == "1",
                step_size: f(c + 4)?,
            });
        }
        Ok(trace)
    }
}

/// Everything needed to continue a chain bit-for-bit.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub seed: u64,
    pub state: ChainState,
    pub rng: ChaCha8Rng,
    pub metric_fallbacks: usize,
}

impl Checkpoint {
    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")
            .map_err(|e| Error::io(path, e))
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cp: Checkpoint = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if cp.version != CHECKPOINT_VERSION {
            return Err(Error::Config(format!(
                "{}: checkpoint version {} is not supported",
                path.display(),
                cp.version
            )));
        }
        Ok(cp)
    }
}

/// M-MALA-within-Gibbs sampler for one [`Problem`].
pub struct Sampler<'a> {
    problem: &'a Problem,
    config: SamplerConfig,
    seed: u64,
    rng: ChaCha8Rng,
    state: ChainState,
    current: Option<MalaPoint<Sufficient>>,
    trace: Trace,
    metric_fallbacks: usize,
    init: Option<Initialization>,
}

impl<'a> Sampler<'a> {
    pub fn new(problem: &'a Problem, config: SamplerConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let init = initialize(problem, &config.init, &mut stream_rng(seed, INIT_STREAM))?;
        let state = ChainState {
            theta: init.theta.clone(),
            sigma2: init.sigma2,
            beta: init.beta.clone(),
            step_size: config.initial_step,
            iteration: 0,
        };
        let mut s = Self::from_parts(problem, config, seed, stream_rng(seed, CHAIN_STREAM), state, 0)?;
        s.init = Some(init);
        Ok(s)
    }

    /// Starts from an explicit state instead of the two-stage search.
    pub fn from_state(problem: &'a Problem, config: SamplerConfig, seed: u64, state: ChainState) -> Result<Self> {
        config.validate()?;
        Self::from_parts(problem, config, seed, stream_rng(seed, CHAIN_STREAM), state, 0)
    }

    /// Continues a chain from a checkpoint and the trace written with it.
    pub fn resume(problem: &'a Problem, config: SamplerConfig, checkpoint: Checkpoint, trace: Trace) -> Result<Self> {
        config.validate()?;
        if trace.len() != checkpoint.state.iteration {
            return Err(Error::InvalidInput(format!(
                "trace has {} rows, checkpoint is at iteration {}",
                trace.len(),
                checkpoint.state.iteration
            )));
        }
        let mut s = Self::from_parts(
            problem,
            config,
            checkpoint.seed,
            checkpoint.rng,
            checkpoint.state,
            checkpoint.metric_fallbacks,
        )?;
        s.trace.rows = trace.rows;
        Ok(s)
    }

    fn from_parts(
        problem: &'a Problem,
        config: SamplerConfig,
        seed: u64,
        rng: ChaCha8Rng,
        state: ChainState,
        metric_fallbacks: usize,
    ) -> Result<Self> {
        if state.theta.len() != problem.dim() || state.beta.len() != problem.n_sensors() {
            return Err(Error::InvalidInput("chain state does not match the problem".into()));
        }
        problem.check_support(&state.theta)?;
        let trace = Trace {
            names: problem.mode().names().into_iter().map(String::from).collect(),
            sensor_ids: problem.sensor_ids().to_vec(),
            burn_in: config.burn_in,
            rows: vec![],
        };
        let mut s = Self {
            problem,
            config,
            seed,
            rng,
            state,
            current: None,
            trace,
            metric_fallbacks,
            init: None,
        };
        let suff = problem.sufficient(&s.state.theta).ok_or_else(|| {
            Error::Inference("forward model is not finite at the starting point".into())
        })?;
        s.current = Some(s.refresh(suff)?);
        Ok(s)
    }

    /// Re-evaluates the current θ under the current β and σ².
    fn refresh(&self, suff: Sufficient) -> Result<MalaPoint<Sufficient>> {
        let theta = &self.state.theta;
        let eval = self
            .problem
            .evaluate_with(theta, suff, &self.state.beta, self.state.sigma2)
            .ok_or_else(|| Error::Inference("θ conditional is not finite at the current state".into()))?;
        Ok(MalaPoint::new(DVector::from_column_slice(theta), eval))
    }

    pub fn state(&self) -> &ChainState {
        &self.state
    }

    pub fn trace(&self) -> &Trace {
        &self.trace
    }

    pub fn into_trace(self) -> Trace {
        self.trace
    }

    pub fn initialization(&self) -> Option<&Initialization> {
        self.init.as_ref()
    }

    pub fn metric_fallbacks(&self) -> usize {
        self.metric_fallbacks
    }

    pub fn is_done(&self) -> bool {
        self.state.iteration >= self.config.n_iter
    }

    /// One sweep: an M-MALA move on θ, then β, then σ².
    pub fn step(&mut self) -> Result<()> {
        let problem = self.problem;
        let point = self.current.take().expect("current point present");
        if point.metric.is_fallback() {
            self.metric_fallbacks += 1;
        }
        let target = problem.conditional(&self.state.beta, self.state.sigma2);
        let outcome = mmala_step(&target, point, self.state.step_size, &mut self.rng);
        self.state.theta = outcome.point.theta.iter().copied().collect();

        let step_used = self.state.step_size;
        if self.state.iteration < self.config.burn_in {
            self.state.step_size = adapt_step_size(
                self.state.step_size,
                outcome.accept_prob,
                self.config.target_accept,
                self.state.iteration,
            );
        }

        let suff = outcome.point.aux;
        self.state.beta = gibbs_beta(
            &suff.counts(),
            &suff.residual_sums(),
            self.state.sigma2,
            problem.background(),
            &mut self.rng,
        );
        self.state.sigma2 = gibbs_sigma2(
            suff.n_obs(),
            suff.sum_sq_residuals(&self.state.beta),
            &problem.priors().noise,
            &mut self.rng,
        );

        let loglik = suff.log_likelihood(&self.state.beta, self.state.sigma2);
        let log_posterior = problem.log_prior_theta(&self.state.theta)
            + loglik
            + problem.log_prior_nuisance(&self.state.beta, self.state.sigma2);
        self.trace.rows.push(TraceRow {
            iteration: self.state.iteration,
            params: problem.to_constrained(&self.state.theta),
            sigma2: self.state.sigma2,
            beta: self.state.beta.clone(),
            log_posterior,
            log_likelihood: loglik,
            accept_prob: outcome.accept_prob,
            accepted: outcome.accepted,
            step_size: step_used,
        });
        self.current = Some(self.refresh(suff)?);
        self.state.iteration += 1;
        Ok(())
    }

    /// Runs until `iteration` sweeps are complete or the chain is done.
    pub fn run_until(&mut self, iteration: usize) -> Result<()> {
        while self.state.iteration < iteration.min(self.config.n_iter) {
            self.step()?;
        }
        Ok(())
    }

    pub fn run(&mut self) -> Result<()> {
        self.run_until(self.config.n_iter)
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            version: CHECKPOINT_VERSION,
            seed: self.seed,
            state: self.state.clone(),
            rng: self.rng.clone(),
            metric_fallbacks: self.metric_fallbacks,
        }
    }
}

/// Output of a complete chain.
#[derive(Clone, Debug)]
pub struct ChainOutput {
    pub trace: Trace,
    pub initialization: Option<Initialization>,
    pub metric_fallbacks: usize,
    pub final_state: ChainState,
}

pub fn run_chain(problem: &Problem, config: &SamplerConfig, seed: u64) -> Result<ChainOutput> {
    let mut s = Sampler::new(problem, config.clone(), seed)?;
    s.run()?;
    Ok(ChainOutput {
        initialization: s.init.clone(),
        metric_fallbacks: s.metric_fallbacks,
        final_state: s.state.clone(),
        trace: s.trace,
    })
}
