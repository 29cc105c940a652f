//! Posterior summaries, model-comparison scores and plot-ready tables.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{Problem, Trace};

/// Linear-interpolation quantile of sorted data (type 7).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample standard deviation.
pub fn sd(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(values);
    (values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
}

/// Autocovariances at lags `0..max_lag`, biased (divided by n).
fn autocovariance(values: &[f64], max_lag: usize) -> Vec<f64> {
    let n = values.len();
    let m = mean(values);
    let c: Vec<f64> = values.iter().map(|v| v - m).collect();
    (0..max_lag.min(n))
        .map(|l| c[..n - l].iter().zip(&c[l..]).map(|(a, b)| a * b).sum::<f64>() / n as f64)
        .collect()
}

/// Effective sample size with Geyer's initial positive sequence estimator.
pub fn effective_sample_size(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 4 {
        return n as f64;
    }
    let acov = autocovariance(values, n);
    if acov[0] <= 0.0 {
        return n as f64;
    }
    let rho: Vec<f64> = acov.iter().map(|c| c / acov[0]).collect();
    let mut tau = -1.0;
    let mut prev = f64::INFINITY;
    let mut k = 0;
    while 2 * k + 1 < rho.len() {
        // Pair sums must stay positive and, for the monotone variant,
        // non-increasing.
        let pair = (rho[2 * k] + rho[2 * k + 1]).min(prev);
        if pair <= 0.0 {
            break;
        }
        tau += 2.0 * pair;
        prev = pair;
        k += 1;
    }
    // Antithetic chains can give tau < 1; the estimate is capped at n.
    (n as f64 / tau.max(1.0)).min(n as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamSummary {
    pub name: String,
    pub mean: f64,
    pub median: f64,
    pub sd: f64,
    pub q025: f64,
    pub q25: f64,
    pub q75: f64,
    pub q975: f64,
    pub ess: f64,
}

impl ParamSummary {
    pub fn from_draws(name: &str, draws: &[f64]) -> Self {
        let s = sorted(draws);
        Self {
            name: name.to_string(),
            mean: mean(draws),
            median: quantile_sorted(&s, 0.5),
            sd: sd(draws),
            q025: quantile_sorted(&s, 0.025),
            q25: quantile_sorted(&s, 0.25),
            q75: quantile_sorted(&s, 0.75),
            q975: quantile_sorted(&s, 0.975),
            ess: effective_sample_size(draws),
        }
    }

    pub fn covers_95(&self, value: f64) -> bool {
        self.q025 <= value && value <= self.q975
    }

    pub fn covers_50(&self, value: f64) -> bool {
        self.q25 <= value && value <= self.q75
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub params: Vec<ParamSummary>,
    pub acceptance_rate: f64,
    pub n_draws: usize,
    /// Posterior mean of `b_H` or `b_V` above one.
    pub misspecification_warning: bool,
}

impl Summary {
    pub fn get(&self, name: &str) -> Option<&ParamSummary> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path)?;
        for p in &self.params {
            w.serialize(p)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n").map_err(|e| Error::io(path, e))
    }
}

/// Post-burn-in summary of every parameter, σ² and each background.
pub fn summarize(trace: &Trace) -> Result<Summary> {
    let kept = trace.kept();
    if kept.is_empty() {
        return Err(Error::Inference("trace has no post-burn-in draws".into()));
    }
    let mut names: Vec<String> = trace.names.clone();
    names.push("sigma2".into());
    names.extend(trace.sensor_ids.iter().map(|s| format!("beta_{s}")));
    let params: Vec<ParamSummary> = names
        .iter()
        .map(|n| ParamSummary::from_draws(n, &trace.column(n).expect("known column")))
        .collect();
    let warn = ["b_h", "b_v"]
        .iter()
        .any(|n| params.iter().any(|p| p.name == *n && p.mean > 1.0));
    Ok(Summary {
        params,
        acceptance_rate: trace.acceptance_rate(),
        n_draws: kept.len(),
        misspecification_warning: warn,
    })
}

/// `k ln n − 2 ℓ`.
pub fn bic(max_log_likelihood: f64, n_params: usize, n_obs: usize) -> f64 {
    n_params as f64 * (n_obs as f64).ln() - 2.0 * max_log_likelihood
}

pub fn rmse(observed: &[f64], fitted: &[f64]) -> f64 {
    assert_eq!(observed.len(), fitted.len());
    (observed
        .iter()
        .zip(fitted)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        / observed.len() as f64)
        .sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFit {
    pub model: String,
    pub bic: f64,
    pub rmse: f64,
    pub max_log_likelihood: f64,
    pub n_params: usize,
    pub n_obs: usize,
}

/// BIC from the largest log-likelihood in the post-burn-in trace, counting
/// θ, σ² and one background per sensor; RMSE of the fit at the posterior
/// means.
pub fn model_fit(model: &str, problem: &Problem, trace: &Trace) -> Result<ModelFit> {
    let kept = trace.kept();
    if kept.is_empty() {
        return Err(Error::Inference("trace has no post-burn-in draws".into()));
    }
    let max_ll = kept
        .iter()
        .map(|r| r.log_likelihood)
        .fold(f64::NEG_INFINITY, f64::max);
    let k = problem.dim() + 1 + problem.n_sensors();
    let n = problem.n_obs();
    let p_mean: Vec<f64> = (0..trace.names.len())
        .map(|i| mean(&kept.iter().map(|r| r.params[i]).collect::<Vec<_>>()))
        .collect();
    let b_mean: Vec<f64> = (0..problem.n_sensors())
        .map(|j| mean(&kept.iter().map(|r| r.beta[j]).collect::<Vec<_>>()))
        .collect();
    let m = problem.predictions(&problem.to_unconstrained(&p_mean));
    let fitted: Vec<f64> = m
        .iter()
        .zip(problem.sensor_of())
        .map(|(mk, j)| mk + b_mean[j])
        .collect();
    Ok(ModelFit {
        model: model.to_string(),
        bic: bic(max_ll, k, n),
        rmse: rmse(problem.data(), &fitted),
        max_log_likelihood: max_ll,
        n_params: k,
        n_obs: n,
    })
}

pub fn write_fits_csv(fits: &[ModelFit], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    for f in fits {
        w.serialize(f)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Tukey box: quartiles, whiskers at the most extreme draws within
/// 1.5 IQR of the box.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxWhisker {
    pub whisker_lo: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub whisker_hi: f64,
    pub n_outliers: usize,
}

pub fn box_whisker(values: &[f64]) -> BoxWhisker {
    let s = sorted(values);
    let q1 = quantile_sorted(&s, 0.25);
    let q3 = quantile_sorted(&s, 0.75);
    let iqr = q3 - q1;
    let (lo_fence, hi_fence) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
    let inside: Vec<f64> = s
        .iter()
        .copied()
        .filter(|v| *v >= lo_fence && *v <= hi_fence)
        .collect();
    BoxWhisker {
        whisker_lo: inside.first().copied().unwrap_or(q1),
        q1,
        median: quantile_sorted(&s, 0.5),
        q3,
        whisker_hi: inside.last().copied().unwrap_or(q3),
        n_outliers: s.len() - inside.len(),
    }
}

/// Gaussian kernel density on an even grid spanning the draws, with
/// Silverman's bandwidth.
pub fn kde_grid(values: &[f64], n_points: usize) -> Vec<(f64, f64)> {
    let n = values.len() as f64;
    let s = sorted(values);
    let spread = sd(values).min((quantile_sorted(&s, 0.75) - quantile_sorted(&s, 0.25)) / 1.34);
    let spread = if spread > 0.0 { spread } else { sd(values).max(1e-12) };
    let bw = 0.9 * spread * n.powf(-0.2);
    let (lo, hi) = (s[0] - 3.0 * bw, s[s.len() - 1] + 3.0 * bw);
    let norm = 1.0 / (n * bw * (2.0 * std::f64::consts::PI).sqrt());
    (0..n_points)
        .map(|i| {
            let x = lo + (hi - lo) * i as f64 / (n_points.max(2) - 1) as f64;
            let dens = values
                .iter()
                .map(|v| (-0.5 * ((x - v) / bw).powi(2)).exp())
                .sum::<f64>()
                * norm;
            (x, dens)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles_interpolate() {
        let s = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&s, 0.5), 2.5);
        assert_eq!(quantile_sorted(&s, 0.0), 1.0);
        assert_eq!(quantile_sorted(&s, 1.0), 4.0);
    }

    #[test]
    fn box_whisker_flags_outlier() {
        let mut v: Vec<f64> = (0..20).map(f64::from).collect();
        v.push(100.0);
        let b = box_whisker(&v);
        assert_eq!(b.n_outliers, 1);
        assert_eq!(b.whisker_hi, 19.0);
        assert_eq!(b.whisker_lo, 0.0);
    }

    #[test]
    fn bic_formula() {
        assert!((bic(-10.0, 3, 100) - (3.0 * 100f64.ln() + 20.0)).abs() < 1e-12);
    }

    #[test]
    fn kde_integrates_to_one() {
        let v: Vec<f64> = (0..200).map(|i| ((i * 37) % 101) as f64 / 10.0).collect();
        let g = kde_grid(&v, 400);
        let dx = g[1].0 - g[0].0;
        let total: f64 = g.iter().map(|p| p.1).sum::<f64>() * dx;
        assert!((total - 1.0).abs() < 0.01, "{total}");
    }

    #[test]
    fn ess_of_independent_draws_is_near_n() {
        // deterministic low-discrepancy sequence, essentially uncorrelated
        let v: Vec<f64> = (0..4000).map(|i| ((i as f64) * 0.618_033_988_75).fract()).collect();
        let e = effective_sample_size(&v);
        assert!(e > 2000.0, "{e}");
    }
}
