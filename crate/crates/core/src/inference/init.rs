//! Two-stage starting point: a profile-likelihood grid search over
//! position and rate, then a Latin hypercube refinement around the best
//! grid node.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::Problem;
use crate::error::{Error, Result};

/// Floor on the profiled noise variance, so exact fits stay finite.
pub const PROFILE_VAR_FLOOR: f64 = 1e-300;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitConfig {
    /// Grid nodes per horizontal axis, spanning the prior box.
    pub grid_points: usize,
    /// Log-spaced rate nodes.
    pub rate_points: usize,
    /// kg/s.
    pub rate_range: [f64; 2],
    pub lhs_points: usize,
    /// Half-width of the hypercube on every log-scale coordinate.
    pub lhs_log_half_width: f64,
}

impl Default for InitConfig {
    fn default() -> Self {
        Self {
            grid_points: 23,
            rate_points: 31,
            rate_range: [1e-6, 1e-1],
            lhs_points: 64,
            lhs_log_half_width: 0.5,
        }
    }
}

impl InitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid_points < 2 || self.rate_points < 2 {
            return Err(Error::Config("init grids need at least two nodes".into()));
        }
        let [lo, hi] = self.rate_range;
        if !(lo > 0.0 && hi > lo) {
            return Err(Error::Config(format!("init rate range [{lo}, {hi}] is invalid")));
        }
        if !(self.lhs_log_half_width >= 0.0) {
            return Err(Error::Config("lhs_log_half_width must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Initialization {
    pub theta: Vec<f64>,
    pub beta: Vec<f64>,
    pub sigma2: f64,
    /// Best grid node: (x, y, rate).
    pub grid_best: [f64; 3],
    pub grid_profile_loglik: f64,
    pub profile_log_posterior: f64,
}

/// Background and noise variance maximising the likelihood for fixed
/// predictions, and the profiled log-likelihood.
#[derive(Clone, Debug, PartialEq)]
pub struct ProfileFit {
    pub beta: Vec<f64>,
    pub sigma2: f64,
    pub loglik: f64,
}

pub fn profile_fit(d: &[f64], m: &[f64], sensor_of: &[usize], n_sensors: usize) -> ProfileFit {
    let mut sum = vec![0.0; n_sensors];
    let mut cnt = vec![0usize; n_sensors];
    for ((dk, mk), &j) in d.iter().zip(m).zip(sensor_of) {
        sum[j] += dk - mk;
        cnt[j] += 1;
    }
    let beta: Vec<f64> = sum
        .iter()
        .zip(&cnt)
        .map(|(s, &c)| if c > 0 { s / c as f64 } else { 0.0 })
        .collect();
    let ssr: f64 = d
        .iter()
        .zip(m)
        .zip(sensor_of)
        .map(|((dk, mk), &j)| (dk - mk - beta[j]).powi(2))
        .sum();
    let n = d.len() as f64;
    let sigma2 = (ssr / n).max(PROFILE_VAR_FLOOR);
    ProfileFit {
        beta,
        sigma2,
        loglik: -0.5 * n * ((2.0 * std::f64::consts::PI * sigma2).ln() + 1.0),
    }
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

/// `n` points in the box with exactly one point per stratum on every axis.
pub fn latin_hypercube<R: Rng + ?Sized>(n: usize, bounds: &[(f64, f64)], rng: &mut R) -> Vec<Vec<f64>> {
    let mut pts = vec![vec![0.0; bounds.len()]; n];
    for (d, &(lo, hi)) in bounds.iter().enumerate() {
        let mut strata: Vec<usize> = (0..n).collect();
        strata.shuffle(rng);
        for (p, s) in pts.iter_mut().zip(strata) {
            let u: f64 = rng.random();
            p[d] = lo + (hi - lo) * (s as f64 + u) / n as f64;
        }
    }
    pts
}

/// Grid node with the best profile likelihood: (x, y, rate, loglik).
/// Ties keep the first node in x-major, then y, then rate order.
fn grid_search(problem: &Problem, cfg: &InitConfig) -> (f64, f64, f64, f64) {
    let loc = &problem.priors().location;
    let xs = linspace(loc.x_range[0], loc.x_range[1], cfg.grid_points);
    let ys = linspace(loc.y_range[0], loc.y_range[1], cfg.grid_points);
    let [rlo, rhi] = cfg.rate_range;
    let rates: Vec<f64> = linspace(rlo.ln(), rhi.ln(), cfg.rate_points)
        .into_iter()
        .map(f64::exp)
        .collect();
    let sensor_of = problem.sensor_of();
    let nodes: Vec<(f64, f64)> = xs
        .iter()
        .flat_map(|&x| ys.iter().map(move |&y| (x, y)))
        .collect();
    let d = problem.data();
    let best_per_node: Vec<(f64, f64, f64, f64)> = nodes
        .par_iter()
        .map(|&(x, y)| {
            let mut theta = vec![0.0; problem.dim()];
            theta[1] = x;
            theta[2] = y;
            let a = problem.unit_responses(&theta);
            let mut best = (x, y, rates[0], f64::NEG_INFINITY);
            let mut m = vec![0.0; a.len()];
            for &s in &rates {
                for (mk, ak) in m.iter_mut().zip(&a) {
                    *mk = s * ak;
                }
                let fit = profile_fit(d, &m, &sensor_of, problem.n_sensors());
                if fit.loglik > best.3 {
                    best = (x, y, s, fit.loglik);
                }
            }
            best
        })
        .collect();
    best_per_node
        .into_iter()
        .fold((f64::NAN, f64::NAN, f64::NAN, f64::NEG_INFINITY), |acc, c| {
            if c.3 > acc.3 {
                c
            } else {
                acc
            }
        })
}

fn profile_score(problem: &Problem, theta: &[f64], sensor_of: &[usize]) -> (f64, ProfileFit) {
    let lp = problem.log_prior_theta(theta);
    let fit = profile_fit(
        problem.data(),
        &problem.predictions(theta),
        sensor_of,
        problem.n_sensors(),
    );
    let score = if lp.is_finite() && fit.loglik.is_finite() {
        lp + fit.loglik
    } else {
        f64::NEG_INFINITY
    };
    (score, fit)
}

pub fn initialize<R: Rng + ?Sized>(problem: &Problem, cfg: &InitConfig, rng: &mut R) -> Result<Initialization> {
    cfg.validate()?;
    let (gx, gy, gs, gll) = grid_search(problem, cfg);
    if !gll.is_finite() {
        return Err(Error::Inference(
            "grid search found no finite profile likelihood".into(),
        ));
    }
    let sensor_of = problem.sensor_of();
    let loc = &problem.priors().location;
    let dx = (loc.x_range[1] - loc.x_range[0]) / (cfg.grid_points - 1) as f64;
    let dy = (loc.y_range[1] - loc.y_range[0]) / (cfg.grid_points - 1) as f64;
    let h = cfg.lhs_log_half_width;
    let mut start = vec![0.0; problem.dim()];
    start[0] = gs.ln();
    start[1] = gx;
    start[2] = gy;
    let mut bounds = vec![
        (start[0] - h, start[0] + h),
        ((gx - dx).max(loc.x_range[0]), (gx + dx).min(loc.x_range[1])),
        ((gy - dy).max(loc.y_range[0]), (gy + dy).min(loc.y_range[1])),
    ];
    bounds.extend((3..problem.dim()).map(|_| (-h, h)));
    let mut candidates = vec![start];
    candidates.extend(latin_hypercube(cfg.lhs_points, &bounds, rng));
    let scored: Vec<(f64, ProfileFit)> = candidates
        .iter()
        .map(|t| profile_score(problem, t, &sensor_of))
        .collect();
    let (best, _) = scored
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, (s, _))| {
            if *s > acc.1 {
                (i, *s)
            } else {
                acc
            }
        });
    let (score, fit) = scored[best].clone();
    if !score.is_finite() {
        return Err(Error::Inference("no initial point has finite log posterior".into()));
    }
    Ok(Initialization {
        theta: candidates[best].clone(),
        beta: fit.beta,
        sigma2: fit.sigma2,
        grid_best: [gx, gy, gs],
        grid_profile_loglik: gll,
        profile_log_posterior: score,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wind::stream_rng;

    #[test]
    fn lhs_has_one_point_per_stratum() {
        let pts = latin_hypercube(10, &[(0.0, 1.0), (-5.0, 5.0)], &mut stream_rng(3, 0));
        for (d, (lo, hi)) in [(0.0, 1.0), (-5.0, 5.0)].into_iter().enumerate() {
            let mut seen = [false; 10];
            for p in &pts {
                let s = ((p[d] - lo) / (hi - lo) * 10.0).floor() as usize;
                assert!(!seen[s]);
                seen[s] = true;
            }
        }
    }

    #[test]
    fn profile_fit_recovers_offsets() {
        let d = [2.0, 2.0, 3.0, 3.5];
        let m = [0.0; 4];
        let f = profile_fit(&d, &m, &[0, 0, 1, 1], 2);
        assert_eq!(f.beta, vec![2.0, 3.25]);
        assert!((f.sigma2 - 0.125 / 4.0).abs() < 1e-15);
    }

    #[test]
    fn linspace_hits_ends() {
        assert_eq!(linspace(0.0, 110.0, 23)[22], 110.0);
        assert_eq!(linspace(0.0, 110.0, 23)[10], 50.0);
    }
}
