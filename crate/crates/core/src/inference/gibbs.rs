//! Conjugate full conditionals for the noise variance and the per-sensor
//! background.

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use super::priors::InvGammaPrior;
use crate::sensing::BackgroundModel;

/// Inverse-gamma with density ∝ `x^-(shape+1) exp(-rate / x)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InvGamma {
    pub shape: f64,
    pub rate: f64,
}

impl InvGamma {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let g: f64 = Gamma::new(self.shape, 1.0)
            .expect("positive shape")
            .sample(rng);
        self.rate / g
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormalDist {
    pub mean: f64,
    pub var: f64,
}

pub fn sigma2_conditional(n_obs: usize, sum_sq_residuals: f64, prior: &InvGammaPrior) -> InvGamma {
    InvGamma {
        shape: 0.5 * n_obs as f64 + prior.shape,
        rate: prior.scale + 0.5 * sum_sq_residuals,
    }
}

pub fn gibbs_sigma2<R: Rng + ?Sized>(
    n_obs: usize,
    sum_sq_residuals: f64,
    prior: &InvGammaPrior,
    rng: &mut R,
) -> f64 {
    sigma2_conditional(n_obs, sum_sq_residuals, prior).sample(rng)
}

/// Background conditionals given `Σ_{k∈j} (d_k − m_k)` and the count per
/// sensor. A zero prior variance pins the background to its prior mean.
pub fn beta_conditional(
    counts: &[usize],
    residual_sums: &[f64],
    sigma2: f64,
    prior: &BackgroundModel,
) -> Vec<NormalDist> {
    counts
        .iter()
        .zip(residual_sums)
        .zip(prior.mean.iter().zip(&prior.var))
        .map(|((&n, &r), (&mu, &v))| {
            if v == 0.0 {
                return NormalDist { mean: mu, var: 0.0 };
            }
            let precision = n as f64 / sigma2 + 1.0 / v;
            NormalDist {
                mean: (r / sigma2 + mu / v) / precision,
                var: 1.0 / precision,
            }
        })
        .collect()
}

/// One draw per sensor; always consumes one normal variate per sensor.
pub fn gibbs_beta<R: Rng + ?Sized>(
    counts: &[usize],
    residual_sums: &[f64],
    sigma2: f64,
    prior: &BackgroundModel,
    rng: &mut R,
) -> Vec<f64> {
    beta_conditional(counts, residual_sums, sigma2, prior)
        .into_iter()
        .map(|c| {
            let z: f64 = StandardNormal.sample(rng);
            if c.var == 0.0 {
                c.mean
            } else {
                c.mean + c.var.sqrt() * z
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wind::stream_rng;

    #[test]
    fn degenerate_background_returns_prior_mean() {
        let prior = BackgroundModel::uniform(2, 1.93, 0.0);
        let b = gibbs_beta(&[10, 0], &[20.0, 0.0], 1e-6, &prior, &mut stream_rng(1, 0));
        assert_eq!(b, vec![1.93, 1.93]);
    }

    #[test]
    fn inv_gamma_mean_matches() {
        let ig = InvGamma {
            shape: 50.0,
            rate: 49.0,
        };
        let mut rng = stream_rng(9, 0);
        let n = 20000;
        let m = (0..n).map(|_| ig.sample(&mut rng)).sum::<f64>() / n as f64;
        assert!((m - 1.0).abs() < 0.01, "{m}");
    }
}
