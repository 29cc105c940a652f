use std::fmt;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::mmala::{Evaluation, Target};
use super::priors::Priors;
use crate::error::{Error, Result};
use crate::plume::{
    AscTables, AtmosphereSpec, ClassCoefficients, DispersionSpec, Scheme, SigmaForm,
    SourceGeometry, StabilityClass,
};
use crate::real::{Jet, Real};
use crate::sensing::{BackgroundModel, Observations, PlumeOperator, SensorArray};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Which dispersion parameters the sampler estimates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum DispersionMode {
    /// Dispersion held at a known specification.
    Fixed { spec: DispersionSpec },
    /// `a_H, b_H, a_V, b_V` estimated.
    EstimateDraxler,
    /// Multiplicative scales on a Smith class estimated.
    EstimateSmith { class: StabilityClass },
}

impl DispersionMode {
    pub fn dim(&self) -> usize {
        match self {
            DispersionMode::Fixed { .. } => 3,
            DispersionMode::EstimateSmith { .. } => 5,
            DispersionMode::EstimateDraxler => 7,
        }
    }

    /// Names of the constrained parameters, in θ order.
    pub fn names(&self) -> Vec<&'static str> {
        let mut n = vec!["rate", "x", "y"];
        match self {
            DispersionMode::Fixed { .. } => {}
            DispersionMode::EstimateSmith { .. } => n.extend(["a_h", "a_v"]),
            DispersionMode::EstimateDraxler => n.extend(["a_h", "b_h", "a_v", "b_v"]),
        }
        n
    }
}

impl fmt::Display for DispersionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DispersionMode::Fixed {
                spec: DispersionSpec::Briggs { class },
            } => write!(f, "Briggs-{class}"),
            DispersionMode::Fixed {
                spec: DispersionSpec::Smith { class, .. },
            } => write!(f, "Smith-{class}"),
            DispersionMode::Fixed {
                spec: DispersionSpec::Draxler(_),
            } => f.write_str("Draxler-fixed"),
            DispersionMode::EstimateDraxler => f.write_str("est-draxler"),
            DispersionMode::EstimateSmith { class } => write!(f, "est-smith-{class}"),
        }
    }
}

/// Per-sensor sufficient statistics of the plume predictions `m_k` and
/// their first and second derivatives at one θ.
///
/// With `c` the sensor mean of `d_k − m_k` and `u_k = d_k − m_k − c`
/// (so `Σ u_k = 0`), the Gaussian log-likelihood and its derivatives for
/// any background β and noise variance σ² follow without revisiting the
/// observations.
#[derive(Clone, Debug, PartialEq)]
pub struct SensorStats {
    pub n: usize,
    pub c: f64,
    pub u2: f64,
    gu: Vec<f64>,
    g1: Vec<f64>,
    hu: Vec<f64>,
    h1: Vec<f64>,
    outer: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sufficient {
    dim: usize,
    pub sensors: Vec<SensorStats>,
}

impl Sufficient {
    pub fn n_obs(&self) -> usize {
        self.sensors.iter().map(|s| s.n).sum()
    }

    /// `Σ_k (d_k − β_j − m_k)²`.
    pub fn sum_sq_residuals(&self, beta: &[f64]) -> f64 {
        self.sensors
            .iter()
            .zip(beta)
            .map(|(s, b)| s.u2 + s.n as f64 * (s.c - b).powi(2))
            .sum()
    }

    /// `Σ_{k ∈ j} (d_k − m_k)` for each sensor.
    pub fn residual_sums(&self) -> Vec<f64> {
        self.sensors.iter().map(|s| s.n as f64 * s.c).collect()
    }

    pub fn counts(&self) -> Vec<usize> {
        self.sensors.iter().map(|s| s.n).collect()
    }

    pub fn log_likelihood(&self, beta: &[f64], sigma2: f64) -> f64 {
        let n = self.n_obs() as f64;
        -0.5 * self.sum_sq_residuals(beta) / sigma2 - 0.5 * n * (LN_2PI + sigma2.ln())
    }

    /// Log-likelihood gradient and Hessian in θ.
    pub fn likelihood_derivatives(&self, beta: &[f64], sigma2: f64) -> (DVector<f64>, DMatrix<f64>) {
        let p = self.dim;
        let mut g = DVector::zeros(p);
        let mut h = DMatrix::zeros(p, p);
        for (s, b) in self.sensors.iter().zip(beta) {
            let off = s.c - b;
            for i in 0..p {
                g[i] += s.gu[i] + off * s.g1[i];
                for k in 0..p {
                    let ik = i * p + k;
                    h[(i, k)] += s.hu[ik] + off * s.h1[ik] - s.outer[ik];
                }
            }
        }
        (g / sigma2, h / sigma2)
    }
}

/// Single-source inversion problem: data, forward operator and priors.
#[derive(Clone, Debug)]
pub struct Problem {
    op: PlumeOperator,
    mode: DispersionMode,
    fixed_form: Option<SigmaForm<f64>>,
    smith: Option<ClassCoefficients>,
    d: Vec<f64>,
    obs_by_sensor: Vec<Vec<usize>>,
    sensor_ids: Vec<String>,
    priors: Priors,
    background: BackgroundModel,
}

impl Problem {
    /// `source` supplies the release height and extent; its horizontal
    /// position is what the sampler infers.
    pub fn new(
        obs: &Observations,
        array: &SensorArray,
        source: SourceGeometry,
        atmos: AtmosphereSpec,
        mode: DispersionMode,
        priors: Priors,
        tables: &AscTables,
    ) -> Result<Self> {
        obs.validate()?;
        priors.validate()?;
        let op = PlumeOperator::new(array, &obs.wind, &obs.layout, source, atmos)?;
        let fixed_form = match &mode {
            DispersionMode::Fixed { spec } => {
                spec.validate()?;
                Some(SigmaForm::resolve(spec, tables))
            }
            _ => None,
        };
        let smith = match mode {
            DispersionMode::EstimateSmith { class } => Some(tables.get(Scheme::Smith, class)),
            _ => None,
        };
        let mut obs_by_sensor = vec![vec![]; obs.n_sensors()];
        for (k, &j) in obs.layout.sensor_index.iter().enumerate() {
            obs_by_sensor[j].push(k);
        }
        let background = priors.background_model(obs.n_sensors());
        Ok(Self {
            op,
            mode,
            fixed_form,
            smith,
            d: obs.d.clone(),
            obs_by_sensor,
            sensor_ids: obs.layout.sensor_ids.clone(),
            priors,
            background,
        })
    }

    /// Replaces the background prior, one mean and variance per sensor.
    pub fn with_background(mut self, background: BackgroundModel) -> Result<Self> {
        background.validate(self.n_sensors())?;
        self.background = background;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.mode.dim()
    }

    pub fn mode(&self) -> &DispersionMode {
        &self.mode
    }

    pub fn priors(&self) -> &Priors {
        &self.priors
    }

    pub fn background(&self) -> &BackgroundModel {
        &self.background
    }

    pub fn n_obs(&self) -> usize {
        self.d.len()
    }

    pub fn n_sensors(&self) -> usize {
        self.obs_by_sensor.len()
    }

    pub fn sensor_ids(&self) -> &[String] {
        &self.sensor_ids
    }

    pub fn data(&self) -> &[f64] {
        &self.d
    }

    pub fn counts(&self) -> Vec<usize> {
        self.obs_by_sensor.iter().map(Vec::len).collect()
    }

    pub fn sensor_of(&self) -> Vec<usize> {
        let mut s = vec![0; self.n_obs()];
        for (j, ks) in self.obs_by_sensor.iter().enumerate() {
            for &k in ks {
                s[k] = j;
            }
        }
        s
    }

    /// θ (log rate, position, log dispersion) to constrained values.
    pub fn to_constrained(&self, theta: &[f64]) -> Vec<f64> {
        theta
            .iter()
            .enumerate()
            .map(|(i, &v)| if i == 1 || i == 2 { v } else { v.exp() })
            .collect()
    }

    pub fn to_unconstrained(&self, values: &[f64]) -> Vec<f64> {
        values
            .iter()
            .enumerate()
            .map(|(i, &v)| if i == 1 || i == 2 { v } else { v.ln() })
            .collect()
    }

    fn form<R: Real>(&self, theta: &[R]) -> SigmaForm<R> {
        match self.mode {
            DispersionMode::Fixed { .. } => match self.fixed_form.expect("fixed form resolved") {
                SigmaForm::Draxler { a_h, b_h, a_v, b_v } => SigmaForm::Draxler {
                    a_h: R::cst(a_h),
                    b_h: R::cst(b_h),
                    a_v: R::cst(a_v),
                    b_v: R::cst(b_v),
                },
                SigmaForm::Table {
                    coeffs,
                    scale_h,
                    scale_v,
                } => SigmaForm::Table {
                    coeffs,
                    scale_h: R::cst(scale_h),
                    scale_v: R::cst(scale_v),
                },
            },
            DispersionMode::EstimateDraxler => SigmaForm::Draxler {
                a_h: theta[3].exp(),
                b_h: theta[4].exp(),
                a_v: theta[5].exp(),
                b_v: theta[6].exp(),
            },
            DispersionMode::EstimateSmith { .. } => SigmaForm::Table {
                coeffs: self.smith.expect("smith coefficients resolved"),
                scale_h: theta[3].exp(),
                scale_v: theta[4].exp(),
            },
        }
    }

    fn check_dim(&self, theta: &[f64]) {
        assert_eq!(theta.len(), self.dim(), "θ has the wrong length");
    }

    /// Unit-rate responses at θ's position and dispersion.
    pub fn unit_responses(&self, theta: &[f64]) -> Vec<f64> {
        self.check_dim(theta);
        self.op
            .unit_responses_f64(theta[1], theta[2], &self.form(theta))
    }

    /// Modelled plume enhancement `m_k(θ)`, PPM.
    pub fn predictions(&self, theta: &[f64]) -> Vec<f64> {
        let s = theta[0].exp();
        self.unit_responses(theta).into_iter().map(|a| s * a).collect()
    }

    /// Log prior of θ in sampler coordinates, Jacobians included;
    /// `None` outside the support.
    fn log_prior_generic<R: Real>(&self, theta: &[R]) -> Option<R> {
        let p = &self.priors;
        let mut lp = p.location.log_density(theta[1], theta[2])?;
        lp += p.rate.log_density_log_coord(theta[0]);
        match self.mode {
            DispersionMode::Fixed { .. } => {}
            DispersionMode::EstimateDraxler => {
                let d = &p.dispersion;
                lp += d.a_h.log_density_log_coord(theta[3]);
                lp += d.b_h.log_density_log_coord(theta[4]);
                lp += d.a_v.log_density_log_coord(theta[5]);
                lp += d.b_v.log_density_log_coord(theta[6]);
            }
            DispersionMode::EstimateSmith { .. } => {
                let d = &p.dispersion;
                lp += d.a_h.log_density_log_coord(theta[3]);
                lp += d.a_v.log_density_log_coord(theta[4]);
            }
        }
        Some(lp)
    }

    pub fn log_prior_theta(&self, theta: &[f64]) -> f64 {
        self.check_dim(theta);
        self.log_prior_generic(theta).unwrap_or(f64::NEG_INFINITY)
    }

    /// Gaussian log-likelihood computed directly from the residuals.
    pub fn log_likelihood(&self, theta: &[f64], beta: &[f64], sigma2: f64) -> f64 {
        let m = self.predictions(theta);
        let ssr: f64 = self
            .obs_by_sensor
            .iter()
            .zip(beta)
            .map(|(ks, b)| ks.iter().map(|&k| (self.d[k] - b - m[k]).powi(2)).sum::<f64>())
            .sum();
        let n = self.n_obs() as f64;
        -0.5 * ssr / sigma2 - 0.5 * n * (LN_2PI + sigma2.ln())
    }

    /// Log prior density of the background and noise variance, up to
    /// constants.
    pub fn log_prior_nuisance(&self, beta: &[f64], sigma2: f64) -> f64 {
        let mut lp = self.priors.noise.log_density(sigma2);
        for ((b, m), v) in beta.iter().zip(&self.background.mean).zip(&self.background.var) {
            if *v > 0.0 {
                lp -= 0.5 * (b - m).powi(2) / v;
            }
        }
        lp
    }

    /// Joint log posterior up to an additive constant.
    pub fn log_posterior(&self, theta: &[f64], beta: &[f64], sigma2: f64) -> f64 {
        let lp = self.log_prior_theta(theta);
        if !lp.is_finite() {
            return f64::NEG_INFINITY;
        }
        lp + self.log_likelihood(theta, beta, sigma2) + self.log_prior_nuisance(beta, sigma2)
    }

    /// Log density of the θ full conditional, up to a constant.
    pub fn log_theta_conditional(&self, theta: &[f64], beta: &[f64], sigma2: f64) -> f64 {
        let lp = self.log_prior_theta(theta);
        if !lp.is_finite() {
            return f64::NEG_INFINITY;
        }
        lp + self.log_likelihood(theta, beta, sigma2)
    }

    fn sufficient_n<const N: usize>(&self, theta: &[f64]) -> Option<Sufficient> {
        let vars: Vec<Jet<N>> = (0..N).map(|i| Jet::variable(theta[i], i)).collect();
        let form = self.form(&vars);
        let rate = vars[0].exp();
        let sensors: Vec<Option<SensorStats>> = self
            .obs_by_sensor
            .par_iter()
            .map(|ks| {
                let m: Vec<Jet<N>> = ks
                    .iter()
                    .map(|&k| rate * self.op.unit_response(k, vars[1], vars[2], &form))
                    .collect();
                if m.iter().any(|j| !j.v.is_finite()) {
                    return None;
                }
                let n = ks.len();
                let c = if n == 0 {
                    0.0
                } else {
                    ks.iter().zip(&m).map(|(&k, mk)| self.d[k] - mk.v).sum::<f64>() / n as f64
                };
                let mut st = SensorStats {
                    n,
                    c,
                    u2: 0.0,
                    gu: vec![0.0; N],
                    g1: vec![0.0; N],
                    hu: vec![0.0; N * N],
                    h1: vec![0.0; N * N],
                    outer: vec![0.0; N * N],
                };
                for (&k, mk) in ks.iter().zip(&m) {
                    let u = self.d[k] - mk.v - c;
                    st.u2 += u * u;
                    for i in 0..N {
                        st.gu[i] += u * mk.g[i];
                        st.g1[i] += mk.g[i];
                        for l in 0..N {
                            st.hu[i * N + l] += u * mk.h[i][l];
                            st.h1[i * N + l] += mk.h[i][l];
                            st.outer[i * N + l] += mk.g[i] * mk.g[l];
                        }
                    }
                }
                let finite = st.gu.iter().chain(&st.hu).chain(&st.outer).all(|v| v.is_finite());
                finite.then_some(st)
            })
            .collect();
        Some(Sufficient {
            dim: N,
            sensors: sensors.into_iter().collect::<Option<Vec<_>>>()?,
        })
    }

    /// Sufficient statistics with exact derivatives at θ; `None` when the
    /// forward model is not finite there.
    pub fn sufficient(&self, theta: &[f64]) -> Option<Sufficient> {
        self.check_dim(theta);
        match self.dim() {
            3 => self.sufficient_n::<3>(theta),
            5 => self.sufficient_n::<5>(theta),
            7 => self.sufficient_n::<7>(theta),
            n => unreachable!("no θ layout of length {n}"),
        }
    }

    fn prior_jet_n<const N: usize>(&self, theta: &[f64]) -> Option<(f64, DVector<f64>, DMatrix<f64>)> {
        let vars: Vec<Jet<N>> = (0..N).map(|i| Jet::variable(theta[i], i)).collect();
        let j = self.log_prior_generic(&vars)?;
        Some((
            j.v,
            DVector::from_column_slice(&j.g),
            DMatrix::from_fn(N, N, |r, c| j.h[r][c]),
        ))
    }

    fn prior_derivatives(&self, theta: &[f64]) -> Option<(f64, DVector<f64>, DMatrix<f64>)> {
        match self.dim() {
            3 => self.prior_jet_n::<3>(theta),
            5 => self.prior_jet_n::<5>(theta),
            7 => self.prior_jet_n::<7>(theta),
            n => unreachable!("no θ layout of length {n}"),
        }
    }

    /// θ-conditional log density with derivatives, from cached statistics.
    pub fn evaluate_with(
        &self,
        theta: &[f64],
        suff: Sufficient,
        beta: &[f64],
        sigma2: f64,
    ) -> Option<Evaluation<Sufficient>> {
        let (lp, gp, hp) = self.prior_derivatives(theta)?;
        let ll = suff.log_likelihood(beta, sigma2);
        let (gl, hl) = suff.likelihood_derivatives(beta, sigma2);
        let log_density = lp + ll;
        if !log_density.is_finite() {
            return None;
        }
        Some(Evaluation {
            log_density,
            gradient: gp + gl,
            hessian: hp + hl,
            aux: suff,
        })
    }

    /// θ-conditional target for fixed background and noise variance.
    pub fn conditional<'a>(&'a self, beta: &'a [f64], sigma2: f64) -> ThetaConditional<'a> {
        ThetaConditional {
            problem: self,
            beta,
            sigma2,
        }
    }

    /// Residual checks used by the CLI before sampling.
    pub fn check_support(&self, theta: &[f64]) -> Result<()> {
        if !self.log_prior_theta(theta).is_finite() {
            return Err(Error::Inference(format!(
                "initial θ {theta:?} lies outside the prior support"
            )));
        }
        Ok(())
    }
}

pub struct ThetaConditional<'a> {
    problem: &'a Problem,
    beta: &'a [f64],
    sigma2: f64,
}

impl Target for ThetaConditional<'_> {
    type Aux = Sufficient;

    fn dim(&self) -> usize {
        self.problem.dim()
    }

    fn evaluate(&self, theta: &DVector<f64>) -> Option<Evaluation<Sufficient>> {
        let th = theta.as_slice();
        if !self.problem.log_prior_theta(th).is_finite() {
            return None;
        }
        let suff = self.problem.sufficient(th)?;
        self.problem.evaluate_with(th, suff, self.beta, self.sigma2)
    }
}
