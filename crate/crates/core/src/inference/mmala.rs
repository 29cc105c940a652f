//! Manifold MALA with a position-dependent metric taken from the negative
//! Hessian of the target.
//!
//! The metric's eigenvalues are replaced by `max(|λ|, EIGEN_FLOOR)`, which
//! keeps it positive definite where the target is not log-concave. The
//! drift omits the metric-derivative terms; the Metropolis-Hastings
//! correction uses the exact asymmetric proposal densities, so the chain
//! still targets the right distribution.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

pub const EIGEN_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct Evaluation<A> {
    pub log_density: f64,
    pub gradient: DVector<f64>,
    pub hessian: DMatrix<f64>,
    pub aux: A,
}

pub trait Target {
    type Aux: Clone;
    fn dim(&self) -> usize;
    /// Log density with exact derivatives; `None` outside the support or
    /// where the model is not finite.
    fn evaluate(&self, theta: &DVector<f64>) -> Option<Evaluation<Self::Aux>>;
}

/// Symmetric positive-definite metric in eigen form `G = V Λ Vᵀ`.
#[derive(Clone, Debug, PartialEq)]
pub struct Metric {
    vectors: DMatrix<f64>,
    values: DVector<f64>,
    fallback: bool,
}

impl Metric {
    /// Regularised `−H`. Falls back to the identity if `H` is not finite.
    pub fn from_hessian(hessian: &DMatrix<f64>) -> Self {
        let n = hessian.nrows();
        if hessian.iter().any(|v| !v.is_finite()) {
            return Self::identity(n, true);
        }
        let g = -(hessian + hessian.transpose()) * 0.5;
        let eig = SymmetricEigen::new(g);
        if eig.eigenvalues.iter().any(|v| !v.is_finite()) {
            return Self::identity(n, true);
        }
        Self {
            values: eig.eigenvalues.map(|l| l.abs().max(EIGEN_FLOOR)),
            vectors: eig.eigenvectors,
            fallback: false,
        }
    }

    pub fn identity(n: usize, fallback: bool) -> Self {
        Self {
            vectors: DMatrix::identity(n, n),
            values: DVector::from_element(n, 1.0),
            fallback,
        }
    }

    /// True when the Hessian was unusable and the identity was substituted.
    pub fn is_fallback(&self) -> bool {
        self.fallback
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        &self.vectors * DMatrix::from_diagonal(&self.values) * self.vectors.transpose()
    }

    /// `G⁻¹ v`.
    pub fn solve(&self, v: &DVector<f64>) -> DVector<f64> {
        let w = self.vectors.transpose() * v;
        &self.vectors * w.component_div(&self.values)
    }

    /// `xᵀ G x`.
    pub fn quadratic(&self, x: &DVector<f64>) -> f64 {
        let w = self.vectors.transpose() * x;
        w.iter().zip(self.values.iter()).map(|(a, l)| l * a * a).sum()
    }

    pub fn log_det(&self) -> f64 {
        self.values.iter().map(|l| l.ln()).sum()
    }

    /// Maps a standard normal vector to a draw from `N(0, G⁻¹)`.
    pub fn scale_noise(&self, z: &DVector<f64>) -> DVector<f64> {
        &self.vectors * z.component_div(&self.values.map(f64::sqrt))
    }
}

#[derive(Clone, Debug)]
pub struct MalaPoint<A> {
    pub theta: DVector<f64>,
    pub log_density: f64,
    pub gradient: DVector<f64>,
    pub metric: Metric,
    pub aux: A,
}

impl<A> MalaPoint<A> {
    pub fn new(theta: DVector<f64>, eval: Evaluation<A>) -> Self {
        Self {
            metric: Metric::from_hessian(&eval.hessian),
            theta,
            log_density: eval.log_density,
            gradient: eval.gradient,
            aux: eval.aux,
        }
    }

    /// Proposal mean `θ + ½ ζ G⁻¹ ∇`.
    pub fn proposal_mean(&self, step: f64) -> DVector<f64> {
        &self.theta + self.metric.solve(&self.gradient) * (0.5 * step)
    }

    /// `log q(to | self)` up to the constant `−(n/2) ln 2π`.
    pub fn log_proposal(&self, to: &DVector<f64>, step: f64) -> f64 {
        let n = self.theta.len() as f64;
        let r = to - self.proposal_mean(step);
        -0.5 * self.metric.quadratic(&r) / step + 0.5 * self.metric.log_det() - 0.5 * n * step.ln()
    }
}

#[derive(Clone, Debug)]
pub struct StepOutcome<A> {
    pub point: MalaPoint<A>,
    pub accepted: bool,
    /// `min(1, α)`, zero for a proposal outside the support.
    pub accept_prob: f64,
}

/// Log Metropolis-Hastings ratio for moving from `from` to `to`.
pub fn log_acceptance_ratio<A>(from: &MalaPoint<A>, to: &MalaPoint<A>, step: f64) -> f64 {
    to.log_density - from.log_density + to.log_proposal(&from.theta, step)
        - from.log_proposal(&to.theta, step)
}

/// One M-MALA transition. Always consumes `dim + 1` variates from `rng`.
pub fn mmala_step<T: Target, R: Rng + ?Sized>(
    target: &T,
    current: MalaPoint<T::Aux>,
    step: f64,
    rng: &mut R,
) -> StepOutcome<T::Aux> {
    let n = current.theta.len();
    let z = DVector::from_iterator(n, (0..n).map(|_| StandardNormal.sample(rng)));
    let u: f64 = rng.random();
    let proposal = current.proposal_mean(step) + current.metric.scale_noise(&z) * step.sqrt();

    let Some(eval) = target.evaluate(&proposal) else {
        return StepOutcome {
            point: current,
            accepted: false,
            accept_prob: 0.0,
        };
    };
    let candidate = MalaPoint::new(proposal, eval);
    let log_alpha = log_acceptance_ratio(&current, &candidate, step);
    let accept_prob = if log_alpha.is_nan() {
        0.0
    } else {
        log_alpha.min(0.0).exp()
    };
    if u.ln() < log_alpha {
        StepOutcome {
            point: candidate,
            accepted: true,
            accept_prob,
        }
    } else {
        StepOutcome {
            point: current,
            accepted: false,
            accept_prob,
        }
    }
}

/// Robbins-Monro update of the step size on the log scale, with gain
/// `(iteration + 1)^-0.6`.
pub fn adapt_step_size(step: f64, accept_prob: f64, target: f64, iteration: usize) -> f64 {
    let gain = (iteration as f64 + 1.0).powf(-0.6);
    (step.ln() + gain * (accept_prob - target)).exp().clamp(1e-10, 1e4)
}
