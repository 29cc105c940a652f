use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::Real;
use crate::sensing::BackgroundModel;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Gaussian on the log of a positive parameter.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogNormalPrior {
    pub log_mean: f64,
    pub log_sd: f64,
}

impl LogNormalPrior {
    pub const STANDARD: LogNormalPrior = LogNormalPrior {
        log_mean: 0.0,
        log_sd: 1.0,
    };

    /// Log density in the sampler's coordinate `u = ln v`: the log-normal
    /// density of `v` plus the change-of-variables term `ln |dv/du| = u`.
    pub fn log_density_log_coord<R: Real>(&self, u: R) -> R {
        let z = (u - self.log_mean) / self.log_sd;
        let log_density_v = -u - z.sqr() * 0.5 - self.log_sd.ln() - LN_SQRT_2PI;
        let log_jacobian = u;
        log_density_v + log_jacobian
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvGammaPrior {
    pub shape: f64,
    pub scale: f64,
}

impl InvGammaPrior {
    /// Unnormalised log density.
    pub fn log_density(&self, sigma2: f64) -> f64 {
        -(self.shape + 1.0) * sigma2.ln() - self.scale / sigma2
    }
}

/// Box-truncated prior on the horizontal source position. Uniform over the
/// box when no Gaussian centre is given.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocationPrior {
    pub x_range: [f64; 2],
    pub y_range: [f64; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gaussian: Option<LocationGaussian>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocationGaussian {
    pub mean: [f64; 2],
    pub sd: [f64; 2],
}

impl LocationPrior {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x_range[0] && x <= self.x_range[1] && y >= self.y_range[0] && y <= self.y_range[1]
    }

    /// Unnormalised log density; `None` outside the box.
    pub fn log_density<R: Real>(&self, x: R, y: R) -> Option<R> {
        if !self.contains(x.value(), y.value()) {
            return None;
        }
        Some(match self.gaussian {
            None => R::cst(0.0),
            Some(g) => {
                let zx = (x - g.mean[0]) / g.sd[0];
                let zy = (y - g.mean[1]) / g.sd[1];
                (zx.sqr() + zy.sqr()) * -0.5
            }
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BackgroundPrior {
    pub mean: f64,
    pub var: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DispersionPriors {
    pub a_h: LogNormalPrior,
    pub b_h: LogNormalPrior,
    pub a_v: LogNormalPrior,
    pub b_v: LogNormalPrior,
}

impl Default for DispersionPriors {
    fn default() -> Self {
        Self {
            a_h: LogNormalPrior::STANDARD,
            b_h: LogNormalPrior::STANDARD,
            a_v: LogNormalPrior::STANDARD,
            b_v: LogNormalPrior::STANDARD,
        }
    }
}

/// All prior settings. The defaults are generic weakly-informative choices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Priors {
    pub noise: InvGammaPrior,
    pub background: BackgroundPrior,
    pub rate: LogNormalPrior,
    pub location: LocationPrior,
    #[serde(default)]
    pub dispersion: DispersionPriors,
}

impl Default for Priors {
    fn default() -> Self {
        Self {
            noise: InvGammaPrior {
                shape: 2.0,
                scale: 1e-8,
            },
            background: BackgroundPrior {
                mean: 1.93,
                var: 1e-2,
            },
            rate: LogNormalPrior {
                log_mean: 1e-3f64.ln(),
                log_sd: 2.0,
            },
            location: LocationPrior {
                x_range: [0.0, 110.0],
                y_range: [0.0, 110.0],
                gaussian: None,
            },
            dispersion: DispersionPriors::default(),
        }
    }
}

impl Priors {
    pub fn validate(&self) -> Result<()> {
        let pos = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::Config(format!("prior {name} = {v} must be positive")))
            }
        };
        pos("noise.shape", self.noise.shape)?;
        pos("noise.scale", self.noise.scale)?;
        if !(self.background.var.is_finite() && self.background.var >= 0.0) {
            return Err(Error::Config("prior background.var must be >= 0".into()));
        }
        pos("rate.log_sd", self.rate.log_sd)?;
        for (n, p) in [
            ("a_h", self.dispersion.a_h),
            ("b_h", self.dispersion.b_h),
            ("a_v", self.dispersion.a_v),
            ("b_v", self.dispersion.b_v),
        ] {
            pos(&format!("dispersion.{n}.log_sd"), p.log_sd)?;
        }
        let l = &self.location;
        if !(l.x_range[0] < l.x_range[1] && l.y_range[0] < l.y_range[1]) {
            return Err(Error::Config("location box is degenerate".into()));
        }
        if let Some(g) = l.gaussian {
            pos("location.gaussian.sd[0]", g.sd[0])?;
            pos("location.gaussian.sd[1]", g.sd[1])?;
        }
        Ok(())
    }

    pub fn background_model(&self, n_sensors: usize) -> BackgroundModel {
        BackgroundModel::uniform(n_sensors, self.background.mean, self.background.var)
    }
}
