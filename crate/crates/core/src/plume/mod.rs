//! Reflected Gaussian plume forward model.
//!
//! Coordinates are metres in a fixed site frame. Wind direction is given in
//! degrees counterclockwise from east (+x) and names the bearing the wind
//! blows *toward*: a 0° wind carries gas in the +x direction, a 90° wind in
//! the +y direction.

pub mod asc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::Real;

pub use asc::{AscTables, ClassCoefficients, Scheme, SigmaLaw, StabilityClass};

pub type Vec3 = [f64; 3];

/// Smallest wind sigma used anywhere in the model, in metres.
pub const SIGMA_FLOOR: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SourceGeometry {
    pub location: Vec3,
    /// Release height used in the reflection terms.
    pub height: f64,
    pub half_width: f64,
    pub half_height: f64,
}

impl SourceGeometry {
    pub fn validate(&self) -> Result<()> {
        if !self.location.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidInput("source location must be finite".into()));
        }
        for (name, v) in [
            ("height", self.height),
            ("half_width", self.half_width),
            ("half_height", self.half_height),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidInput(format!(
                    "source {name} = {v} must be finite and non-negative"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtmosphereSpec {
    /// Height of the atmospheric boundary layer lid.
    pub abl_height: f64,
    /// Number of image-source reflection pairs.
    pub n_refl: u32,
    /// Density of the emitted gas in kg/m³ (methane by default).
    pub gas_density: f64,
}

impl Default for AtmosphereSpec {
    fn default() -> Self {
        Self {
            abl_height: 1000.0,
            n_refl: 3,
            gas_density: 0.656,
        }
    }
}

impl AtmosphereSpec {
    pub fn validate(&self, source: &SourceGeometry) -> Result<()> {
        if !(self.gas_density.is_finite() && self.gas_density > 0.0) {
            return Err(Error::InvalidInput("gas_density must be positive".into()));
        }
        if !(self.abl_height.is_finite() && self.abl_height > source.height) {
            return Err(Error::InvalidInput(format!(
                "ABL height {} must exceed the release height {}",
                self.abl_height, source.height
            )));
        }
        Ok(())
    }
}

/// Power-law dispersion parameters of the generalised Draxler form.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DraxlerParams {
    pub a_h: f64,
    pub b_h: f64,
    pub a_v: f64,
    pub b_v: f64,
}

impl DraxlerParams {
    pub const UNIT: DraxlerParams = DraxlerParams {
        a_h: 1.0,
        b_h: 1.0,
        a_v: 1.0,
        b_v: 1.0,
    };

    /// Exponents above one are allowed but indicate a misspecified model.
    pub fn misspecification_warning(&self) -> bool {
        self.b_h > 1.0 || self.b_v > 1.0
    }
}

/// Which wind-sigma parameterisation is active.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "lowercase")]
pub enum DispersionSpec {
    Draxler(DraxlerParams),
    Briggs {
        class: StabilityClass,
    },
    Smith {
        class: StabilityClass,
        /// Multipliers `(a_H, a_V)` applied to the class sigmas.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        scale: Option<[f64; 2]>,
    },
}

impl DispersionSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            DispersionSpec::Draxler(p) => {
                for (name, v) in [("a_h", p.a_h), ("b_h", p.b_h), ("a_v", p.a_v), ("b_v", p.b_v)] {
                    if !(v.is_finite() && v > 0.0) {
                        return Err(Error::Config(format!("dispersion {name} = {v} must be positive")));
                    }
                }
            }
            DispersionSpec::Smith {
                scale: Some([h, v]), ..
            } => {
                if !(h.is_finite() && *h > 0.0 && v.is_finite() && *v > 0.0) {
                    return Err(Error::Config("Smith scale factors must be positive".into()));
                }
            }
            _ => {}
        }
        Ok(())
    }
}

/// Receptor coordinates in the wind-aligned frame of one source.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReceptorFrame {
    pub downwind: f64,
    pub crosswind: f64,
    pub vertical: f64,
    pub upwind: bool,
}

impl ReceptorFrame {
    /// Whether the receptor can receive any gas. Receptors exactly
    /// crosswind of the source (zero downwind distance) receive none.
    pub fn receives(&self) -> bool {
        !self.upwind && self.downwind > 0.0
    }
}

#[inline]
pub(crate) fn wind_unit(direction_deg: f64) -> (f64, f64) {
    let r = direction_deg.to_radians();
    (r.cos(), r.sin())
}

/// Downwind and crosswind offsets with a possibly varying source position.
#[inline]
pub(crate) fn horizontal_offsets<R: Real>(
    receptor: &Vec3,
    source_x: R,
    source_y: R,
    wind: (f64, f64),
) -> (R, R) {
    let dx = -source_x + receptor[0];
    let dy = -source_y + receptor[1];
    let (c, s) = wind;
    (dx * c + dy * s, dy * c - dx * s)
}

pub fn receptor_frame(
    receptor: Vec3,
    source: &SourceGeometry,
    wind_direction_deg: f64,
) -> Result<ReceptorFrame> {
    if !receptor.iter().all(|v| v.is_finite()) || !wind_direction_deg.is_finite() {
        return Err(Error::InvalidInput(
            "receptor and wind direction must be finite".into(),
        ));
    }
    source.validate()?;
    if receptor == source.location {
        return Err(Error::InvalidInput(
            "receptor coincides with the source".into(),
        ));
    }
    let (downwind, crosswind) = horizontal_offsets(
        &receptor,
        source.location[0],
        source.location[1],
        wind_unit(wind_direction_deg),
    );
    Ok(ReceptorFrame {
        downwind,
        crosswind,
        vertical: receptor[2] - source.location[2],
        upwind: downwind < 0.0,
    })
}

/// A dispersion spec with any table lookups already resolved and with
/// parameters in the scalar type of the evaluation.
#[derive(Clone, Copy, Debug)]
pub(crate) enum SigmaForm<R> {
    Draxler { a_h: R, b_h: R, a_v: R, b_v: R },
    Table {
        coeffs: ClassCoefficients,
        scale_h: R,
        scale_v: R,
    },
}

impl SigmaForm<f64> {
    pub(crate) fn resolve(spec: &DispersionSpec, tables: &AscTables) -> Self {
        match *spec {
            DispersionSpec::Draxler(p) => SigmaForm::Draxler {
                a_h: p.a_h,
                b_h: p.b_h,
                a_v: p.a_v,
                b_v: p.b_v,
            },
            DispersionSpec::Briggs { class } => SigmaForm::Table {
                coeffs: tables.get(Scheme::Briggs, class),
                scale_h: 1.0,
                scale_v: 1.0,
            },
            DispersionSpec::Smith { class, scale } => {
                let [h, v] = scale.unwrap_or([1.0, 1.0]);
                SigmaForm::Table {
                    coeffs: tables.get(Scheme::Smith, class),
                    scale_h: h,
                    scale_v: v,
                }
            }
        }
    }
}

impl<R: Real> SigmaForm<R> {
    /// Wind sigmas at positive downwind distance `downwind`.
    #[inline]
    pub(crate) fn sigmas(
        &self,
        downwind: R,
        tan_gamma_h: f64,
        tan_gamma_v: f64,
        half_width: f64,
        half_height: f64,
    ) -> (R, R) {
        let (sh, sv) = match *self {
            SigmaForm::Draxler { a_h, b_h, a_v, b_v } => (
                a_h * (downwind * tan_gamma_h).pow(b_h) + half_width,
                a_v * (downwind * tan_gamma_v).pow(b_v) + half_height,
            ),
            SigmaForm::Table {
                coeffs,
                scale_h,
                scale_v,
            } => (
                scale_h * coeffs.horizontal.eval(downwind),
                scale_v * coeffs.vertical.eval(downwind),
            ),
        };
        (sh.floor_at(SIGMA_FLOOR), sv.floor_at(SIGMA_FLOOR))
    }
}

fn check_gamma(name: &str, g: f64) -> Result<()> {
    if !(g.is_finite() && g > 0.0 && g < std::f64::consts::FRAC_PI_2) {
        return Err(Error::Domain(format!("{name} = {g} rad must lie in (0, π/2)")));
    }
    Ok(())
}

/// Horizontal and vertical wind sigmas in metres for one receptor.
pub fn wind_sigmas(
    spec: &DispersionSpec,
    tables: &AscTables,
    frame: &ReceptorFrame,
    gamma_h: f64,
    gamma_v: f64,
    source: &SourceGeometry,
) -> Result<(f64, f64)> {
    if !(frame.downwind > 0.0) {
        return Err(Error::Domain(format!(
            "downwind distance {} must be positive; upwind receptors contribute nothing",
            frame.downwind
        )));
    }
    if matches!(spec, DispersionSpec::Draxler(_)) {
        check_gamma("gamma_h", gamma_h)?;
        check_gamma("gamma_v", gamma_v)?;
    }
    spec.validate()?;
    Ok(SigmaForm::resolve(spec, tables).sigmas(
        frame.downwind,
        gamma_h.tan(),
        gamma_v.tan(),
        source.half_width,
        source.half_height,
    ))
}

/// Image-source vertical offsets for reflection `j` (1-based) against the
/// ground and the boundary-layer lid.
#[inline]
pub(crate) fn reflection_offsets(j: u32, vertical: f64, release_height: f64, abl: f64) -> (f64, f64) {
    let j = j as i64;
    let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
    let zr = vertical + release_height;
    let first = 2.0 * ((j + 1) / 2) as f64 * abl + sign * zr - release_height;
    let second = 2.0 * (j / 2) as f64 * abl - sign * zr + release_height;
    (first, second)
}

/// Concentration in PPM for a receptor known to be downwind. Generic so the
/// sampler can carry derivatives through it.
#[inline]
#[allow(clippy::too_many_arguments)]
pub(crate) fn plume_kernel<R: Real>(
    rate: R,
    crosswind: R,
    vertical: f64,
    release_height: f64,
    sigma_h: R,
    sigma_v: R,
    wind_speed: f64,
    atmos: &AtmosphereSpec,
) -> R {
    let to_ppm = 1e6 / atmos.gas_density;
    let inv_var_h = sigma_h.sqr().recip();
    let inv_var_v = sigma_v.sqr().recip();
    let mut vsum = (inv_var_v * (-0.5 * vertical * vertical)).exp();
    for j in 1..=atmos.n_refl {
        let (a, b) = reflection_offsets(j, vertical, release_height, atmos.abl_height);
        vsum += (inv_var_v * (-0.5 * a * a)).exp();
        vsum += (inv_var_v * (-0.5 * b * b)).exp();
    }
    let lateral = (crosswind.sqr() * inv_var_h * -0.5).exp();
    rate * to_ppm / (2.0 * std::f64::consts::PI * wind_speed) / (sigma_h * sigma_v) * lateral * vsum
}

/// Reflected Gaussian plume concentration in PPM.
pub fn plume_concentration(
    source: &SourceGeometry,
    rate: f64,
    frame: &ReceptorFrame,
    sigma_h: f64,
    sigma_v: f64,
    wind_speed: f64,
    atmos: &AtmosphereSpec,
) -> Result<f64> {
    if !(wind_speed.is_finite() && wind_speed > 0.0) {
        return Err(Error::Domain(format!("wind speed {wind_speed} must be positive")));
    }
    if !(sigma_h.is_finite() && sigma_h > 0.0 && sigma_v.is_finite() && sigma_v > 0.0) {
        return Err(Error::Domain(format!(
            "wind sigmas ({sigma_h}, {sigma_v}) must be positive"
        )));
    }
    if !(rate.is_finite() && rate >= 0.0) {
        return Err(Error::InvalidInput(format!("emission rate {rate} must be non-negative")));
    }
    if !frame.receives() || rate == 0.0 {
        return Ok(0.0);
    }
    Ok(plume_kernel(
        rate,
        frame.crosswind,
        frame.vertical,
        source.height,
        sigma_h,
        sigma_v,
        wind_speed,
        atmos,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ground_source() -> SourceGeometry {
        SourceGeometry {
            location: [0.0, 0.0, 0.0],
            height: 0.0,
            half_width: 1.0,
            half_height: 1.0,
        }
    }

    #[test]
    fn axis_aligned_frame() {
        let f = receptor_frame([100.0, 0.0, 0.0], &ground_source(), 0.0).unwrap();
        assert!((f.downwind - 100.0).abs() < 1e-12);
        assert!(f.crosswind.abs() < 1e-12);
        assert!(!f.upwind);

        let f = receptor_frame([100.0, 0.0, 0.0], &ground_source(), 180.0).unwrap();
        assert!((f.downwind + 100.0).abs() < 1e-12);
        assert!(f.upwind);
    }

    #[test]
    fn rotated_frame_matches_rotation_matrix() {
        // Receptor at 45° from the x-axis, range 100, wind toward +x.
        let r = 100.0 / 2f64.sqrt();
        let f = receptor_frame([r, r, 2.0], &ground_source(), 0.0).unwrap();
        assert!((f.downwind - r).abs() < 1e-12);
        assert!((f.crosswind - r).abs() < 1e-12);
        assert_eq!(f.vertical, 2.0);

        // Wind toward 90° (north): the same receptor is now to the right.
        let f = receptor_frame([r, r, 0.0], &ground_source(), 90.0).unwrap();
        assert!((f.downwind - r).abs() < 1e-12);
        assert!((f.crosswind + r).abs() < 1e-12);
    }

    #[test]
    fn frame_rejects_bad_input() {
        assert!(receptor_frame([f64::NAN, 0.0, 0.0], &ground_source(), 0.0).is_err());
        assert!(receptor_frame([1.0, 0.0, 0.0], &ground_source(), f64::INFINITY).is_err());
        assert!(receptor_frame([0.0, 0.0, 0.0], &ground_source(), 0.0).is_err());
    }

    #[test]
    fn draxler_identity_exponents() {
        let tables = AscTables::shipped();
        let frame = ReceptorFrame {
            downwind: 100.0,
            crosswind: 0.0,
            vertical: 0.0,
            upwind: false,
        };
        let g = 0.1f64.atan();
        let (h, v) = wind_sigmas(
            &DispersionSpec::Draxler(DraxlerParams::UNIT),
            &tables,
            &frame,
            g,
            g,
            &ground_source(),
        )
        .unwrap();
        assert!((h - 11.0).abs() < 1e-12);
        assert!((v - 11.0).abs() < 1e-12);
    }

    #[test]
    fn draxler_case_three() {
        let tables = AscTables::shipped();
        let frame = ReceptorFrame {
            downwind: 100.0,
            crosswind: 0.0,
            vertical: 0.0,
            upwind: false,
        };
        let g = 0.1f64.atan();
        let spec = DispersionSpec::Draxler(DraxlerParams {
            a_h: 0.9,
            b_h: 0.8,
            a_v: 0.7,
            b_v: 0.85,
        });
        let src = SourceGeometry {
            half_width: 0.5,
            half_height: 0.25,
            ..ground_source()
        };
        let (h, v) = wind_sigmas(&spec, &tables, &frame, g, g, &src).unwrap();
        assert!((h - (0.9 * 10f64.powf(0.8) + 0.5)).abs() < 1e-12);
        assert!((v - (0.7 * 10f64.powf(0.85) + 0.25)).abs() < 1e-12);
    }

    #[test]
    fn draxler_reduces_to_geometric_spread() {
        let tables = AscTables::shipped();
        let src = SourceGeometry {
            half_width: 0.0,
            half_height: 0.0,
            ..ground_source()
        };
        let frame = ReceptorFrame {
            downwind: 37.0,
            crosswind: 0.0,
            vertical: 0.0,
            upwind: false,
        };
        let (h, v) = wind_sigmas(
            &DispersionSpec::Draxler(DraxlerParams::UNIT),
            &tables,
            &frame,
            0.3,
            0.2,
            &src,
        )
        .unwrap();
        assert_eq!(h, 37.0 * 0.3f64.tan());
        assert_eq!(v, 37.0 * 0.2f64.tan());
    }

    #[test]
    fn sigma_errors() {
        let tables = AscTables::shipped();
        let spec = DispersionSpec::Draxler(DraxlerParams::UNIT);
        let mut frame = ReceptorFrame {
            downwind: 0.0,
            crosswind: 0.0,
            vertical: 0.0,
            upwind: false,
        };
        assert!(matches!(
            wind_sigmas(&spec, &tables, &frame, 0.1, 0.1, &ground_source()),
            Err(Error::Domain(_))
        ));
        frame.downwind = 10.0;
        assert!(wind_sigmas(&spec, &tables, &frame, 0.0, 0.1, &ground_source()).is_err());
    }

    #[test]
    fn briggs_class_a_matches_formula() {
        let tables = AscTables::shipped();
        let frame = ReceptorFrame {
            downwind: 100.0,
            crosswind: 0.0,
            vertical: 0.0,
            upwind: false,
        };
        let spec = DispersionSpec::Briggs {
            class: StabilityClass::A,
        };
        let (h, v) = wind_sigmas(&spec, &tables, &frame, 0.1, 0.1, &ground_source()).unwrap();
        // open-country Briggs A: 0.22 x (1 + 1e-4 x)^-1/2 and 0.20 x
        assert!((h - 21.890_818_184_619_76).abs() < 1e-10);
        assert!((v - 20.0).abs() < 1e-12);
    }

    #[test]
    fn reflection_offsets_are_image_sources() {
        // With vertical + H = z the receptor height.
        let (z, h, p) = (3.0, 5.0, 100.0);
        let v = z - h;
        assert_eq!(reflection_offsets(1, v, h, p), (2.0 * p - z - h, z + h));
        assert_eq!(reflection_offsets(2, v, h, p), (2.0 * p + z - h, 2.0 * p - z + h));
        assert_eq!(reflection_offsets(3, v, h, p), (4.0 * p - z - h, 2.0 * p + z + h));
    }

    #[test]
    fn zero_rate_and_upwind_give_zero() {
        let atmos = AtmosphereSpec::default();
        let src = ground_source();
        let mut frame = ReceptorFrame {
            downwind: 50.0,
            crosswind: 3.0,
            vertical: 1.0,
            upwind: false,
        };
        assert_eq!(plume_concentration(&src, 0.0, &frame, 5.0, 5.0, 6.0, &atmos).unwrap(), 0.0);
        frame.upwind = true;
        frame.downwind = -50.0;
        assert_eq!(plume_concentration(&src, 1.0, &frame, 5.0, 5.0, 6.0, &atmos).unwrap(), 0.0);
    }

    #[test]
    fn concentration_domain_errors() {
        let atmos = AtmosphereSpec::default();
        let frame = ReceptorFrame {
            downwind: 50.0,
            crosswind: 0.0,
            vertical: 0.0,
            upwind: false,
        };
        let src = ground_source();
        assert!(plume_concentration(&src, 1.0, &frame, 5.0, 5.0, 0.0, &atmos).is_err());
        assert!(plume_concentration(&src, 1.0, &frame, 0.0, 5.0, 6.0, &atmos).is_err());
        assert!(plume_concentration(&src, -1.0, &frame, 5.0, 5.0, 6.0, &atmos).is_err());
    }
}
