//! Estimator configuration and its TOML file format.
//!
//! Every field has a default, so a config file only needs the entries it
//! overrides. Process-noise entries are densities (unit per √s) and are
//! scaled by `√dt` at each step; measurement-noise entries are standard
//! deviations of a single sample.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{lit, Real};
use crate::srukf::UtParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProcessNoise {
    pub position: f64,
    pub velocity: f64,
    pub orientation: f64,
    pub angular_velocity: f64,
    pub gyro_bias: f64,
    pub accel_bias: f64,
    pub foot: f64,
    pub contact: f64,
}

impl Default for ProcessNoise {
    fn default() -> Self {
        Self {
            position: 0.01,
            velocity: 0.5,
            orientation: 0.01,
            angular_velocity: 2.0,
            gyro_bias: 1e-4,
            accel_bias: 1e-3,
            foot: 0.02,
            contact: 5.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeasurementNoise {
    pub gravity: f64,
    pub velocity: f64,
    pub angular_velocity: f64,
    pub kinematics: f64,
    pub contact: f64,
}

impl Default for MeasurementNoise {
    fn default() -> Self {
        Self {
            gravity: 1.0,
            velocity: 0.02,
            angular_velocity: 0.05,
            kinematics: 0.005,
            contact: 0.1,
        }
    }
}

/// Standard deviations of the initial belief.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialStd {
    pub position: f64,
    pub velocity: f64,
    pub orientation: f64,
    pub angular_velocity: f64,
    pub gyro_bias: f64,
    pub accel_bias: f64,
    pub foot: f64,
    pub contact: f64,
}

impl Default for InitialStd {
    fn default() -> Self {
        Self {
            position: 1e-3,
            velocity: 0.05,
            orientation: 0.01,
            angular_velocity: 0.05,
            gyro_bias: 1e-3,
            accel_bias: 0.05,
            foot: 0.005,
            contact: 0.2,
        }
    }
}

/// Where the stance/swing noise scale is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleSpace {
    /// Scale multiplies the square-root factor's diagonal.
    Factor,
    /// Scale multiplies the covariance, i.e. its square root hits the factor.
    Covariance,
}

/// Mapping from foot-force magnitude to contact probability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContactModel {
    /// `‖F‖ / (f_max − f_min)`, clamped to `[0, 1]`.
    Literal,
    /// `(‖F‖ − f_min) / (f_max − f_min)`, clamped to `[0, 1]`.
    Affine,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UtConfig {
    pub alpha: f64,
    pub beta: f64,
    pub kappa: f64,
}

impl Default for UtConfig {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            beta: 2.0,
            kappa: 0.0,
        }
    }
}

impl UtConfig {
    pub fn params<T: Real>(&self) -> UtParams<T> {
        UtParams {
            alpha: lit(self.alpha),
            beta: lit(self.beta),
            kappa: lit(self.kappa),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    pub process_noise: ProcessNoise,
    pub measurement_noise: MeasurementNoise,
    pub initial_std: InitialStd,
    /// Feet whose contact probability is below this are integrated as swinging.
    pub swing_threshold: f64,
    /// Contact probability at which a foot counts as confidently loaded.
    pub all_contact_threshold: f64,
    pub stance_q_scale: f64,
    pub swing_q_scale: f64,
    pub q_scale_space: ScaleSpace,
    /// World-frame gravity, m/s².
    pub gravity: [f64; 3],
    pub ut: UtConfig,
    pub contact_model: ContactModel,
    /// Minimum stance legs before the least-squares twist is attempted.
    pub min_stance_legs: usize,
    /// Weight of the least-squares angular velocity in its average with the gyro.
    pub kinematic_omega_weight: f64,
    /// Forces every measurement gate closed (dead-reckoning diagnostics).
    pub gates_forced_off: bool,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            process_noise: ProcessNoise::default(),
            measurement_noise: MeasurementNoise::default(),
            initial_std: InitialStd::default(),
            swing_threshold: 0.3,
            all_contact_threshold: 0.8,
            stance_q_scale: 1e-2,
            swing_q_scale: 10.0,
            q_scale_space: ScaleSpace::Factor,
            gravity: [0.0, 0.0, -9.81],
            ut: UtConfig::default(),
            contact_model: ContactModel::Literal,
            min_stance_legs: 2,
            kinematic_omega_weight: 0.5,
            gates_forced_off: false,
        }
    }
}

impl FilterConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self =
            toml::from_str(text).map_err(|e| Error::Config(format!("filter config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.process_noise;
        let m = &self.measurement_noise;
        let i = &self.initial_std;
        let all = [
            p.position,
            p.velocity,
            p.orientation,
            p.angular_velocity,
            p.gyro_bias,
            p.accel_bias,
            p.foot,
            p.contact,
            m.gravity,
            m.velocity,
            m.angular_velocity,
            m.kinematics,
            m.contact,
            i.position,
            i.velocity,
            i.orientation,
            i.angular_velocity,
            i.gyro_bias,
            i.accel_bias,
            i.foot,
            i.contact,
            self.stance_q_scale,
            self.swing_q_scale,
        ];
        if all.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::Config(
                "noise entries and scales must be positive".into(),
            ));
        }
        for (name, t) in [
            ("swing_threshold", self.swing_threshold),
            ("all_contact_threshold", self.all_contact_threshold),
        ] {
            if !(t > 0.0 && t < 1.0) {
                return Err(Error::Config(format!("{name} must lie in (0, 1)")));
            }
        }
        if !(0.0..=1.0).contains(&self.kinematic_omega_weight) {
            return Err(Error::Config(
                "kinematic_omega_weight must lie in [0, 1]".into(),
            ));
        }
        if self.min_stance_legs < 2 {
            return Err(Error::Config("min_stance_legs must be at least 2".into()));
        }
        Ok(())
    }

    /// Multiplier applied to the foot-noise factor for a given scale.
    pub fn factor_scale(&self, scale: f64) -> f64 {
        match self.q_scale_space {
            ScaleSpace::Factor => scale,
            ScaleSpace::Covariance => scale.sqrt(),
        }
    }
}

/// Stance-force envelope of one leg, newtons.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactCalibration {
    pub f_max: f64,
    pub f_min: f64,
}

impl ContactCalibration {
    pub fn new(f_max: f64, f_min: f64) -> Result<Self> {
        let c = Self { f_max, f_min };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.f_min >= 0.0 && self.f_max > self.f_min) {
            return Err(Error::Config(format!(
                "contact calibration needs f_max > f_min >= 0 (got {} / {})",
                self.f_max, self.f_min
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CalibrationFile {
    leg: Vec<ContactCalibration>,
}

/// Writes per-leg calibrations as `[[leg]]` tables.
pub fn calibration_to_toml(calib: &[ContactCalibration]) -> String {
    toml::to_string_pretty(&CalibrationFile {
        leg: calib.to_vec(),
    })
    .expect("calibration serializes")
}

pub fn calibration_from_toml(text: &str) -> Result<Vec<ContactCalibration>> {
    let file: CalibrationFile =
        toml::from_str(text).map_err(|e| Error::Config(format!("contact calibration: {e}")))?;
    for c in &file.leg {
        c.validate()?;
    }
    Ok(file.leg)
}
