//! Robot model: the set of leg chains plus body mass, and its TOML file format.
//!
//! ```toml
//! name = "reference-hexapod"
//! mass = 20.0
//!
//! [[leg]]
//! name = "front-left"
//! mount_translation = [0.25, 0.15, 0.0]
//! mount_yaw_deg = 45.0                      # or mount_quaternion = [x, y, z, w]
//! foot_offset = [0.0, 0.0, 0.0]
//! joints = [
//!   { axis = [0.0, 0.0, 1.0], link = [0.06, 0.0, 0.0] },
//!   { axis = [0.0, 1.0, 0.0], link = [0.2, 0.0, 0.0] },
//!   { axis = [0.0, 1.0, 0.0], link = [0.3, 0.0, 0.0] },
//! ]
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::{Joint, LegChain};
use crate::scalar::Real;
use crate::spatial::{Pose, Quaternion, Vec3};

/// Reference hexapod shipped with the crate (18 joints, 3 per leg).
pub const REFERENCE_HEXAPOD: &str = include_str!("../assets/hexapod.toml");

#[derive(Debug, Clone, PartialEq)]
pub struct RobotModel<T: Real> {
    pub name: String,
    /// Body mass in kg; only the simulator's load model uses it.
    pub mass: f64,
    pub legs: Vec<LegChain<T>>,
    pub leg_names: Vec<String>,
}

impl<T: Real> RobotModel<T> {
    pub fn leg_count(&self) -> usize {
        self.legs.len()
    }

    pub fn dofs(&self) -> Vec<usize> {
        self.legs.iter().map(|l| l.dof()).collect()
    }

    pub fn cast<U: Real>(&self) -> RobotModel<U> {
        RobotModel {
            name: self.name.clone(),
            mass: self.mass,
            legs: self.legs.iter().map(|l| l.cast()).collect(),
            leg_names: self.leg_names.clone(),
        }
    }
}

impl RobotModel<f64> {
    pub fn reference_hexapod() -> Self {
        ModelFile::from_toml(REFERENCE_HEXAPOD)
            .and_then(|f| f.build())
            .expect("bundled hexapod model is valid")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        ModelFile::from_toml(&text)?.build()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JointSpec {
    pub axis: [f64; 3],
    pub link: [f64; 3],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LegSpec {
    #[serde(default)]
    pub name: String,
    pub mount_translation: [f64; 3],
    #[serde(default)]
    pub mount_yaw_deg: Option<f64>,
    #[serde(default)]
    pub mount_quaternion: Option<[f64; 4]>,
    #[serde(default)]
    pub foot_offset: [f64; 3],
    pub joints: Vec<JointSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    #[serde(default)]
    pub name: String,
    #[serde(default = "default_mass")]
    pub mass: f64,
    #[serde(rename = "leg")]
    pub legs: Vec<LegSpec>,
}

fn default_mass() -> f64 {
    20.0
}

fn v3(a: [f64; 3]) -> Vec3<f64> {
    Vec3::new(a[0], a[1], a[2])
}

impl ModelFile {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("robot model: {e}")))
    }

    pub fn build(&self) -> Result<RobotModel<f64>> {
        if self.legs.is_empty() {
            return Err(Error::Config("robot model has no legs".into()));
        }
        if !(self.mass > 0.0) {
            return Err(Error::Config("robot mass must be positive".into()));
        }
        let mut legs = Vec::with_capacity(self.legs.len());
        for (i, leg) in self.legs.iter().enumerate() {
            let rotation = match (leg.mount_yaw_deg, leg.mount_quaternion) {
                (Some(_), Some(_)) => {
                    return Err(Error::Config(format!(
                        "leg {i}: give either mount_yaw_deg or mount_quaternion, not both"
                    )))
                }
                (Some(yaw), None) => {
                    Quaternion::from_axis_angle(&Vec3::z(), yaw.to_radians()).to_rotmat()
                }
                (None, Some(q)) => {
                    let q = Quaternion::new(q[0], q[1], q[2], q[3]);
                    if (q.norm() - 1.0).abs() > 1e-6 {
                        return Err(Error::Config(format!(
                            "leg {i}: mount quaternion is not unit"
                        )));
                    }
                    q.normalize().to_rotmat()
                }
                (None, None) => nalgebra::Matrix3::identity(),
            };
            let joints = leg
                .joints
                .iter()
                .map(|j| Joint {
                    axis: v3(j.axis),
                    link: v3(j.link),
                })
                .collect();
            let mount = Pose {
                rotation,
                translation: v3(leg.mount_translation),
            };
            let chain = LegChain::new(mount, joints, v3(leg.foot_offset))
                .map_err(|e| Error::Config(format!("leg {i}: {e}")))?;
            legs.push(chain);
        }
        Ok(RobotModel {
            name: self.name.clone(),
            mass: self.mass,
            legs,
            leg_names: self.legs.iter().map(|l| l.name.clone()).collect(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_model_has_eighteen_joints() {
        let m = RobotModel::reference_hexapod();
        assert_eq!(m.leg_count(), 6);
        assert_eq!(m.dofs().iter().sum::<usize>(), 18);
    }

    #[test]
    fn rejects_conflicting_mount_rotation() {
        let text = r#"
            [[leg]]
            mount_translation = [0.0, 0.0, 0.0]
            mount_yaw_deg = 10.0
            mount_quaternion = [0.0, 0.0, 0.0, 1.0]
            joints = [{ axis = [0.0, 0.0, 1.0], link = [0.1, 0.0, 0.0] }]
        "#;
        assert!(ModelFile::from_toml(text).unwrap().build().is_err());
    }

    #[test]
    fn rejects_non_unit_axis() {
        let text = r#"
            [[leg]]
            mount_translation = [0.0, 0.0, 0.0]
            joints = [{ axis = [0.0, 0.0, 2.0], link = [0.1, 0.0, 0.0] }]
        "#;
        assert!(ModelFile::from_toml(text).unwrap().build().is_err());
    }
}
