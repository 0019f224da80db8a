//! Per-leg forward kinematics, body Jacobians, foot velocity and foot force.
//!
//! Each leg is a fixed-base serial chain of revolute joints hanging off a
//! mount pose in the CoM frame. Joint `k` rotates by `angle[k]` about its
//! local `axis` and then translates by its `link` offset to the next joint
//! origin; `foot_offset` finally reaches the foot center.

use nalgebra::{DMatrix, Dyn, Matrix3, OMatrix, U3};
use thiserror::Error;

use crate::scalar::{lit, to_f64, Real};
use crate::spatial::{axis_angle_rotmat, Pose, RotMat, Vec3};

/// Condition number above which `J⁻ᵀ τ` is treated as undefined.
pub const SINGULARITY_CONDITION: f64 = 1e8;

/// Positional Jacobian, 3 x DoF.
pub type Jacobian<T> = OMatrix<T, U3, Dyn>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KinematicsError {
    #[error("expected {expected} joint values, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("leg Jacobian is singular (condition number {condition:e})")]
    Singular { condition: f64 },
    #[error("foot force needs a square Jacobian; leg has {dof} joints")]
    NotSquare { dof: usize },
    #[error("invalid leg chain: {0}")]
    InvalidChain(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Joint<T: Real> {
    /// Unit rotation axis in the joint's local frame.
    pub axis: Vec3<T>,
    /// Offset from this joint's origin to the next one, in the rotated local frame.
    pub link: Vec3<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LegChain<T: Real> {
    pub mount: Pose<T>,
    joints: Vec<Joint<T>>,
    pub foot_offset: Vec3<T>,
}

/// Encoder, velocity and torque sample of one joint.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct JointReading<T> {
    pub angle: T,
    pub velocity: T,
    pub torque: T,
}

/// Foot pose in the CoM frame: `(R_cf, t_cf)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FootFrame<T: Real> {
    pub rotation: RotMat<T>,
    pub translation: Vec3<T>,
}

impl<T: Real> LegChain<T> {
    pub fn new(
        mount: Pose<T>,
        joints: Vec<Joint<T>>,
        foot_offset: Vec3<T>,
    ) -> Result<Self, KinematicsError> {
        if joints.is_empty() {
            return Err(KinematicsError::InvalidChain(
                "a leg needs at least one joint".into(),
            ));
        }
        for (i, j) in joints.iter().enumerate() {
            if (to_f64(j.axis.norm()) - 1.0).abs() > 1e-9 {
                return Err(KinematicsError::InvalidChain(format!(
                    "joint {i} axis is not unit norm"
                )));
            }
        }
        let r = mount.rotation;
        let ortho = (r.transpose() * r - Matrix3::identity()).amax();
        if to_f64(ortho) > 1e-9 || to_f64(r.determinant()) < 0.0 {
            return Err(KinematicsError::InvalidChain(
                "mount rotation is not proper".into(),
            ));
        }
        Ok(Self {
            mount,
            joints,
            foot_offset,
        })
    }

    pub fn dof(&self) -> usize {
        self.joints.len()
    }

    pub fn joints(&self) -> &[Joint<T>] {
        &self.joints
    }

    fn check(&self, n: usize) -> Result<(), KinematicsError> {
        if n != self.dof() {
            return Err(KinematicsError::DimensionMismatch {
                expected: self.dof(),
                got: n,
            });
        }
        Ok(())
    }

    /// Walks the chain, returning the foot frame and, per joint, the
    /// CoM-frame origin and rotation axis.
    fn walk(&self, angles: &[T]) -> (FootFrame<T>, Vec<(Vec3<T>, Vec3<T>)>) {
        let mut rot = self.mount.rotation;
        let mut pos = self.mount.translation;
        let mut joints = Vec::with_capacity(self.dof());
        for (joint, &angle) in self.joints.iter().zip(angles) {
            joints.push((pos, rot * joint.axis));
            rot *= axis_angle_rotmat(&joint.axis, angle);
            pos += rot * joint.link;
        }
        let foot = FootFrame {
            rotation: rot,
            translation: pos + rot * self.foot_offset,
        };
        (foot, joints)
    }

    /// `(R_cf, t_cf) = FK(α)`.
    pub fn forward_kinematics(&self, angles: &[T]) -> Result<FootFrame<T>, KinematicsError> {
        self.check(angles.len())?;
        Ok(self.walk(angles).0)
    }

    /// Positional Jacobian expressed in the CoM frame (`R_cf · J_b`).
    pub fn spatial_jacobian(&self, angles: &[T]) -> Result<Jacobian<T>, KinematicsError> {
        self.check(angles.len())?;
        let (foot, joints) = self.walk(angles);
        let cols: Vec<Vec3<T>> = joints
            .iter()
            .map(|(origin, axis)| axis.cross(&(foot.translation - origin)))
            .collect();
        Ok(Jacobian::from_columns(&cols))
    }

    /// Body Jacobian `J_b(α)`: joint rates to foot-center linear velocity,
    /// expressed in the foot frame.
    pub fn body_jacobian(&self, angles: &[T]) -> Result<Jacobian<T>, KinematicsError> {
        let fk = self.forward_kinematics(angles)?;
        Ok(fk.rotation.transpose() * self.spatial_jacobian(angles)?)
    }

    /// Foot velocity relative to the CoM, in the CoM frame: `R_cf J_b(α) α̇`.
    pub fn foot_velocity(
        &self,
        angles: &[T],
        velocities: &[T],
    ) -> Result<Vec3<T>, KinematicsError> {
        self.check(velocities.len())?;
        let fk = self.forward_kinematics(angles)?;
        let jb = self.body_jacobian(angles)?;
        let rates = nalgebra::DVector::from_column_slice(velocities);
        Ok(fk.rotation * (jb * rates))
    }

    /// Foot force in the CoM frame: `R_cf J_b(α)⁻ᵀ τ`.
    pub fn foot_force(&self, angles: &[T], torques: &[T]) -> Result<Vec3<T>, KinematicsError> {
        self.check(torques.len())?;
        if self.dof() != 3 {
            return Err(KinematicsError::NotSquare { dof: self.dof() });
        }
        let fk = self.forward_kinematics(angles)?;
        let jb = self.body_jacobian(angles)?;
        let jb: Matrix3<T> = jb.fixed_view::<3, 3>(0, 0).into_owned();
        let sv = jb.singular_values();
        let (smax, smin) = (sv.max(), sv.min());
        if smin == T::zero() || smax / smin > lit(SINGULARITY_CONDITION) {
            let condition = if smin == T::zero() {
                f64::INFINITY
            } else {
                to_f64(smax / smin)
            };
            return Err(KinematicsError::Singular { condition });
        }
        let tau = Vec3::new(torques[0], torques[1], torques[2]);
        let x = jb
            .transpose()
            .lu()
            .solve(&tau)
            .ok_or(KinematicsError::Singular {
                condition: f64::INFINITY,
            })?;
        Ok(fk.rotation * x)
    }

    /// Converts the chain to another scalar type.
    pub fn cast<U: Real>(&self) -> LegChain<U> {
        let c3 = |v: &Vec3<T>| Vec3::new(lit::<U>(to_f64(v.x)), lit(to_f64(v.y)), lit(to_f64(v.z)));
        LegChain {
            mount: Pose {
                rotation: RotMat::from_fn(|i, j| lit::<U>(to_f64(self.mount.rotation[(i, j)]))),
                translation: c3(&self.mount.translation),
            },
            joints: self
                .joints
                .iter()
                .map(|j| Joint {
                    axis: c3(&j.axis),
                    link: c3(&j.link),
                })
                .collect(),
            foot_offset: c3(&self.foot_offset),
        }
    }
}

/// Convenience: splits readings into angle, velocity and torque vectors.
pub fn split_readings<T: Real>(readings: &[JointReading<T>]) -> (Vec<T>, Vec<T>, Vec<T>) {
    let angles = readings.iter().map(|r| r.angle).collect();
    let vel = readings.iter().map(|r| r.velocity).collect();
    let tau = readings.iter().map(|r| r.torque).collect();
    (angles, vel, tau)
}

/// Dynamic-size copy of a Jacobian, handy for least-squares callers.
pub fn to_dmatrix<T: Real>(j: &Jacobian<T>) -> DMatrix<T> {
    DMatrix::from_fn(3, j.ncols(), |r, c| j[(r, c)])
}
