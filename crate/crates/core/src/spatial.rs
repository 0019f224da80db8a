//! Quaternion and rigid-body primitives.
//!
//! **Layout note.** [`Quaternion`] stores the vector part first and the scalar
//! part last: `(x, y, z, w)`. Most libraries (nalgebra included) expose
//! `(w, x, y, z)` constructors, so convert explicitly at boundaries. The
//! product is the Hamilton product and `rotate` maps CoM-frame vectors into
//! the world frame when the quaternion is `q_wc`.

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

use crate::scalar::{lit, Real};

/// Three-vector (meters, m/s, rad/s or newtons depending on use).
pub type Vec3<T> = Vector3<T>;

/// 3x3 rotation matrix.
pub type RotMat<T> = Matrix3<T>;

/// Tolerance on `|q| - 1` accepted by [`Quaternion::rotate`].
pub const UNIT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpatialError {
    #[error("quaternion is not unit norm (|q| = {norm})")]
    NotUnit { norm: f64 },
}

/// Quaternion with vector part first: `x, y, z` then scalar `w`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quaternion<T> {
    pub x: T,
    pub y: T,
    pub z: T,
    pub w: T,
}

impl<T: Real> Default for Quaternion<T> {
    fn default() -> Self {
        Self::identity()
    }
}

impl<T: Real> Quaternion<T> {
    pub fn new(x: T, y: T, z: T, w: T) -> Self {
        Self { x, y, z, w }
    }

    pub fn identity() -> Self {
        Self::new(T::zero(), T::zero(), T::zero(), T::one())
    }

    /// Builds `[v; s]`.
    pub fn from_parts(v: Vec3<T>, s: T) -> Self {
        Self::new(v.x, v.y, v.z, s)
    }

    /// Rotation of `angle` radians about `axis` (normalized internally).
    pub fn from_axis_angle(axis: &Vec3<T>, angle: T) -> Self {
        let n = axis.norm();
        if n == T::zero() {
            return Self::identity();
        }
        let half = angle * lit(0.5);
        let s = half.sin() / n;
        Self::new(axis.x * s, axis.y * s, axis.z * s, half.cos())
    }

    /// Exponential map of a rotation vector.
    pub fn from_rotation_vector(rv: &Vec3<T>) -> Self {
        let angle = rv.norm();
        if angle == T::zero() {
            return Self::identity();
        }
        Self::from_axis_angle(rv, angle)
    }

    /// Converts a proper rotation matrix (Shepperd's method).
    pub fn from_rotmat(m: &RotMat<T>) -> Self {
        let one = T::one();
        let quarter = lit::<T>(0.25);
        let trace = m[(0, 0)] + m[(1, 1)] + m[(2, 2)];
        let q = if trace > T::zero() {
            let s = (trace + one).sqrt() * lit(2.0);
            Self::new(
                (m[(2, 1)] - m[(1, 2)]) / s,
                (m[(0, 2)] - m[(2, 0)]) / s,
                (m[(1, 0)] - m[(0, 1)]) / s,
                quarter * s,
            )
        } else if m[(0, 0)] > m[(1, 1)] && m[(0, 0)] > m[(2, 2)] {
            let s = (one + m[(0, 0)] - m[(1, 1)] - m[(2, 2)]).sqrt() * lit(2.0);
            Self::new(
                quarter * s,
                (m[(0, 1)] + m[(1, 0)]) / s,
                (m[(0, 2)] + m[(2, 0)]) / s,
                (m[(2, 1)] - m[(1, 2)]) / s,
            )
        } else if m[(1, 1)] > m[(2, 2)] {
            let s = (one + m[(1, 1)] - m[(0, 0)] - m[(2, 2)]).sqrt() * lit(2.0);
            Self::new(
                (m[(0, 1)] + m[(1, 0)]) / s,
                quarter * s,
                (m[(1, 2)] + m[(2, 1)]) / s,
                (m[(0, 2)] - m[(2, 0)]) / s,
            )
        } else {
            let s = (one + m[(2, 2)] - m[(0, 0)] - m[(1, 1)]).sqrt() * lit(2.0);
            Self::new(
                (m[(0, 2)] + m[(2, 0)]) / s,
                (m[(1, 2)] + m[(2, 1)]) / s,
                quarter * s,
                (m[(1, 0)] - m[(0, 1)]) / s,
            )
        };
        q.normalize()
    }

    pub fn vector(&self) -> Vec3<T> {
        Vec3::new(self.x, self.y, self.z)
    }

    pub fn to_array(&self) -> [T; 4] {
        [self.x, self.y, self.z, self.w]
    }

    pub fn from_slice(s: &[T]) -> Self {
        Self::new(s[0], s[1], s[2], s[3])
    }

    pub fn norm(&self) -> T {
        self.dot(self).sqrt()
    }

    pub fn dot(&self, o: &Self) -> T {
        self.x * o.x + self.y * o.y + self.z * o.z + self.w * o.w
    }

    pub fn scale(&self, s: T) -> Self {
        Self::new(self.x * s, self.y * s, self.z * s, self.w * s)
    }

    pub fn add(&self, o: &Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y, self.z + o.z, self.w + o.w)
    }

    /// Unit quaternion in the same direction. The zero quaternion maps to identity.
    pub fn normalize(&self) -> Self {
        let n = self.norm();
        if n == T::zero() {
            return Self::identity();
        }
        self.scale(T::one() / n)
    }

    pub fn conjugate(&self) -> Self {
        Self::new(-self.x, -self.y, -self.z, self.w)
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|c| c.is_finite())
    }

    /// Rotation matrix of a unit quaternion.
    pub fn to_rotmat(&self) -> RotMat<T> {
        let (x, y, z, w) = (self.x, self.y, self.z, self.w);
        let one = T::one();
        let two: T = lit(2.0);
        RotMat::new(
            one - two * (y * y + z * z),
            two * (x * y - z * w),
            two * (x * z + y * w),
            two * (x * y + z * w),
            one - two * (x * x + z * z),
            two * (y * z - x * w),
            two * (x * z - y * w),
            two * (y * z + x * w),
            one - two * (x * x + y * y),
        )
    }

    /// `rot(q) · v`, rejecting quaternions further than [`UNIT_TOLERANCE`]
    /// from unit norm.
    pub fn rotate(&self, v: &Vec3<T>) -> Result<Vec3<T>, SpatialError> {
        let n = self.norm();
        if (n - T::one()).abs() > lit(UNIT_TOLERANCE) || !n.is_finite() {
            return Err(SpatialError::NotUnit {
                norm: crate::scalar::to_f64(n),
            });
        }
        Ok(self.rotate_unchecked(v))
    }

    /// `rot(q) · v` without the unit-norm check.
    pub fn rotate_unchecked(&self, v: &Vec3<T>) -> Vec3<T> {
        // v + 2 u x (u x v + w v)
        let u = self.vector();
        let t = u.cross(v) * lit::<T>(2.0);
        v + t * self.w + u.cross(&t)
    }

    /// Rotation vector (axis times angle in `[0, pi]`).
    pub fn to_rotation_vector(&self) -> Vec3<T> {
        let q = if self.w < T::zero() {
            self.scale(-T::one())
        } else {
            *self
        };
        let v = q.vector();
        let s = v.norm();
        if s == T::zero() {
            return Vec3::zeros();
        }
        let angle = lit::<T>(2.0) * s.atan2(q.w);
        v * (angle / s)
    }

    /// Angle of the relative rotation between two unit quaternions.
    pub fn angle_to(&self, other: &Self) -> T {
        let d = self.dot(other).abs().min(T::one());
        lit::<T>(2.0) * d.acos()
    }

    /// Spherical linear interpolation along the shorter arc.
    pub fn slerp(&self, other: &Self, t: T) -> Self {
        let mut b = *other;
        let mut d = self.dot(other);
        if d < T::zero() {
            b = b.scale(-T::one());
            d = -d;
        }
        if d > lit(0.9995) {
            return self.scale(T::one() - t).add(&b.scale(t)).normalize();
        }
        let theta = d.acos();
        let s = theta.sin();
        let wa = ((T::one() - t) * theta).sin() / s;
        let wb = (t * theta).sin() / s;
        self.scale(wa).add(&b.scale(wb)).normalize()
    }
}

/// `q ⊗ p` (Hamilton product, vector-first layout).
///
/// Evaluated as the 4x4 matrix built from `p` acting on the column `q`.
pub fn quat_product<T: Real>(q: &Quaternion<T>, p: &Quaternion<T>) -> Quaternion<T> {
    Quaternion::new(
        p.w * q.x + p.z * q.y - p.y * q.z + p.x * q.w,
        -p.z * q.x + p.w * q.y + p.x * q.z + p.y * q.w,
        p.y * q.x - p.x * q.y + p.w * q.z + p.z * q.w,
        -p.x * q.x - p.y * q.y - p.z * q.z + p.w * q.w,
    )
}

impl<T: Real> std::ops::Mul for Quaternion<T> {
    type Output = Quaternion<T>;
    fn mul(self, rhs: Self) -> Self {
        quat_product(&self, &rhs)
    }
}

/// One explicit integration step `q + ½ q ⊗ [ω dt; 0]` with body-frame `ω`,
/// followed by renormalization.
pub fn quat_integrate<T: Real>(q: &Quaternion<T>, omega_body: &Vec3<T>, dt: T) -> Quaternion<T> {
    let delta = Quaternion::from_parts(omega_body * dt, T::zero());
    q.add(&quat_product(q, &delta).scale(lit(0.5))).normalize()
}

/// Cross-product matrix: `skew(r) · v == r × v`.
pub fn skew<T: Real>(r: &Vec3<T>) -> Matrix3<T> {
    let z = T::zero();
    Matrix3::new(z, -r.z, r.y, r.z, z, -r.x, -r.y, r.x, z)
}

/// Elementary rotation about a unit `axis` by `angle` (Rodrigues).
pub fn axis_angle_rotmat<T: Real>(axis: &Vec3<T>, angle: T) -> RotMat<T> {
    let k = skew(axis);
    RotMat::identity() + k * angle.sin() + k * k * (T::one() - angle.cos())
}

/// Rigid transform `x ↦ R x + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose<T: Real> {
    pub rotation: RotMat<T>,
    pub translation: Vec3<T>,
}

impl<T: Real> Pose<T> {
    pub fn identity() -> Self {
        Self {
            rotation: RotMat::identity(),
            translation: Vec3::zeros(),
        }
    }

    pub fn compose(&self, other: &Self) -> Self {
        Self {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn transform_point(&self, p: &Vec3<T>) -> Vec3<T> {
        self.rotation * p + self.translation
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }
}
