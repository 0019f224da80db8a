use nalgebra::DVector;

use crate::scalar::Real;
use crate::spatial::{Quaternion, Vec3};

/// Full estimator state for an `n`-legged robot.
///
/// Flattened order: position (3), velocity (3), orientation `q_wc` (4,
/// vector part first), body-frame angular velocity (3), gyro bias (3),
/// accelerometer bias (3), foot positions (3n), contact probabilities (n).
/// That is `19 + 4n` entries, 43 for a hexapod.
#[derive(Debug, Clone, PartialEq)]
pub struct RobotState<T: Real> {
    pub position: Vec3<T>,
    pub velocity: Vec3<T>,
    pub orientation: Quaternion<T>,
    pub angular_velocity: Vec3<T>,
    pub gyro_bias: Vec3<T>,
    pub accel_bias: Vec3<T>,
    pub feet: Vec<Vec3<T>>,
    pub contact: Vec<T>,
}

/// Index map of the flattened state vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StateLayout {
    pub legs: usize,
}

impl StateLayout {
    pub const POSITION: usize = 0;
    pub const VELOCITY: usize = 3;
    pub const ORIENTATION: usize = 6;
    pub const ANGULAR_VELOCITY: usize = 10;
    pub const GYRO_BIAS: usize = 13;
    pub const ACCEL_BIAS: usize = 16;
    const FEET: usize = 19;

    pub fn new(legs: usize) -> Self {
        Self { legs }
    }

    pub fn dim(&self) -> usize {
        Self::FEET + 4 * self.legs
    }

    pub fn foot(&self, leg: usize) -> usize {
        Self::FEET + 3 * leg
    }

    pub fn contact(&self, leg: usize) -> usize {
        Self::FEET + 3 * self.legs + leg
    }
}

/// Index map of the measurement vector: gravity (3), velocity (3), angular
/// velocity (3), per-leg kinematic offset (3n), contact (n).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MeasurementLayout {
    pub legs: usize,
}

impl MeasurementLayout {
    pub const GRAVITY: usize = 0;
    pub const VELOCITY: usize = 3;
    pub const ANGULAR_VELOCITY: usize = 6;
    const KINEMATICS: usize = 9;

    pub fn new(legs: usize) -> Self {
        Self { legs }
    }

    pub fn dim(&self) -> usize {
        Self::KINEMATICS + 4 * self.legs
    }

    pub fn kinematics(&self, leg: usize) -> usize {
        Self::KINEMATICS + 3 * leg
    }

    pub fn contact(&self, leg: usize) -> usize {
        Self::KINEMATICS + 3 * self.legs + leg
    }
}

fn v3<T: Real>(x: &DVector<T>, i: usize) -> Vec3<T> {
    Vec3::new(x[i], x[i + 1], x[i + 2])
}

impl<T: Real> RobotState<T> {
    /// Resting state: origin, identity attitude, zero rates and biases.
    pub fn at_rest(feet: Vec<Vec3<T>>, contact: Vec<T>) -> Self {
        Self {
            position: Vec3::zeros(),
            velocity: Vec3::zeros(),
            orientation: Quaternion::identity(),
            angular_velocity: Vec3::zeros(),
            gyro_bias: Vec3::zeros(),
            accel_bias: Vec3::zeros(),
            feet,
            contact,
        }
    }

    pub fn legs(&self) -> usize {
        self.feet.len()
    }

    pub fn layout(&self) -> StateLayout {
        StateLayout::new(self.legs())
    }

    pub fn to_vector(&self) -> DVector<T> {
        let layout = self.layout();
        let mut x = DVector::zeros(layout.dim());
        x.fixed_rows_mut::<3>(StateLayout::POSITION)
            .copy_from(&self.position);
        x.fixed_rows_mut::<3>(StateLayout::VELOCITY)
            .copy_from(&self.velocity);
        for (k, c) in self.orientation.to_array().into_iter().enumerate() {
            x[StateLayout::ORIENTATION + k] = c;
        }
        x.fixed_rows_mut::<3>(StateLayout::ANGULAR_VELOCITY)
            .copy_from(&self.angular_velocity);
        x.fixed_rows_mut::<3>(StateLayout::GYRO_BIAS)
            .copy_from(&self.gyro_bias);
        x.fixed_rows_mut::<3>(StateLayout::ACCEL_BIAS)
            .copy_from(&self.accel_bias);
        for (i, p) in self.feet.iter().enumerate() {
            x.fixed_rows_mut::<3>(layout.foot(i)).copy_from(p);
        }
        for (i, c) in self.contact.iter().enumerate() {
            x[layout.contact(i)] = *c;
        }
        x
    }

    /// Inverse of [`to_vector`](Self::to_vector). The quaternion is taken
    /// as stored; callers normalize where they need a rotation.
    pub fn from_vector(x: &DVector<T>, legs: usize) -> Self {
        let layout = StateLayout::new(legs);
        assert_eq!(x.len(), layout.dim(), "state vector length");
        Self {
            position: v3(x, StateLayout::POSITION),
            velocity: v3(x, StateLayout::VELOCITY),
            orientation: Quaternion::from_slice(
                &x.as_slice()[StateLayout::ORIENTATION..StateLayout::ORIENTATION + 4],
            ),
            angular_velocity: v3(x, StateLayout::ANGULAR_VELOCITY),
            gyro_bias: v3(x, StateLayout::GYRO_BIAS),
            accel_bias: v3(x, StateLayout::ACCEL_BIAS),
            feet: (0..legs).map(|i| v3(x, layout.foot(i))).collect(),
            contact: (0..legs).map(|i| x[layout.contact(i)]).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hexapod_dimensions() {
        assert_eq!(StateLayout::new(6).dim(), 43);
        assert_eq!(MeasurementLayout::new(6).dim(), 33);
        assert_eq!(StateLayout::new(4).dim(), 35);
    }

    #[test]
    fn vector_round_trip() {
        let s = RobotState {
            position: Vec3::new(1.0, 2.0, 3.0),
            velocity: Vec3::new(0.1, 0.2, 0.3),
            orientation: Quaternion::new(0.1, 0.2, 0.3, 0.9),
            angular_velocity: Vec3::new(-1.0, 0.0, 1.0),
            gyro_bias: Vec3::new(0.01, 0.02, 0.03),
            accel_bias: Vec3::new(-0.1, -0.2, -0.3),
            feet: (0..6).map(|i| Vec3::new(i as f64, 0.5, -0.1)).collect(),
            contact: vec![0.0, 0.2, 0.4, 0.6, 0.8, 1.0],
        };
        let x = s.to_vector();
        assert_eq!(x.len(), 43);
        assert_eq!(x[StateLayout::new(6).contact(5)], 1.0);
        assert_eq!(RobotState::from_vector(&x, 6), s);
    }
}
