//! IMU-only dead reckoning: gyro-integrated attitude and double-integrated
//! specific force. No biases are estimated.

use crate::error::{Error, Result};
use crate::filter::SensorFrame;
use crate::scalar::{lit, Real};
use crate::spatial::{quat_integrate, Quaternion, Vec3};

#[derive(Debug, Clone)]
pub struct ImuDeadReckoning<T: Real> {
    pub position: Vec3<T>,
    pub velocity: Vec3<T>,
    pub orientation: Quaternion<T>,
    gravity: Vec3<T>,
    last: Option<f64>,
}

impl<T: Real> ImuDeadReckoning<T> {
    /// Starts at rest at the origin with identity attitude.
    pub fn new(gravity: Vec3<T>) -> Self {
        Self {
            position: Vec3::zeros(),
            velocity: Vec3::zeros(),
            orientation: Quaternion::identity(),
            gravity,
            last: None,
        }
    }

    pub fn process(&mut self, frame: &SensorFrame<T>) -> Result<()> {
        if let Some(prev) = self.last {
            if frame.timestamp < prev {
                return Err(Error::Ordering {
                    previous: prev,
                    current: frame.timestamp,
                });
            }
            let dt: T = lit(frame.timestamp - prev);
            let accel = self.orientation.rotate_unchecked(&frame.accel) + self.gravity;
            self.position += self.velocity * dt + accel * (dt * dt * lit(0.5));
            self.velocity += accel * dt;
            self.orientation = quat_integrate(&self.orientation, &frame.gyro, dt);
        }
        self.last = Some(frame.timestamp);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::JointReading;

    fn frame(t: f64, accel: Vec3<f64>) -> SensorFrame<f64> {
        SensorFrame {
            timestamp: t,
            legs: vec![vec![JointReading::default(); 3]; 6],
            gyro: Vec3::zeros(),
            accel,
        }
    }

    #[test]
    fn resting_imu_stays_put() {
        let mut dr = ImuDeadReckoning::new(Vec3::new(0.0, 0.0, -9.81));
        for k in 0..100 {
            dr.process(&frame(k as f64 * 0.01, Vec3::new(0.0, 0.0, 9.81)))
                .unwrap();
        }
        assert!(dr.position.norm() < 1e-12);
    }

    #[test]
    fn constant_acceleration_is_integrated_exactly() {
        let mut dr = ImuDeadReckoning::new(Vec3::new(0.0, 0.0, -9.81));
        for k in 0..=100 {
            dr.process(&frame(k as f64 * 0.01, Vec3::new(1.0, 0.0, 9.81)))
                .unwrap();
        }
        assert!((dr.position.x - 0.5).abs() < 1e-12);
        assert!((dr.velocity.x - 1.0).abs() < 1e-12);
    }

    #[test]
    fn backwards_time_is_rejected() {
        let mut dr = ImuDeadReckoning::new(Vec3::new(0.0, 0.0, -9.81));
        dr.process(&frame(1.0, Vec3::zeros())).unwrap();
        assert!(dr.process(&frame(0.5, Vec3::zeros())).is_err());
    }
}
