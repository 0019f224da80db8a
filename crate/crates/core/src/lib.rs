//! Contact-centric leg odometry: a square-root unscented Kalman filter that
//! fuses joint encoders, joint velocities, joint torques and an IMU into
//! pose, velocity, foot-position and contact estimates for a legged robot.
//!
//! The numerical core is generic over [`scalar::Real`] (`f32` or `f64`);
//! the aliases below fix it to `f64`.
//!
//! Quaternions are stored vector part first: `(x, y, z, w)`.

pub mod baseline;
pub mod error;
pub mod filter;
pub mod io;
pub mod kinematics;
pub mod metrics;
pub mod model;
pub mod replay;
pub mod scalar;
pub mod sim;
pub mod spatial;
pub mod srukf;

pub use error::{Error, Result};
pub use io::TrajectoryPoint;
pub use metrics::DriftReport;

pub type Quaternion64 = spatial::Quaternion<f64>;
pub type Vec3f64 = spatial::Vec3<f64>;
pub type LegChain64 = kinematics::LegChain<f64>;
pub type RobotModel64 = model::RobotModel<f64>;
pub type SqrtBelief64 = srukf::SqrtBelief<f64>;
pub type RobotState64 = filter::RobotState<f64>;
pub type SensorFrame64 = filter::SensorFrame<f64>;
pub type Estimator64 = filter::Estimator<f64>;
pub type ImuDeadReckoning64 = baseline::ImuDeadReckoning<f64>;
