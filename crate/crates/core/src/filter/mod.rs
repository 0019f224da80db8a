//! The contact-centric estimator built on [`crate::srukf`].

pub mod calibration;
pub mod config;
pub mod estimator;
pub mod measurement;
pub mod models;
pub mod state;

pub use calibration::calibrate_contact;
pub use config::{
    calibration_from_toml, calibration_to_toml, ContactCalibration, ContactModel, FilterConfig,
    InitialStd, MeasurementNoise, ProcessNoise, ScaleSpace, UtConfig,
};
pub use estimator::{external_pose_update, initial_belief, step, Estimator, PoseNoise, StepReport};
pub use measurement::{build_measurement, observe_legs, LegObservation, Measurement, SensorFrame};
pub use models::{
    adapt_process_noise, body_twist_ls, contact_probability, measurement_model, measurement_noise,
    process_model, BodyTwist,
};
pub use state::{MeasurementLayout, RobotState, StateLayout};
