//! Offline pipelines: sensor frames in, trajectory and drift report out.

use std::path::Path;

use crate::baseline::ImuDeadReckoning;
use crate::error::{Error, Result};
use crate::filter::{
    calibration_from_toml, ContactCalibration, Estimator, FilterConfig, PoseNoise, SensorFrame,
};
use crate::io::{read_sensor_log, read_trajectory, TrajectoryPoint};
use crate::kinematics::split_readings;
use crate::metrics::{drift_report, DriftReport};
use crate::model::RobotModel;
use crate::spatial::{Quaternion, Vec3};

/// External pose measurement, applied after the first frame at or past
/// `timestamp`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseFix {
    pub timestamp: f64,
    pub position: Vec3<f64>,
    pub orientation: Quaternion<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayOutput {
    pub trajectory: Vec<TrajectoryPoint>,
    pub report: Option<DriftReport>,
}

/// Weight-sharing fallback when no calibration file is supplied: every leg
/// saturates at an equal share of body weight.
pub fn default_calibration(
    model: &RobotModel<f64>,
    config: &FilterConfig,
) -> Vec<ContactCalibration> {
    let g = Vec3::from(config.gravity).norm();
    let share = model.mass * g / model.leg_count() as f64;
    vec![
        ContactCalibration {
            f_max: share,
            f_min: 0.0,
        };
        model.leg_count()
    ]
}

/// Runs the estimator over `frames`, one trajectory row per frame.
pub fn run_filter(
    frames: &[SensorFrame<f64>],
    model: &RobotModel<f64>,
    calib: &[ContactCalibration],
    config: &FilterConfig,
    fixes: &[PoseFix],
    pose_noise: &PoseNoise,
) -> Result<Vec<TrajectoryPoint>> {
    let mut est = Estimator::new(model.clone(), calib.to_vec(), config.clone())?;
    let mut fixes = fixes.iter().peekable();
    let mut out = Vec::with_capacity(frames.len());
    for f in frames {
        est.process(f)?;
        while let Some(fix) = fixes.next_if(|x| x.timestamp <= f.timestamp) {
            est.pose_update(&fix.position, &fix.orientation, None, pose_noise)?;
        }
        let state = est.state().expect("initialized by the first frame");
        out.push(TrajectoryPoint::from_state(f.timestamp, &state));
    }
    Ok(out)
}

/// IMU-only dead reckoning. Feet are placed by forward kinematics from the
/// dead-reckoned pose; contact columns are NaN.
pub fn run_imu_baseline(
    frames: &[SensorFrame<f64>],
    model: &RobotModel<f64>,
    config: &FilterConfig,
) -> Result<Vec<TrajectoryPoint>> {
    let mut dr = ImuDeadReckoning::new(Vec3::from(config.gravity));
    let mut out = Vec::with_capacity(frames.len());
    for f in frames {
        f.check(model)?;
        dr.process(f)?;
        let rot = dr.orientation.to_rotmat();
        let feet = model
            .legs
            .iter()
            .zip(&f.legs)
            .map(|(chain, r)| {
                let (angles, _, _) = split_readings(r);
                Ok(dr.position + rot * chain.forward_kinematics(&angles)?.translation)
            })
            .collect::<Result<Vec<_>>>()?;
        out.push(TrajectoryPoint {
            timestamp: f.timestamp,
            position: dr.position,
            orientation: dr.orientation,
            velocity: dr.velocity,
            feet,
            contact: vec![f64::NAN; model.leg_count()],
        });
    }
    Ok(out)
}

/// In-memory replay, with a drift report when truth is given.
pub fn replay_frames(
    frames: &[SensorFrame<f64>],
    truth: Option<&[TrajectoryPoint]>,
    model: &RobotModel<f64>,
    calib: &[ContactCalibration],
    config: &FilterConfig,
) -> Result<ReplayOutput> {
    let trajectory = run_filter(frames, model, calib, config, &[], &PoseNoise::default())?;
    let report = truth.map(|t| drift_report(&trajectory, t)).transpose()?;
    Ok(ReplayOutput { trajectory, report })
}

/// File-based replay. Missing config or calibration paths fall back to the
/// defaults.
pub fn replay_files(
    log: &Path,
    truth: Option<&Path>,
    model: &Path,
    config: Option<&Path>,
    calibration: Option<&Path>,
) -> Result<ReplayOutput> {
    let model = RobotModel::load(model)?;
    let config = match config {
        Some(p) => FilterConfig::load(p)?,
        None => FilterConfig::default(),
    };
    let calib = match calibration {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            calibration_from_toml(&text)?
        }
        None => default_calibration(&model, &config),
    };
    let frames = read_sensor_log(log)?;
    let truth = truth.map(read_trajectory).transpose()?;
    replay_frames(&frames, truth.as_deref(), &model, &calib, &config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{simulate, GaitParams, NoiseSpec, TerrainProfile};

    #[test]
    fn standing_robot_does_not_drift() {
        let model = RobotModel::reference_hexapod();
        let trace = simulate(
            &model,
            &GaitParams {
                body_speed: 0.0,
                ..GaitParams::default()
            },
            &TerrainProfile::flat(),
            &NoiseSpec::zero(),
            2.0,
            1,
        )
        .unwrap();
        let config = FilterConfig::default();
        let calib = default_calibration(&model, &config);
        let traj = run_filter(
            &trace.frames,
            &model,
            &calib,
            &config,
            &[],
            &PoseNoise::default(),
        )
        .unwrap();
        assert_eq!(traj.len(), trace.frames.len());
        assert!(traj.last().unwrap().position.norm() < 1e-4);
        let dr = run_imu_baseline(&trace.frames, &model, &config).unwrap();
        assert!(dr.last().unwrap().position.norm() < 1e-6);
    }

    #[test]
    fn fixes_pull_the_estimate() {
        let model = RobotModel::reference_hexapod();
        let trace = simulate(
            &model,
            &GaitParams {
                body_speed: 0.0,
                ..GaitParams::default()
            },
            &TerrainProfile::flat(),
            &NoiseSpec::zero(),
            1.0,
            1,
        )
        .unwrap();
        let config = FilterConfig::default();
        let calib = default_calibration(&model, &config);
        let fix = PoseFix {
            timestamp: 0.5,
            position: Vec3::new(0.05, 0.0, 0.0),
            orientation: Quaternion::identity(),
        };
        let traj = run_filter(
            &trace.frames,
            &model,
            &calib,
            &config,
            &[fix],
            &PoseNoise::default(),
        )
        .unwrap();
        let k = trace
            .frames
            .iter()
            .position(|f| f.timestamp >= 0.5)
            .unwrap();
        assert!(traj[k].position.x > 1e-4 && traj[k].position.x < 0.05);
        assert!(traj[k - 1].position.x.abs() < 1e-9);
    }
}
