//! Kinematic walking simulator producing ground truth and sensor frames.
//!
//! The world origin is the CoM at `t = 0`; the starting ground lies
//! `standing_height` below it. Heading stays fixed and body pitch follows
//! the smoothed terrain slope. Sensors are derived from the truth: joint
//! angles by inverse kinematics, joint rates by differentiation, torques
//! from a static load-sharing model over stance legs, and the IMU from
//! finite differences of the body pose.

pub mod gait;
pub mod noise;
pub mod terrain;

use nalgebra::{DMatrix, DVector, Matrix3};

use crate::error::{Error, Result};
use crate::filter::SensorFrame;
use crate::kinematics::{JointReading, LegChain};
use crate::model::RobotModel;
use crate::spatial::{Quaternion, Vec3};

pub use gait::{FootSchedule, GaitParams, Swing};
pub use noise::{inject_impact_noise, ImpactSpec, NoiseSpec};
pub use terrain::{BodyPath, TerrainKind, TerrainProfile};

/// Sensor rate, Hz.
pub const RATE_HZ: f64 = 100.0;
/// Joint angles of the nominal stance posture.
pub const HOME_ANGLES: [f64; 3] = [0.0, -0.5, 1.8];
/// Standard gravity, m/s².
pub const GRAVITY: f64 = 9.81;

const DIFF_STEP: f64 = 1e-3;
const RATE_STEP: f64 = 1e-5;

/// Ground-truth sample.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthSample {
    pub timestamp: f64,
    pub position: Vec3<f64>,
    pub orientation: Quaternion<f64>,
    pub velocity: Vec3<f64>,
    /// Body frame.
    pub angular_velocity: Vec3<f64>,
    pub feet: Vec<Vec3<f64>>,
    pub contact: Vec<bool>,
}

/// Truth and sensor streams sharing timestamps.
#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace {
    pub truth: Vec<TruthSample>,
    pub frames: Vec<SensorFrame<f64>>,
    /// `(time, leg)` of each touchdown.
    pub touchdowns: Vec<(f64, usize)>,
}

/// Analytic body and foot motion for one run.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub terrain: TerrainProfile,
    pub gait: GaitParams,
    pub path: BodyPath,
    pub schedule: FootSchedule,
    /// Nominal stance foot offsets in the body frame.
    pub nominal: Vec<Vec3<f64>>,
    pub standing_height: f64,
}

impl Scenario {
    pub fn new(
        model: &RobotModel<f64>,
        gait: &GaitParams,
        terrain: &TerrainProfile,
        duration: f64,
    ) -> Result<Self> {
        terrain.validate()?;
        gait.validate(model.leg_count())?;
        let nominal = model
            .legs
            .iter()
            .map(|leg| {
                let angles = home_angles(leg)?;
                Ok(leg.forward_kinematics(&angles)?.translation)
            })
            .collect::<Result<Vec<_>>>()?;
        let standing_height = -nominal.iter().map(|p| p.z).sum::<f64>() / nominal.len() as f64;
        if !(standing_height > 0.0) {
            return Err(Error::Config(
                "nominal stance puts the feet above the body".into(),
            ));
        }
        let path = BodyPath::new(terrain, gait.body_speed);
        let ground = -standing_height;
        let body = |t: f64| body_pose(&path, terrain, t);
        let schedule = gait::plan(gait, terrain, ground, duration, nominal.len(), |leg, t| {
            let (r, q) = body(t);
            r + q.rotate_unchecked(&nominal[leg])
        });
        Ok(Self {
            terrain: *terrain,
            gait: gait.clone(),
            path,
            schedule,
            nominal,
            standing_height,
        })
    }

    /// World pose of the body.
    pub fn body(&self, t: f64) -> (Vec3<f64>, Quaternion<f64>) {
        body_pose(&self.path, &self.terrain, t)
    }

    /// World foot position and stance flag.
    pub fn foot(&self, leg: usize, t: f64) -> (Vec3<f64>, bool) {
        self.schedule.foot(leg, t)
    }

    /// Foot offset in the body frame, `t_cf`.
    pub fn foot_offset(&self, leg: usize, t: f64) -> Vec3<f64> {
        let (r, q) = self.body(t);
        q.conjugate().rotate_unchecked(&(self.foot(leg, t).0 - r))
    }

    /// Body-frame specific force and angular rate an ideal IMU would read.
    pub fn imu(&self, t: f64) -> (Vec3<f64>, Vec3<f64>) {
        let h = DIFF_STEP;
        let (r0, q0) = self.body(t);
        let (rp, qp) = self.body(t + h);
        let (rm, qm) = self.body(t - h);
        let accel = (rp - r0 * 2.0 + rm) / (h * h);
        let g = Vec3::new(0.0, 0.0, -GRAVITY);
        let specific = q0.conjugate().rotate_unchecked(&(accel - g));
        // ω_body = 2 vec(q⁻¹ ⊗ q̇)
        let qdot = qp.add(&qm.scale(-1.0)).scale(1.0 / (2.0 * h));
        let omega = (q0.conjugate() * qdot).vector() * 2.0;
        (specific, omega)
    }

    pub fn velocity(&self, t: f64) -> Vec3<f64> {
        let h = DIFF_STEP;
        (self.body(t + h).0 - self.body(t - h).0) / (2.0 * h)
    }
}

fn body_pose(path: &BodyPath, terrain: &TerrainProfile, t: f64) -> (Vec3<f64>, Quaternion<f64>) {
    let xy = path.point(t);
    let h = terrain.smoothed(xy[0]);
    // Nose up on a rising slope is a negative rotation about +y.
    let pitch = -h[1].atan();
    let q = Quaternion::from_axis_angle(&Vec3::y(), pitch);
    (Vec3::new(xy[0], xy[1], h[0]), q)
}

fn home_angles(leg: &LegChain<f64>) -> Result<Vec<f64>> {
    if leg.dof() != HOME_ANGLES.len() {
        return Err(Error::Config(format!(
            "simulator needs 3-joint legs, got {}",
            leg.dof()
        )));
    }
    Ok(HOME_ANGLES.to_vec())
}

/// Damped Newton inverse kinematics for foot position `target` (CoM frame).
pub fn solve_ik(leg: &LegChain<f64>, target: &Vec3<f64>, seed: &[f64]) -> Result<Vec<f64>> {
    let mut a = seed.to_vec();
    for _ in 0..100 {
        let err = target - leg.forward_kinematics(&a)?.translation;
        if err.norm() < 1e-13 {
            return Ok(a);
        }
        let j = leg.spatial_jacobian(&a)?;
        let j: Matrix3<f64> = j.fixed_view::<3, 3>(0, 0).into_owned();
        let damping = 1e-10;
        let step = (j.transpose() * j + Matrix3::identity() * damping)
            .lu()
            .solve(&(j.transpose() * err))
            .ok_or_else(|| Error::Config("inverse kinematics hit a singular pose".into()))?;
        let scale = (0.3 / step.norm()).min(1.0);
        for k in 0..3 {
            a[k] += step[k] * scale;
        }
    }
    let err = (target - leg.forward_kinematics(&a)?.translation).norm();
    if err < 1e-10 {
        return Ok(a);
    }
    Err(Error::Config(format!(
        "foothold unreachable: inverse kinematics residual {err:.3e} m"
    )))
}

/// Minimum-norm world-frame ground reaction forces on the stance feet that
/// hold the body still: forces sum to the weight and moments about the CoM
/// vanish. `offsets` are world-frame CoM-to-foot vectors.
pub fn load_sharing(mass: f64, offsets: &[Vec3<f64>]) -> Result<Vec<Vec3<f64>>> {
    let k = offsets.len();
    if k < 3 {
        return Err(Error::InsufficientSupport {
            stance: k,
            required: 3,
        });
    }
    let mut a = DMatrix::zeros(6, 3 * k);
    for (i, r) in offsets.iter().enumerate() {
        a.fixed_view_mut::<3, 3>(0, 3 * i).fill_with_identity();
        a.fixed_view_mut::<3, 3>(3, 3 * i)
            .copy_from(&crate::spatial::skew(r));
    }
    let mut b = DVector::zeros(6);
    b[2] = mass * GRAVITY;
    let aat = &a * a.transpose();
    let y = aat
        .cholesky()
        .ok_or_else(|| Error::Config("stance feet cannot balance the body".into()))?
        .solve(&b);
    let f = a.transpose() * y;
    Ok((0..k)
        .map(|i| Vec3::new(f[3 * i], f[3 * i + 1], f[3 * i + 2]))
        .collect())
}

/// Runs the simulator.
pub fn simulate(
    model: &RobotModel<f64>,
    gait: &GaitParams,
    terrain: &TerrainProfile,
    noise: &NoiseSpec,
    duration: f64,
    seed: u64,
) -> Result<SimTrace> {
    if !(duration > 0.0) || !duration.is_finite() {
        return Err(Error::Config("duration must be positive".into()));
    }
    noise.validate()?;
    let scenario = Scenario::new(model, gait, terrain, duration)?;
    let dt = 1.0 / RATE_HZ;
    let steps = (duration * RATE_HZ).round() as usize;
    let n = model.leg_count();
    let mut seeds: Vec<Vec<f64>> = model.legs.iter().map(home_angles).collect::<Result<_>>()?;
    let mut truth = Vec::with_capacity(steps + 1);
    let mut frames = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        let t = k as f64 * dt;
        let (r, q) = scenario.body(t);
        let feet: Vec<(Vec3<f64>, bool)> = (0..n).map(|i| scenario.foot(i, t)).collect();
        let stance: Vec<usize> = (0..n).filter(|&i| feet[i].1).collect();
        let offsets: Vec<Vec3<f64>> = stance.iter().map(|&i| feet[i].0 - r).collect();
        let forces = load_sharing(model.mass, &offsets)?;
        let mut legs = Vec::with_capacity(n);
        for (i, chain) in model.legs.iter().enumerate() {
            let target = scenario.foot_offset(i, t);
            let angles = solve_ik(chain, &target, &seeds[i]).map_err(|e| match e {
                Error::Config(m) => Error::Config(format!("leg {i} at t = {t:.2} s: {m}")),
                other => other,
            })?;
            let rate = (scenario.foot_offset(i, t + RATE_STEP)
                - scenario.foot_offset(i, t - RATE_STEP))
                / (2.0 * RATE_STEP);
            let j = chain.spatial_jacobian(&angles)?;
            let j: Matrix3<f64> = j.fixed_view::<3, 3>(0, 0).into_owned();
            let lu = j.lu();
            let velocities = lu
                .solve(&rate)
                .ok_or_else(|| Error::Config(format!("leg {i} singular at t = {t:.2} s")))?;
            let force_body = match stance.iter().position(|&s| s == i) {
                Some(p) => q.conjugate().rotate_unchecked(&forces[p]),
                None => Vec3::zeros(),
            };
            let torques = j.transpose() * force_body;
            legs.push(
                (0..3)
                    .map(|k| JointReading {
                        angle: angles[k],
                        velocity: velocities[k],
                        torque: torques[k],
                    })
                    .collect(),
            );
            seeds[i] = angles;
        }
        let (accel, gyro) = scenario.imu(t);
        frames.push(SensorFrame {
            timestamp: t,
            legs,
            gyro,
            accel,
        });
        truth.push(TruthSample {
            timestamp: t,
            position: r,
            orientation: q,
            velocity: scenario.velocity(t),
            angular_velocity: gyro,
            feet: feet.iter().map(|f| f.0).collect(),
            contact: feet.iter().map(|f| f.1).collect(),
        });
    }
    let touchdowns: Vec<(f64, usize)> = scenario
        .schedule
        .touchdowns()
        .into_iter()
        .filter(|e| e.0 <= steps as f64 * dt)
        .collect();
    noise::corrupt(&mut frames, noise, dt, seed);
    let times: Vec<f64> = touchdowns.iter().map(|e| e.0).collect();
    inject_impact_noise(&mut frames, &times, noise, seed);
    Ok(SimTrace {
        truth,
        frames,
        touchdowns,
    })
}

/// Duration that covers the whole commanded path plus a short stand.
pub fn default_duration(terrain: &TerrainProfile, gait: &GaitParams) -> f64 {
    let end = BodyPath::new(terrain, gait.body_speed).end_time();
    (end + gait.cycle_time).ceil()
}
