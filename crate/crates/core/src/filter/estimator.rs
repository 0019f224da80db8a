//! Filter step, initial belief, external pose updates, and a stateful wrapper.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::filter::config::{ContactCalibration, FilterConfig};
use crate::filter::measurement::{build_measurement, observe_legs, Measurement, SensorFrame};
use crate::filter::models::{
    adapt_process_noise, measurement_model, measurement_noise, process_model,
};
use crate::filter::state::{RobotState, StateLayout};
use crate::model::RobotModel;
use crate::scalar::{lit, Real};
use crate::spatial::{Quaternion, Vec3};
use crate::srukf::{self, GateMask, SqrtBelief};

/// Initial belief: origin, identity attitude, zero rates and biases, feet
/// at their forward-kinematics positions and contacts from the first torque
/// reading.
pub fn initial_belief<T: Real>(
    frame: &SensorFrame<T>,
    model: &RobotModel<T>,
    calib: &[ContactCalibration],
    config: &FilterConfig,
) -> Result<SqrtBelief<T>> {
    let legs = observe_legs(frame, model, calib, config)?;
    let feet = legs.iter().map(|l| l.foot.translation).collect();
    let contact = legs
        .iter()
        .map(|l| l.contact.unwrap_or(T::zero()))
        .collect();
    let state = RobotState::at_rest(feet, contact);
    let layout = state.layout();
    let s = &config.initial_std;
    let mut std = DVector::zeros(layout.dim());
    let mut fill = |start: usize, len: usize, v: f64| {
        for k in start..start + len {
            std[k] = lit::<T>(v);
        }
    };
    fill(StateLayout::POSITION, 3, s.position);
    fill(StateLayout::VELOCITY, 3, s.velocity);
    fill(StateLayout::ORIENTATION, 4, s.orientation);
    fill(StateLayout::ANGULAR_VELOCITY, 3, s.angular_velocity);
    fill(StateLayout::GYRO_BIAS, 3, s.gyro_bias);
    fill(StateLayout::ACCEL_BIAS, 3, s.accel_bias);
    for i in 0..state.legs() {
        fill(layout.foot(i), 3, s.foot);
        fill(layout.contact(i), 1, s.contact);
    }
    Ok(SqrtBelief::from_std(state.to_vector(), &std)?)
}

/// Everything one step produced besides the posterior.
#[derive(Debug, Clone)]
pub struct StepReport<T: Real> {
    pub dt: f64,
    pub measurement: Measurement<T>,
    /// Innovation actually applied; gated components are exactly zero.
    pub innovation: DVector<T>,
    /// Measurement predicted from the prior.
    pub predicted: DVector<T>,
}

/// Renormalizes the quaternion and clamps contacts in place.
fn tidy_mean<T: Real>(mean: &mut DVector<T>, legs: usize) {
    let layout = StateLayout::new(legs);
    let o = StateLayout::ORIENTATION;
    let q = Quaternion::from_slice(&mean.as_slice()[o..o + 4]).normalize();
    for (k, c) in q.to_array().into_iter().enumerate() {
        mean[o + k] = c;
    }
    for i in 0..legs {
        let c = &mut mean[layout.contact(i)];
        *c = c.clamp(T::zero(), T::one());
    }
}

/// One predict/update cycle over `frame`.
///
/// `prev` is the frame consumed by the previous step; its timestamp sets
/// `dt`. Equal timestamps give a zero-length prediction, earlier ones are an
/// ordering error.
pub fn step<T: Real>(
    belief: &SqrtBelief<T>,
    frame: &SensorFrame<T>,
    prev: Option<&SensorFrame<T>>,
    model: &RobotModel<T>,
    calib: &[ContactCalibration],
    config: &FilterConfig,
) -> Result<(SqrtBelief<T>, StepReport<T>)> {
    let n = model.leg_count();
    let dt = match prev {
        Some(p) if frame.timestamp < p.timestamp || !frame.timestamp.is_finite() => {
            return Err(Error::Ordering {
                previous: p.timestamp,
                current: frame.timestamp,
            })
        }
        Some(p) => frame.timestamp - p.timestamp,
        None => 0.0,
    };
    let dt_t: T = lit(dt);
    let params = config.ut.params::<T>();
    let mean = RobotState::from_vector(&belief.mean, n);

    // Swing-foot world velocity: body velocity plus the rotated rigid-body
    // and joint-driven terms at the prior mean, averaged over the previous
    // and current frames.
    let q = mean.orientation.normalize();
    let omega = mean.angular_velocity - mean.gyro_bias;
    let relative = |f: &SensorFrame<T>| -> Result<Vec<Vec3<T>>> {
        Ok(observe_legs(f, model, calib, config)?
            .iter()
            .map(|l| omega.cross(&l.foot.translation) + l.foot_velocity)
            .collect())
    };
    let now = relative(frame)?;
    let before = match prev {
        Some(p) => relative(p)?,
        None => now.clone(),
    };
    let half: T = lit(0.5);
    let foot_vel: Vec<Vec3<T>> = now
        .iter()
        .zip(&before)
        .map(|(a, b)| mean.velocity + q.rotate_unchecked(&((a + b) * half)))
        .collect();

    let swing: T = lit(config.swing_threshold);
    let q_sqrt = adapt_process_noise(config, &mean.contact, dt_t);
    let predicted = srukf::predict(
        belief,
        |x| process_model(&RobotState::from_vector(x, n), &foot_vel, dt_t, swing).to_vector(),
        &q_sqrt,
        &params,
    )?;

    let prior = RobotState::from_vector(&predicted.mean, n);
    let measurement = build_measurement(frame, prev, &prior, model, calib, config)?;
    let gravity = Vec3::new(
        lit::<T>(config.gravity[0]),
        lit(config.gravity[1]),
        lit(config.gravity[2]),
    );
    let r_sqrt = measurement_noise::<T>(config, n);
    let outcome = srukf::update(
        &predicted,
        |x| measurement_model(&RobotState::from_vector(x, n), &gravity),
        &r_sqrt,
        &measurement.observed,
        &measurement.gate,
        &params,
    )?;
    let mut posterior = outcome.belief;
    tidy_mean(&mut posterior.mean, n);
    Ok((
        posterior,
        StepReport {
            dt,
            measurement,
            innovation: outcome.innovation,
            predicted: outcome.predicted,
        },
    ))
}

/// Standard deviations of an external pose fix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseNoise {
    /// Metres, per axis.
    pub position: f64,
    /// Radians, per axis (small angle).
    pub orientation: f64,
    /// m/s, per axis; used only when a velocity is supplied.
    pub velocity: f64,
}

impl Default for PoseNoise {
    fn default() -> Self {
        Self {
            position: 0.02,
            orientation: 0.02,
            velocity: 0.05,
        }
    }
}

/// External pose fix `(r, q)` and optionally `v`, applied as a direct
/// measurement of those state entries.
pub fn external_pose_update<T: Real>(
    belief: &SqrtBelief<T>,
    legs: usize,
    position: &Vec3<T>,
    orientation: &Quaternion<T>,
    velocity: Option<&Vec3<T>>,
    noise: &PoseNoise,
    config: &FilterConfig,
) -> Result<SqrtBelief<T>> {
    orientation.rotate(&Vec3::zeros())?;
    let o = StateLayout::ORIENTATION;
    let current = Quaternion::from_slice(&belief.mean.as_slice()[o..o + 4]);
    // q and −q are the same rotation; observe the one nearest the mean.
    let q = if current.dot(orientation) < T::zero() {
        orientation.scale(-T::one())
    } else {
        *orientation
    };
    let m = if velocity.is_some() { 10 } else { 7 };
    let mut observed = DVector::zeros(m);
    let mut std = DVector::zeros(m);
    observed.fixed_rows_mut::<3>(0).copy_from(position);
    for (k, c) in q.to_array().into_iter().enumerate() {
        observed[3 + k] = c;
    }
    for k in 0..3 {
        std[k] = lit(noise.position);
    }
    for k in 3..7 {
        std[k] = lit(noise.orientation * 0.5);
    }
    if let Some(v) = velocity {
        observed.fixed_rows_mut::<3>(7).copy_from(v);
        for k in 7..10 {
            std[k] = lit(noise.velocity);
        }
    }
    let select = |x: &DVector<T>| {
        let mut z = DVector::zeros(m);
        z.fixed_rows_mut::<3>(0)
            .copy_from(&x.fixed_rows::<3>(StateLayout::POSITION));
        z.fixed_rows_mut::<4>(3).copy_from(&x.fixed_rows::<4>(o));
        if m == 10 {
            z.fixed_rows_mut::<3>(7)
                .copy_from(&x.fixed_rows::<3>(StateLayout::VELOCITY));
        }
        z
    };
    let outcome = srukf::update(
        belief,
        select,
        &DMatrix::from_diagonal(&std),
        &observed,
        &GateMask::all(m),
        &config.ut.params(),
    )?;
    let mut posterior = outcome.belief;
    tidy_mean(&mut posterior.mean, legs);
    Ok(posterior)
}

/// Stateful estimator that feeds frames in timestamp order.
#[derive(Debug, Clone)]
pub struct Estimator<T: Real> {
    model: RobotModel<T>,
    calib: Vec<ContactCalibration>,
    config: FilterConfig,
    belief: Option<SqrtBelief<T>>,
    prev: Option<SensorFrame<T>>,
}

impl<T: Real> Estimator<T> {
    pub fn new(
        model: RobotModel<T>,
        calib: Vec<ContactCalibration>,
        config: FilterConfig,
    ) -> Result<Self> {
        config.validate()?;
        if calib.len() != model.leg_count() {
            return Err(Error::Config(format!(
                "{} contact calibrations for {} legs",
                calib.len(),
                model.leg_count()
            )));
        }
        for c in &calib {
            c.validate()?;
        }
        Ok(Self {
            model,
            calib,
            config,
            belief: None,
            prev: None,
        })
    }

    /// Consumes one frame. The first frame initializes the belief; later
    /// frames run a full step. Returns the step report when one ran.
    pub fn process(&mut self, frame: &SensorFrame<T>) -> Result<Option<StepReport<T>>> {
        match (&self.belief, &self.prev) {
            (Some(belief), prev) => {
                let (next, report) = step(
                    belief,
                    frame,
                    prev.as_ref(),
                    &self.model,
                    &self.calib,
                    &self.config,
                )?;
                self.belief = Some(next);
                self.prev = Some(frame.clone());
                Ok(Some(report))
            }
            (None, _) => {
                self.belief = Some(initial_belief(
                    frame,
                    &self.model,
                    &self.calib,
                    &self.config,
                )?);
                self.prev = Some(frame.clone());
                Ok(None)
            }
        }
    }

    /// Applies an external pose fix to the current belief.
    pub fn pose_update(
        &mut self,
        position: &Vec3<T>,
        orientation: &Quaternion<T>,
        velocity: Option<&Vec3<T>>,
        noise: &PoseNoise,
    ) -> Result<()> {
        let belief = self
            .belief
            .as_ref()
            .ok_or_else(|| Error::Config("pose update before the first frame".into()))?;
        let legs = self.model.leg_count();
        self.belief = Some(external_pose_update(
            belief,
            legs,
            position,
            orientation,
            velocity,
            noise,
            &self.config,
        )?);
        Ok(())
    }

    pub fn belief(&self) -> Option<&SqrtBelief<T>> {
        self.belief.as_ref()
    }

    pub fn state(&self) -> Option<RobotState<T>> {
        self.belief
            .as_ref()
            .map(|b| RobotState::from_vector(&b.mean, self.model.leg_count()))
    }

    /// Timestamp of the last consumed frame.
    pub fn time(&self) -> Option<f64> {
        self.prev.as_ref().map(|f| f.timestamp)
    }

    pub fn model(&self) -> &RobotModel<T> {
        &self.model
    }

    pub fn config(&self) -> &FilterConfig {
        &self.config
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::JointReading;

    fn setup() -> (RobotModel<f64>, Vec<ContactCalibration>, FilterConfig) {
        (
            RobotModel::reference_hexapod(),
            vec![ContactCalibration::new(20.0, 0.0).unwrap(); 6],
            FilterConfig::default(),
        )
    }

    fn frame(t: f64) -> SensorFrame<f64> {
        let leg = vec![
            JointReading {
                angle: 0.0,
                velocity: 0.0,
                torque: 0.0,
            },
            JointReading {
                angle: -0.3,
                velocity: 0.0,
                torque: 10.0,
            },
            JointReading {
                angle: 1.4,
                velocity: 0.0,
                torque: -5.0,
            },
        ];
        SensorFrame {
            timestamp: t,
            legs: vec![leg; 6],
            gyro: Vec3::zeros(),
            accel: Vec3::new(0.0, 0.0, 9.81),
        }
    }

    #[test]
    fn initial_belief_places_feet_at_fk() {
        let (m, c, cfg) = setup();
        let b = initial_belief(&frame(0.0), &m, &c, &cfg).unwrap();
        let s = RobotState::from_vector(&b.mean, 6);
        for i in 0..6 {
            let t = m.legs[i]
                .forward_kinematics(&[0.0, -0.3, 1.4])
                .unwrap()
                .translation;
            assert_eq!(s.feet[i], t);
        }
        assert_eq!(s.orientation, Quaternion::identity());
        assert!(s.contact.iter().all(|c| *c == 1.0));
    }

    #[test]
    fn time_going_backwards_is_an_error() {
        let (m, c, cfg) = setup();
        let b = initial_belief(&frame(1.0), &m, &c, &cfg).unwrap();
        let r = step(&b, &frame(0.5), Some(&frame(1.0)), &m, &c, &cfg);
        assert!(matches!(r, Err(Error::Ordering { .. })));
    }

    #[test]
    fn stationary_frames_keep_robot_at_origin() {
        let (m, c, cfg) = setup();
        let mut est = Estimator::new(m, c, cfg).unwrap();
        for k in 0..300 {
            est.process(&frame(k as f64 * 0.01)).unwrap();
        }
        let s = est.state().unwrap();
        assert!(s.position.norm() < 1e-3, "{}", s.position.norm());
        assert!((s.orientation.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn repeated_frames_settle() {
        let (m, c, cfg) = setup();
        let mut est = Estimator::new(m, c, cfg).unwrap();
        for k in 0..200 {
            est.process(&frame(k as f64 * 0.01)).unwrap();
        }
        // Zero-length prediction; only the residual innovation from the
        // unscented mean's curvature term moves the belief.
        let f = frame(1.99);
        let mut diffs = vec![];
        for _ in 0..60 {
            let before = est.belief().unwrap().mean.clone();
            est.process(&f).unwrap();
            diffs.push((&est.belief().unwrap().mean - before).amax());
        }
        assert!(diffs.windows(2).all(|w| w[1] <= w[0]));
        assert!(diffs[59] < 1e-7, "{diffs:?}");
    }

    #[test]
    fn repeated_frames_without_innovation_are_exactly_stable() {
        let (m, c, mut cfg) = setup();
        cfg.gates_forced_off = true;
        let mut est = Estimator::new(m, c, cfg).unwrap();
        est.process(&frame(0.0)).unwrap();
        for _ in 0..20 {
            let before = est.belief().unwrap().mean.clone();
            est.process(&frame(0.0)).unwrap();
            assert!((&est.belief().unwrap().mean - before).amax() < 1e-9);
        }
    }

    #[test]
    fn pose_update_pulls_toward_fix() {
        let (m, c, cfg) = setup();
        let b = initial_belief(&frame(0.0), &m, &c, &cfg).unwrap();
        let tight = PoseNoise {
            position: 1e-6,
            orientation: 1e-6,
            velocity: 1e-6,
        };
        let same = external_pose_update(
            &b,
            6,
            &Vec3::zeros(),
            &Quaternion::identity(),
            None,
            &tight,
            &cfg,
        )
        .unwrap();
        assert!((same.mean.clone() - &b.mean).amax() < 1e-10);
        let moved = external_pose_update(
            &b,
            6,
            &Vec3::new(0.1, 0.0, 0.0),
            &Quaternion::identity(),
            None,
            &tight,
            &cfg,
        )
        .unwrap();
        assert!((moved.mean[0] - 0.1).abs() < 1e-6);
        // Sign-flipped fix is the same rotation.
        let flipped = Quaternion::new(0.0, 0.0, 0.0, -1.0);
        let s = external_pose_update(&b, 6, &Vec3::zeros(), &flipped, None, &tight, &cfg).unwrap();
        assert!((s.mean.clone() - &b.mean).amax() < 1e-10);
    }

    #[test]
    fn forced_off_gates_dead_reckon_at_constant_velocity() {
        let (m, c, mut cfg) = setup();
        cfg.gates_forced_off = true;
        let mut b = initial_belief(&frame(0.0), &m, &c, &cfg).unwrap();
        b.mean[StateLayout::VELOCITY] = 0.2;
        let mut prev = frame(0.0);
        for k in 1..=100 {
            let f = frame(k as f64 * 0.01);
            b = step(&b, &f, Some(&prev), &m, &c, &cfg).unwrap().0;
            prev = f;
        }
        assert!((b.mean[0] - 0.2).abs() < 1e-9, "{}", b.mean[0]);
    }
}
