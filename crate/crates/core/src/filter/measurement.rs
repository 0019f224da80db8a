//! Observed measurement vector and gate assembled from one sensor frame.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::filter::config::{ContactCalibration, FilterConfig};
use crate::filter::models::{body_twist_ls, contact_probability, BodyTwist};
use crate::filter::state::{MeasurementLayout, RobotState};
use crate::kinematics::{split_readings, FootFrame, JointReading};
use crate::model::RobotModel;
use crate::scalar::{lit, Real};
use crate::spatial::Vec3;
use crate::srukf::GateMask;

/// One timestamped sample of every proprioceptive sensor.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorFrame<T: Real> {
    /// Seconds.
    pub timestamp: f64,
    /// `legs[i][j]` is joint `j` of leg `i`.
    pub legs: Vec<Vec<JointReading<T>>>,
    /// Body-frame angular rate, rad/s.
    pub gyro: Vec3<T>,
    /// Body-frame specific force, m/s².
    pub accel: Vec3<T>,
}

impl<T: Real> SensorFrame<T> {
    /// Checks leg and joint counts against the model.
    pub fn check(&self, model: &RobotModel<T>) -> Result<()> {
        if self.legs.len() != model.leg_count() {
            return Err(Error::FrameMismatch(format!(
                "{} legs in frame, model has {}",
                self.legs.len(),
                model.leg_count()
            )));
        }
        for (i, (readings, chain)) in self.legs.iter().zip(&model.legs).enumerate() {
            if readings.len() != chain.dof() {
                return Err(Error::FrameMismatch(format!(
                    "leg {i}: {} joints in frame, model has {}",
                    readings.len(),
                    chain.dof()
                )));
            }
        }
        Ok(())
    }
}

/// Per-leg quantities derived from joint readings alone.
#[derive(Debug, Clone, PartialEq)]
pub struct LegObservation<T: Real> {
    pub foot: FootFrame<T>,
    /// `d/dt t_cf`, CoM frame.
    pub foot_velocity: Vec3<T>,
    /// Contact probability, `None` at a kinematic singularity.
    pub contact: Option<T>,
}

/// Evaluates forward kinematics, foot velocity and contact for every leg.
pub fn observe_legs<T: Real>(
    frame: &SensorFrame<T>,
    model: &RobotModel<T>,
    calib: &[ContactCalibration],
    config: &FilterConfig,
) -> Result<Vec<LegObservation<T>>> {
    frame.check(model)?;
    if calib.len() != model.leg_count() {
        return Err(Error::Config(format!(
            "{} contact calibrations for {} legs",
            calib.len(),
            model.leg_count()
        )));
    }
    let mut out = Vec::with_capacity(model.leg_count());
    for ((chain, readings), cal) in model.legs.iter().zip(&frame.legs).zip(calib) {
        let (angles, velocities, torques) = split_readings(readings);
        let foot = chain.forward_kinematics(&angles)?;
        let foot_velocity = chain.foot_velocity(&angles, &velocities)?;
        let contact = chain
            .foot_force(&angles, &torques)
            .ok()
            .map(|f| contact_probability(&f, cal, config.contact_model));
        out.push(LegObservation {
            foot,
            foot_velocity,
            contact,
        });
    }
    Ok(out)
}

/// Observed vector, gate, and the intermediate quantities behind them.
#[derive(Debug, Clone)]
pub struct Measurement<T: Real> {
    pub observed: DVector<T>,
    pub gate: GateMask,
    /// Measured contact probability per leg (0 where unknown).
    pub contacts: Vec<T>,
    /// Legs used in the twist least squares.
    pub stance: Vec<usize>,
    pub twist: Option<BodyTwist<T>>,
    pub legs: Vec<LegObservation<T>>,
}

/// Builds the observed measurement for `frame` given the predicted `state`.
///
/// Blocks and gates:
/// * gravity: negated mean of the current and previous accelerometer
///   samples; open only when every leg's contact is at least
///   `all_contact_threshold`.
/// * velocity, angular velocity: twist least squares over stance legs, the
///   linear part rotated to world with the predicted attitude and the
///   angular part blended with the bias-corrected gyro; closed when support
///   is insufficient.
/// * kinematics: `−t_cf` per leg, which is what `qᵀ(r − p)` predicts.
/// * contact: from foot force; closed at kinematic singularities.
pub fn build_measurement<T: Real>(
    frame: &SensorFrame<T>,
    prev: Option<&SensorFrame<T>>,
    state: &RobotState<T>,
    model: &RobotModel<T>,
    calib: &[ContactCalibration],
    config: &FilterConfig,
) -> Result<Measurement<T>> {
    let legs = observe_legs(frame, model, calib, config)?;
    let n = legs.len();
    let layout = MeasurementLayout::new(n);
    let mut observed = DVector::zeros(layout.dim());
    let mut gate = GateMask::all(layout.dim());
    let stance_level: T = lit(config.all_contact_threshold);

    let contacts: Vec<T> = legs
        .iter()
        .map(|l| l.contact.unwrap_or(T::zero()))
        .collect();
    let all_loaded = legs
        .iter()
        .all(|l| matches!(l.contact, Some(c) if c >= stance_level));

    let accel = match prev {
        Some(p) => (frame.accel + p.accel) * lit::<T>(0.5),
        None => frame.accel,
    };
    observed
        .fixed_rows_mut::<3>(MeasurementLayout::GRAVITY)
        .copy_from(&(-accel));
    gate.set_range(
        MeasurementLayout::GRAVITY..MeasurementLayout::GRAVITY + 3,
        all_loaded,
    );

    let stance: Vec<usize> = (0..n)
        .filter(|&i| matches!(legs[i].contact, Some(c) if c >= stance_level))
        .collect();
    let twist = if stance.len() >= config.min_stance_legs {
        let pairs: Vec<_> = stance
            .iter()
            .map(|&i| (legs[i].foot.translation, legs[i].foot_velocity))
            .collect();
        body_twist_ls(&pairs).ok()
    } else {
        None
    };
    let twist_range = MeasurementLayout::VELOCITY..MeasurementLayout::ANGULAR_VELOCITY + 3;
    match &twist {
        Some(t) => {
            let q = state.orientation.normalize();
            let w: T = lit(config.kinematic_omega_weight);
            let gyro = frame.gyro - state.gyro_bias;
            observed
                .fixed_rows_mut::<3>(MeasurementLayout::VELOCITY)
                .copy_from(&q.rotate_unchecked(&t.linear));
            observed
                .fixed_rows_mut::<3>(MeasurementLayout::ANGULAR_VELOCITY)
                .copy_from(&(t.angular * w + gyro * (T::one() - w)));
        }
        None => gate.set_range(twist_range, false),
    }

    for (i, leg) in legs.iter().enumerate() {
        observed
            .fixed_rows_mut::<3>(layout.kinematics(i))
            .copy_from(&(-leg.foot.translation));
        match leg.contact {
            Some(c) => observed[layout.contact(i)] = c,
            None => gate.0[layout.contact(i)] = false,
        }
    }

    if config.gates_forced_off {
        gate = GateMask::none(layout.dim());
    }

    Ok(Measurement {
        observed,
        gate,
        contacts,
        stance,
        twist,
        legs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::JointReading;

    fn model() -> RobotModel<f64> {
        RobotModel::reference_hexapod()
    }

    // Crouched pose: coxa 0, femur lifted, tibia folded down.
    fn frame(torque: f64) -> SensorFrame<f64> {
        let leg = vec![
            JointReading {
                angle: 0.0,
                velocity: 0.0,
                torque: 0.0,
            },
            JointReading {
                angle: -0.3,
                velocity: 0.0,
                torque,
            },
            JointReading {
                angle: 1.4,
                velocity: 0.0,
                torque: -torque * 0.5,
            },
        ];
        SensorFrame {
            timestamp: 0.0,
            legs: vec![leg; 6],
            gyro: Vec3::zeros(),
            accel: Vec3::new(0.0, 0.0, 9.81),
        }
    }

    fn calib() -> Vec<ContactCalibration> {
        vec![ContactCalibration::new(20.0, 0.0).unwrap(); 6]
    }

    fn state() -> RobotState<f64> {
        RobotState::at_rest(vec![Vec3::zeros(); 6], vec![1.0; 6])
    }

    #[test]
    fn all_loaded_opens_gravity_gate() {
        let cfg = FilterConfig::default();
        let m = build_measurement(&frame(10.0), None, &state(), &model(), &calib(), &cfg).unwrap();
        assert!(m.gate.0[0..3].iter().all(|g| *g));
        assert_eq!(m.stance.len(), 6);
        assert_eq!(
            m.observed.fixed_rows::<3>(0).into_owned(),
            Vec3::new(0.0, 0.0, -9.81)
        );
        // Static legs: zero twist.
        assert!(m.observed.rows(3, 6).amax() < 1e-10);
    }

    #[test]
    fn swinging_leg_closes_gravity_gate_and_leaves_stack() {
        let cfg = FilterConfig::default();
        let mut f = frame(10.0);
        for r in &mut f.legs[3] {
            r.torque = 0.0;
        }
        let m = build_measurement(&f, None, &state(), &model(), &calib(), &cfg).unwrap();
        assert!(m.gate.0[0..3].iter().all(|g| !*g));
        assert!(!m.stance.contains(&3));
        assert_eq!(m.stance.len(), 5);
        assert!(m.gate.0[3..9].iter().all(|g| *g));
    }

    #[test]
    fn accel_is_averaged_with_previous_sample() {
        let cfg = FilterConfig::default();
        let mut prev = frame(10.0);
        prev.accel = Vec3::new(1.0, 0.0, 9.0);
        let mut cur = frame(10.0);
        cur.accel = Vec3::new(0.0, 1.0, 10.0);
        let m = build_measurement(&cur, Some(&prev), &state(), &model(), &calib(), &cfg).unwrap();
        assert_eq!(
            m.observed.fixed_rows::<3>(0).into_owned(),
            Vec3::new(-0.5, -0.5, -9.5)
        );
    }

    #[test]
    fn kinematic_block_is_negated_foot_offset() {
        let cfg = FilterConfig::default();
        let md = model();
        let f = frame(10.0);
        let m = build_measurement(&f, None, &state(), &md, &calib(), &cfg).unwrap();
        let l = MeasurementLayout::new(6);
        for i in 0..6 {
            let t = md.legs[i]
                .forward_kinematics(&[0.0, -0.3, 1.4])
                .unwrap()
                .translation;
            assert_eq!(m.observed.fixed_rows::<3>(l.kinematics(i)).into_owned(), -t);
        }
    }

    #[test]
    fn too_few_stance_legs_closes_twist() {
        let cfg = FilterConfig::default();
        let mut f = frame(10.0);
        for leg in &mut f.legs[1..] {
            for r in leg {
                r.torque = 0.0;
            }
        }
        let m = build_measurement(&f, None, &state(), &model(), &calib(), &cfg).unwrap();
        assert!(m.twist.is_none());
        assert!(m.gate.0[3..9].iter().all(|g| !*g));
    }

    #[test]
    fn mismatched_frame_is_rejected() {
        let cfg = FilterConfig::default();
        let mut f = frame(10.0);
        f.legs.pop();
        assert!(matches!(
            build_measurement(&f, None, &state(), &model(), &calib(), &cfg),
            Err(Error::FrameMismatch(_))
        ));
        let mut f = frame(10.0);
        f.legs[2].pop();
        assert!(matches!(
            build_measurement(&f, None, &state(), &model(), &calib(), &cfg),
            Err(Error::FrameMismatch(_))
        ));
    }

    #[test]
    fn forced_off_closes_everything() {
        let cfg = FilterConfig {
            gates_forced_off: true,
            ..FilterConfig::default()
        };
        let m = build_measurement(&frame(10.0), None, &state(), &model(), &calib(), &cfg).unwrap();
        assert!(m.gate.0.iter().all(|g| !*g));
    }
}
