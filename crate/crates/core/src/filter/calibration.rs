//! Offline contact-force calibration from a labelled walk.

use crate::error::{Error, Result};
use crate::filter::config::ContactCalibration;
use crate::filter::measurement::SensorFrame;
use crate::kinematics::split_readings;
use crate::model::RobotModel;
use crate::scalar::{to_f64, Real};

pub const UPPER_PERCENTILE: f64 = 95.0;
pub const LOWER_PERCENTILE: f64 = 5.0;

/// Linear-interpolated percentile of sorted data, `p` in `[0, 100]`.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    let pos = (sorted.len() - 1) as f64 * p / 100.0;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Per-leg `f_max`/`f_min` as the 95th/5th percentiles of foot-force
/// magnitude over frames labelled as stance. Singular poses are skipped.
pub fn calibrate_contact<T: Real>(
    model: &RobotModel<T>,
    frames: &[SensorFrame<T>],
    stance: &[Vec<bool>],
) -> Result<Vec<ContactCalibration>> {
    if frames.len() != stance.len() {
        return Err(Error::Config(format!(
            "{} frames but {} contact labels",
            frames.len(),
            stance.len()
        )));
    }
    let n = model.leg_count();
    let mut forces = vec![Vec::new(); n];
    for (frame, labels) in frames.iter().zip(stance) {
        frame.check(model)?;
        if labels.len() != n {
            return Err(Error::FrameMismatch(format!(
                "{} contact labels for {n} legs",
                labels.len()
            )));
        }
        for (i, chain) in model.legs.iter().enumerate() {
            if !labels[i] {
                continue;
            }
            let (angles, _, torques) = split_readings(&frame.legs[i]);
            if let Ok(f) = chain.foot_force(&angles, &torques) {
                forces[i].push(to_f64(f.norm()));
            }
        }
    }
    forces
        .into_iter()
        .enumerate()
        .map(|(i, mut f)| {
            if f.len() < 2 {
                return Err(Error::Config(format!(
                    "leg {i} has no stance samples to calibrate"
                )));
            }
            f.sort_by(|a, b| a.total_cmp(b));
            ContactCalibration::new(
                percentile(&f, UPPER_PERCENTILE),
                percentile(&f, LOWER_PERCENTILE),
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percentile_interpolates() {
        let d: Vec<f64> = (0..=100).map(f64::from).collect();
        assert_eq!(percentile(&d, 95.0), 95.0);
        assert_eq!(percentile(&d, 5.0), 5.0);
        assert_eq!(percentile(&[1.0, 2.0], 50.0), 1.5);
    }

    #[test]
    fn mismatched_labels_are_rejected() {
        let m = RobotModel::reference_hexapod();
        assert!(calibrate_contact(&m, &[], &[vec![true; 6]]).is_err());
    }
}
