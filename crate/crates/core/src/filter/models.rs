//! Process model, measurement model and the helpers that feed them.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::filter::config::{ContactCalibration, ContactModel, FilterConfig};
use crate::filter::state::{MeasurementLayout, RobotState, StateLayout};
use crate::scalar::{lit, Real};
use crate::spatial::{quat_integrate, skew, Vec3};

/// Constant-velocity prediction. Feet move by their supplied world-frame
/// velocity only while their contact probability is below `swing_threshold`;
/// stance feet stay put.
pub fn process_model<T: Real>(
    state: &RobotState<T>,
    foot_vel_world: &[Vec3<T>],
    dt: T,
    swing_threshold: T,
) -> RobotState<T> {
    let mut next = state.clone();
    next.position = state.position + state.velocity * dt;
    if dt > T::zero() {
        next.orientation = quat_integrate(
            &state.orientation,
            &(state.angular_velocity - state.gyro_bias),
            dt,
        );
    }
    for ((foot, c), vel) in next.feet.iter_mut().zip(&state.contact).zip(foot_vel_world) {
        if *c < swing_threshold {
            *foot += vel * dt;
        }
    }
    next
}

/// `h(x) = [qᵀg + bᵃ, v, ω, qᵀ(r − pⁱ), cⁱ]`.
pub fn measurement_model<T: Real>(state: &RobotState<T>, gravity: &Vec3<T>) -> DVector<T> {
    let layout = MeasurementLayout::new(state.legs());
    let inv = state.orientation.normalize().conjugate();
    let mut z = DVector::zeros(layout.dim());
    z.fixed_rows_mut::<3>(MeasurementLayout::GRAVITY)
        .copy_from(&(inv.rotate_unchecked(gravity) + state.accel_bias));
    z.fixed_rows_mut::<3>(MeasurementLayout::VELOCITY)
        .copy_from(&state.velocity);
    z.fixed_rows_mut::<3>(MeasurementLayout::ANGULAR_VELOCITY)
        .copy_from(&state.angular_velocity);
    for (i, foot) in state.feet.iter().enumerate() {
        z.fixed_rows_mut::<3>(layout.kinematics(i))
            .copy_from(&inv.rotate_unchecked(&(state.position - foot)));
        z[layout.contact(i)] = state.contact[i];
    }
    z
}

/// Body twist recovered from stance-foot kinematics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BodyTwist<T: Real> {
    /// Linear velocity in the CoM frame.
    pub linear: Vec3<T>,
    /// Angular velocity in the CoM frame.
    pub angular: Vec3<T>,
    /// Norm of the least-squares residual.
    pub residual: T,
}

/// Solves `[I, −⌊r⌋×] [v; ω] = −ṗ` stacked over stance feet, where `r` is the
/// CoM-to-foot offset and `ṗ` the foot velocity relative to the CoM, both in
/// the CoM frame.
///
/// Needs at least two feet and a full-rank stack (feet not all collinear
/// with the CoM motion); otherwise returns [`Error::InsufficientSupport`].
pub fn body_twist_ls<T: Real>(stance: &[(Vec3<T>, Vec3<T>)]) -> Result<BodyTwist<T>> {
    const REQUIRED: usize = 2;
    if stance.len() < REQUIRED {
        return Err(Error::InsufficientSupport {
            stance: stance.len(),
            required: REQUIRED,
        });
    }
    let m = stance.len();
    let mut a = DMatrix::zeros(3 * m, 6);
    let mut b = DVector::zeros(3 * m);
    for (k, (r, pdot)) in stance.iter().enumerate() {
        let row = 3 * k;
        a.fixed_view_mut::<3, 3>(row, 0).fill_with_identity();
        a.fixed_view_mut::<3, 3>(row, 3).copy_from(&(-skew(r)));
        b.fixed_rows_mut::<3>(row).copy_from(&(-pdot));
    }
    let sv = a.singular_values();
    let smax = sv.max();
    let smin = sv.min();
    if !(smax > T::zero()) || smin / smax < lit(1e-9) {
        return Err(Error::InsufficientSupport {
            stance: m,
            required: REQUIRED,
        });
    }
    // Full column rank, so the QR solution is the unique minimizer.
    let qr = a.clone().qr();
    let qtb = qr.q().transpose() * &b;
    let x = qr
        .r()
        .solve_upper_triangular(&qtb)
        .ok_or(Error::InsufficientSupport {
            stance: m,
            required: REQUIRED,
        })?;
    let residual = (&a * &x - &b).norm();
    Ok(BodyTwist {
        linear: Vec3::new(x[0], x[1], x[2]),
        angular: Vec3::new(x[3], x[4], x[5]),
        residual,
    })
}

/// Contact probability from a foot force, clamped to `[0, 1]`.
pub fn contact_probability<T: Real>(
    force: &Vec3<T>,
    calib: &ContactCalibration,
    model: ContactModel,
) -> T {
    let span: T = lit(calib.f_max - calib.f_min);
    let magnitude = force.norm();
    let p = match model {
        ContactModel::Literal => magnitude / span,
        ContactModel::Affine => (magnitude - lit(calib.f_min)) / span,
    };
    p.clamp(T::zero(), T::one())
}

/// Diagonal process-noise factor for one step of length `dt`, with per-foot
/// entries scaled down for confident stance and up for swing.
pub fn adapt_process_noise<T: Real>(config: &FilterConfig, contact: &[T], dt: T) -> DMatrix<T> {
    let layout = StateLayout::new(contact.len());
    let p = &config.process_noise;
    let mut diag = vec![0.0f64; layout.dim()];
    let mut fill = |start: usize, len: usize, v: f64| {
        for d in &mut diag[start..start + len] {
            *d = v;
        }
    };
    fill(StateLayout::POSITION, 3, p.position);
    fill(StateLayout::VELOCITY, 3, p.velocity);
    fill(StateLayout::ORIENTATION, 4, p.orientation);
    fill(StateLayout::ANGULAR_VELOCITY, 3, p.angular_velocity);
    fill(StateLayout::GYRO_BIAS, 3, p.gyro_bias);
    fill(StateLayout::ACCEL_BIAS, 3, p.accel_bias);
    let stance: T = lit(config.all_contact_threshold);
    let swing: T = lit(config.swing_threshold);
    for (i, c) in contact.iter().enumerate() {
        let scale = if *c >= stance {
            config.factor_scale(config.stance_q_scale)
        } else if *c < swing {
            config.factor_scale(config.swing_q_scale)
        } else {
            1.0
        };
        fill(layout.foot(i), 3, p.foot * scale);
        fill(layout.contact(i), 1, p.contact);
    }
    let sqrt_dt = dt.max(T::zero()).sqrt();
    DMatrix::from_diagonal(&DVector::from_iterator(
        diag.len(),
        diag.into_iter().map(|d| lit::<T>(d) * sqrt_dt),
    ))
}

/// Diagonal measurement-noise factor.
pub fn measurement_noise<T: Real>(config: &FilterConfig, legs: usize) -> DMatrix<T> {
    let layout = MeasurementLayout::new(legs);
    let m = &config.measurement_noise;
    let mut diag = DVector::zeros(layout.dim());
    for k in 0..3 {
        diag[MeasurementLayout::GRAVITY + k] = lit(m.gravity);
        diag[MeasurementLayout::VELOCITY + k] = lit(m.velocity);
        diag[MeasurementLayout::ANGULAR_VELOCITY + k] = lit(m.angular_velocity);
    }
    for i in 0..legs {
        for k in 0..3 {
            diag[layout.kinematics(i) + k] = lit(m.kinematics);
        }
        diag[layout.contact(i)] = lit(m.contact);
    }
    DMatrix::from_diagonal(&diag)
}
