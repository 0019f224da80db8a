//! Sensor corruption: white noise, bias random walks and touchdown shocks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::SensorFrame;
use crate::spatial::Vec3;

/// Decaying oscillation added to the accelerometer at each touchdown:
/// `A · exp(−Δ/τ) · cos(2πfΔ)` along a random direction in the body x–z plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImpactSpec {
    /// m/s².
    pub amplitude: f64,
    /// Hz.
    pub frequency: f64,
    /// Seconds.
    pub decay: f64,
}

impl Default for ImpactSpec {
    fn default() -> Self {
        Self {
            amplitude: 3.0,
            frequency: 15.0,
            decay: 0.1,
        }
    }
}

/// Sensor noise model. Densities are per √Hz; per-sample standard
/// deviations are `density / √dt`. Bias walks are in unit/√s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSpec {
    pub gyro_density: f64,
    pub accel_density: f64,
    pub gyro_bias_walk: f64,
    pub accel_bias_walk: f64,
    /// rad.
    pub encoder_std: f64,
    /// rad/s.
    pub joint_velocity_std: f64,
    /// N·m.
    pub torque_std: f64,
    pub impact: ImpactSpec,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            gyro_density: 0.003,
            accel_density: 0.03,
            gyro_bias_walk: 1e-4,
            accel_bias_walk: 1e-3,
            encoder_std: 5e-4,
            joint_velocity_std: 0.01,
            torque_std: 0.05,
            impact: ImpactSpec::default(),
        }
    }
}

impl NoiseSpec {
    /// No corruption at all.
    pub fn zero() -> Self {
        Self {
            gyro_density: 0.0,
            accel_density: 0.0,
            gyro_bias_walk: 0.0,
            accel_bias_walk: 0.0,
            encoder_std: 0.0,
            joint_velocity_std: 0.0,
            torque_std: 0.0,
            impact: ImpactSpec {
                amplitude: 0.0,
                ..ImpactSpec::default()
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let i = &self.impact;
        let all = [
            self.gyro_density,
            self.accel_density,
            self.gyro_bias_walk,
            self.accel_bias_walk,
            self.encoder_std,
            self.joint_velocity_std,
            self.torque_std,
            i.amplitude,
            i.frequency,
        ];
        if all.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::Config(
                "noise parameters must be non-negative".into(),
            ));
        }
        if i.amplitude > 0.0 && !(i.decay > 0.0) {
            return Err(Error::Config("impact decay must be positive".into()));
        }
        Ok(())
    }
}

/// Stream ids keep the white-noise and impact draws independent.
pub(crate) const WHITE_STREAM: u64 = 0;
pub(crate) const IMPACT_STREAM: u64 = 1;

pub(crate) fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

fn gauss(rng: &mut ChaCha8Rng, std: f64) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    z * std
}

fn gauss3(rng: &mut ChaCha8Rng, std: f64) -> Vec3<f64> {
    Vec3::new(gauss(rng, std), gauss(rng, std), gauss(rng, std))
}

/// Adds white noise and bias walks in place. `dt` is the frame period.
pub(crate) fn corrupt(frames: &mut [SensorFrame<f64>], noise: &NoiseSpec, dt: f64, seed: u64) {
    let mut rng = rng(seed, WHITE_STREAM);
    let mut gyro_bias = Vec3::zeros();
    let mut accel_bias = Vec3::zeros();
    let gyro_std = noise.gyro_density / dt.sqrt();
    let accel_std = noise.accel_density / dt.sqrt();
    for f in frames {
        gyro_bias += gauss3(&mut rng, noise.gyro_bias_walk * dt.sqrt());
        accel_bias += gauss3(&mut rng, noise.accel_bias_walk * dt.sqrt());
        f.gyro += gyro_bias + gauss3(&mut rng, gyro_std);
        f.accel += accel_bias + gauss3(&mut rng, accel_std);
        for leg in &mut f.legs {
            for j in leg {
                j.angle += gauss(&mut rng, noise.encoder_std);
                j.velocity += gauss(&mut rng, noise.joint_velocity_std);
                j.torque += gauss(&mut rng, noise.torque_std);
            }
        }
    }
}

/// Adds a shock burst to the accelerometer of every frame at or after each
/// touchdown time. Bursts are truncated after ten decay constants.
pub fn inject_impact_noise(
    frames: &mut [SensorFrame<f64>],
    touchdowns: &[f64],
    noise: &NoiseSpec,
    seed: u64,
) {
    let spec = noise.impact;
    if spec.amplitude == 0.0 || touchdowns.is_empty() {
        return;
    }
    let mut rng = rng(seed, IMPACT_STREAM);
    let angle = Uniform::new(0.0, std::f64::consts::TAU).expect("valid range");
    let horizon = 10.0 * spec.decay;
    for &t0 in touchdowns {
        let psi = angle.sample(&mut rng);
        let dir = Vec3::new(psi.cos(), 0.0, psi.sin());
        let first = frames.partition_point(|f| f.timestamp < t0);
        for f in frames[first..].iter_mut() {
            let d = f.timestamp - t0;
            if d > horizon {
                break;
            }
            let s = spec.amplitude
                * (-d / spec.decay).exp()
                * (std::f64::consts::TAU * spec.frequency * d).cos();
            f.accel += dir * s;
        }
    }
}
