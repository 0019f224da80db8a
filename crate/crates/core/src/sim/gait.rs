//! Wave-gait timing, foothold selection and swing trajectories.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::terrain::{smootherstep, TerrainProfile};
use crate::spatial::Vec3;

/// Gait parameters. Leg `i` lifts off at `cycle_time · (k + phase_offsets[i])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaitParams {
    pub phase_offsets: Vec<f64>,
    /// Fraction of a cycle each leg spends in the air.
    pub swing_fraction: f64,
    /// Apex of the swing arc above the straight line between footholds, m.
    pub step_height: f64,
    pub cycle_time: f64,
    pub body_speed: f64,
}

impl Default for GaitParams {
    /// Wave gait for the reference hexapod, swinging rear to front on the
    /// left, then on the right.
    fn default() -> Self {
        Self {
            phase_offsets: vec![2.0 / 6.0, 1.0 / 6.0, 0.0, 5.0 / 6.0, 4.0 / 6.0, 3.0 / 6.0],
            swing_fraction: 0.1,
            step_height: 0.08,
            cycle_time: 1.2,
            body_speed: 0.1,
        }
    }
}

impl GaitParams {
    /// Wave gait over `n` legs in index order.
    pub fn wave(n: usize) -> Self {
        Self {
            phase_offsets: (0..n).map(|i| i as f64 / n as f64).collect(),
            ..Self::default()
        }
    }

    /// Distance the body covers per cycle at cruise speed.
    pub fn step_length(&self) -> f64 {
        self.body_speed * self.cycle_time
    }

    pub fn swing_time(&self) -> f64 {
        self.swing_fraction * self.cycle_time
    }

    pub fn validate(&self, legs: usize) -> Result<()> {
        if self.phase_offsets.len() != legs {
            return Err(Error::Config(format!(
                "gait has {} phase offsets for {legs} legs",
                self.phase_offsets.len()
            )));
        }
        if !(self.cycle_time > 0.0) || !(self.body_speed >= 0.0) || !(self.step_height >= 0.0) {
            return Err(Error::Config(
                "gait times, speed and height must be non-negative".into(),
            ));
        }
        if !(self.swing_fraction > 0.0 && self.swing_fraction < 1.0) {
            return Err(Error::Config("swing_fraction must lie in (0, 1)".into()));
        }
        let mut phases: Vec<f64> = self
            .phase_offsets
            .iter()
            .map(|p| p.rem_euclid(1.0))
            .collect();
        phases.sort_by(|a, b| a.total_cmp(b));
        for (i, p) in phases.iter().enumerate() {
            let next = if i + 1 < phases.len() {
                phases[i + 1]
            } else {
                phases[0] + 1.0
            };
            if next - p < self.swing_fraction - 1e-12 {
                return Err(Error::Config("swing windows of two legs overlap".into()));
            }
        }
        Ok(())
    }
}

/// One swing of one leg.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Swing {
    pub lift_off: f64,
    pub touchdown: f64,
    pub from: Vec3<f64>,
    pub to: Vec3<f64>,
    pub height: f64,
}

impl Swing {
    /// Quintic blend between footholds plus a `64u³(1−u)³` lift.
    pub fn position(&self, t: f64) -> Vec3<f64> {
        let u = ((t - self.lift_off) / (self.touchdown - self.lift_off)).clamp(0.0, 1.0);
        let s = smootherstep(u)[0];
        let bump = 64.0 * (u * (1.0 - u)).powi(3);
        self.from + (self.to - self.from) * s + Vec3::new(0.0, 0.0, self.height * bump)
    }
}

/// Footholds and swings of every leg over a run.
#[derive(Debug, Clone, PartialEq)]
pub struct FootSchedule {
    pub initial: Vec<Vec3<f64>>,
    pub swings: Vec<Vec<Swing>>,
}

impl FootSchedule {
    /// World foot position and whether it is in stance.
    pub fn foot(&self, leg: usize, t: f64) -> (Vec3<f64>, bool) {
        let mut last = self.initial[leg];
        for s in &self.swings[leg] {
            if t < s.lift_off {
                break;
            }
            if t < s.touchdown {
                return (s.position(t), false);
            }
            last = s.to;
        }
        (last, true)
    }

    /// `(time, leg)` of every touchdown, sorted by time.
    pub fn touchdowns(&self) -> Vec<(f64, usize)> {
        let mut ev: Vec<(f64, usize)> = self
            .swings
            .iter()
            .enumerate()
            .flat_map(|(leg, s)| s.iter().map(move |w| (w.touchdown, leg)))
            .collect();
        ev.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        ev
    }
}

/// Stair footholds closer than this to a riser move onto the upper tread.
pub const RISER_MARGIN: f64 = 0.06;

/// Projects a nominal foothold onto the terrain surface.
pub fn place_on_ground(terrain: &TerrainProfile, ground: f64, p: Vec3<f64>) -> Vec3<f64> {
    let mut x = p.x;
    for r in terrain.risers() {
        if (x - r).abs() < RISER_MARGIN {
            x = r + RISER_MARGIN;
        }
    }
    Vec3::new(x, p.y, ground + terrain.height(x))
}

/// Plans swings so every touchdown lands where the nominal stance offset
/// would put the foot at mid-stance. `nominal_world(leg, t)` gives that
/// offset applied to the body pose at `t`. Swings shorter than a micron are
/// skipped.
pub fn plan<F>(
    gait: &GaitParams,
    terrain: &TerrainProfile,
    ground: f64,
    duration: f64,
    legs: usize,
    nominal_world: F,
) -> FootSchedule
where
    F: Fn(usize, f64) -> Vec3<f64>,
{
    let ts = gait.swing_time();
    let stance_mid = (gait.cycle_time - ts) * 0.5;
    let mut initial = Vec::with_capacity(legs);
    let mut swings = Vec::with_capacity(legs);
    for leg in 0..legs {
        let start = place_on_ground(terrain, ground, nominal_world(leg, 0.0));
        let mut current = start;
        let mut list = Vec::new();
        let mut k = 0usize;
        loop {
            let lift_off = gait.cycle_time * (k as f64 + gait.phase_offsets[leg].rem_euclid(1.0));
            k += 1;
            if lift_off <= 0.0 {
                continue;
            }
            let touchdown = lift_off + ts;
            if touchdown > duration {
                break;
            }
            let target =
                place_on_ground(terrain, ground, nominal_world(leg, touchdown + stance_mid));
            if (target - current).norm() < 1e-6 {
                continue;
            }
            list.push(Swing {
                lift_off,
                touchdown,
                from: current,
                to: target,
                height: gait.step_height,
            });
            current = target;
        }
        initial.push(start);
        swings.push(list);
    }
    FootSchedule { initial, swings }
}
