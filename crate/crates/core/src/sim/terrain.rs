//! Terrain height profiles and the commanded body path.
//!
//! Terrain varies along world x only. The body rides a smoothed copy of the
//! surface: the raw height convolved with a kernel whose CDF is the
//! smootherstep polynomial, so body height and pitch are C².

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Flat run-up before a ramp or the first stair riser, and after the top.
pub const APPROACH: f64 = 0.6;
/// Half-width of the smoothing kernel, metres.
pub const SMOOTHING: f64 = 0.6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TerrainKind {
    Flat,
    Ramp { angle_deg: f64 },
    Stairs { step_width: f64, step_height: f64 },
}

/// Terrain plus the extent of the walk over it.
///
/// `extent` is the perimeter of the square walked on flat ground and the
/// horizontal length of the inclined or stepped section otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TerrainProfile {
    pub kind: TerrainKind,
    pub extent: f64,
}

impl TerrainProfile {
    /// 6 m square.
    pub fn flat() -> Self {
        Self {
            kind: TerrainKind::Flat,
            extent: 6.0,
        }
    }

    pub fn ramp(angle_deg: f64) -> Self {
        Self {
            kind: TerrainKind::Ramp { angle_deg },
            extent: 3.0,
        }
    }

    pub fn stairs(step_width: f64, step_height: f64) -> Self {
        Self {
            kind: TerrainKind::Stairs {
                step_width,
                step_height,
            },
            extent: 3.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.extent > 0.0) {
            return Err(Error::Config("terrain extent must be positive".into()));
        }
        match self.kind {
            TerrainKind::Flat => {}
            TerrainKind::Ramp { angle_deg } => {
                if !(angle_deg > 0.0 && angle_deg < 45.0) {
                    return Err(Error::Config(
                        "ramp angle must lie in (0, 45) degrees".into(),
                    ));
                }
            }
            TerrainKind::Stairs {
                step_width,
                step_height,
            } => {
                if !(step_width > 0.0 && step_height > 0.0) {
                    return Err(Error::Config("stair dimensions must be positive".into()));
                }
            }
        }
        Ok(())
    }

    /// Stair riser positions along x.
    pub fn risers(&self) -> Vec<f64> {
        match self.kind {
            TerrainKind::Stairs { step_width, .. } => {
                let n = (self.extent / step_width).round().max(1.0) as usize;
                (0..n).map(|k| APPROACH + k as f64 * step_width).collect()
            }
            _ => Vec::new(),
        }
    }

    /// Raw surface height relative to the starting ground level.
    pub fn height(&self, x: f64) -> f64 {
        match self.kind {
            TerrainKind::Flat => 0.0,
            TerrainKind::Ramp { angle_deg } => {
                angle_deg.to_radians().tan() * (x - APPROACH).clamp(0.0, self.extent)
            }
            TerrainKind::Stairs { step_height, .. } => {
                step_height * self.risers().iter().filter(|&&r| x >= r).count() as f64
            }
        }
    }

    /// Smoothed height and its first two derivatives.
    pub fn smoothed(&self, x: f64) -> [f64; 3] {
        let w = SMOOTHING;
        match self.kind {
            TerrainKind::Flat => [0.0; 3],
            TerrainKind::Ramp { angle_deg } => {
                let slope = angle_deg.to_radians().tan();
                let a = ramp_kernel(x - APPROACH, w);
                let b = ramp_kernel(x - APPROACH - self.extent, w);
                [
                    slope * (a[0] - b[0]),
                    slope * (a[1] - b[1]),
                    slope * (a[2] - b[2]),
                ]
            }
            TerrainKind::Stairs { step_height, .. } => {
                let mut h = [0.0; 3];
                for r in self.risers() {
                    let s = step_kernel(x - r, w);
                    for k in 0..3 {
                        h[k] += step_height * s[k];
                    }
                }
                h
            }
        }
    }

    /// Total horizontal distance walked.
    pub fn path_length(&self) -> f64 {
        match self.kind {
            TerrainKind::Flat => self.extent,
            _ => self.extent + 2.0 * APPROACH,
        }
    }
}

/// `6u⁵ − 15u⁴ + 10u³` clamped to `[0, 1]`, with derivatives.
pub fn smootherstep(u: f64) -> [f64; 3] {
    if u <= 0.0 {
        [0.0; 3]
    } else if u >= 1.0 {
        [1.0, 0.0, 0.0]
    } else {
        let u2 = u * u;
        [
            u2 * u * (10.0 + u * (-15.0 + 6.0 * u)),
            30.0 * u2 * (1.0 - u) * (1.0 - u),
            60.0 * u * (1.0 - u) * (1.0 - 2.0 * u),
        ]
    }
}

/// Integral of [`smootherstep`] from 0.
fn smootherstep_integral(u: f64) -> f64 {
    if u <= 0.0 {
        0.0
    } else if u >= 1.0 {
        u - 0.5
    } else {
        u * u * u * u * (2.5 + u * (-3.0 + u))
    }
}

/// Unit step at 0 smoothed over `[−w, w]`, with x-derivatives.
fn step_kernel(x: f64, w: f64) -> [f64; 3] {
    let s = smootherstep((x + w) / (2.0 * w));
    [s[0], s[1] / (2.0 * w), s[2] / (4.0 * w * w)]
}

/// `max(x, 0)` smoothed over `[−w, w]`, with x-derivatives.
fn ramp_kernel(x: f64, w: f64) -> [f64; 3] {
    let u = (x + w) / (2.0 * w);
    let s = step_kernel(x, w);
    [2.0 * w * smootherstep_integral(u), s[0], s[1]]
}

/// Straight leg of the commanded path with a smooth speed profile.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Segment {
    start: [f64; 2],
    dir: [f64; 2],
    length: f64,
    t0: f64,
    duration: f64,
    ramp_time: f64,
    speed: f64,
}

impl Segment {
    fn new(start: [f64; 2], end: [f64; 2], t0: f64, speed: f64, ramp_time: f64) -> Self {
        let d = [end[0] - start[0], end[1] - start[1]];
        let length = d[0].hypot(d[1]);
        let ramp_time = ramp_time.min(length / speed);
        Self {
            start,
            dir: [d[0] / length, d[1] / length],
            length,
            t0,
            duration: length / speed + ramp_time,
            ramp_time,
            speed,
        }
    }

    fn distance(&self, t: f64) -> f64 {
        let tau = (t - self.t0).clamp(0.0, self.duration);
        let (v, ta) = (self.speed, self.ramp_time);
        if tau < ta {
            v * ta * smootherstep_integral(tau / ta)
        } else if tau <= self.duration - ta {
            v * ta * 0.5 + v * (tau - ta)
        } else {
            self.length - v * ta * smootherstep_integral((self.duration - tau) / ta)
        }
    }

    fn point(&self, t: f64) -> [f64; 2] {
        let s = self.distance(t);
        [
            self.start[0] + self.dir[0] * s,
            self.start[1] + self.dir[1] * s,
        ]
    }
}

/// Horizontal body path: a standing pause, then straight segments that each
/// start and stop at rest. Heading stays fixed.
#[derive(Debug, Clone, PartialEq)]
pub struct BodyPath {
    segments: Vec<Segment>,
    end: f64,
}

/// Time to reach cruise speed at the start of each segment.
pub const RAMP_TIME: f64 = 1.0;
/// Standing time before the first segment.
pub const SETTLE_TIME: f64 = 1.0;

impl BodyPath {
    pub fn new(terrain: &TerrainProfile, speed: f64) -> Self {
        if !(speed > 0.0) {
            return Self {
                segments: Vec::new(),
                end: SETTLE_TIME,
            };
        }
        let corners: Vec<[f64; 2]> = match terrain.kind {
            TerrainKind::Flat => {
                let s = terrain.extent / 4.0;
                vec![[0.0, 0.0], [s, 0.0], [s, s], [0.0, s], [0.0, 0.0]]
            }
            _ => vec![[0.0, 0.0], [terrain.path_length(), 0.0]],
        };
        let mut t = SETTLE_TIME;
        let mut segments = Vec::new();
        for w in corners.windows(2) {
            let seg = Segment::new(w[0], w[1], t, speed, RAMP_TIME);
            t += seg.duration;
            segments.push(seg);
        }
        Self { segments, end: t }
    }

    /// Time at which the body comes to rest at the end of the path.
    pub fn end_time(&self) -> f64 {
        self.end
    }

    pub fn point(&self, t: f64) -> [f64; 2] {
        match self.segments.iter().find(|s| t < s.t0 + s.duration) {
            Some(s) => s.point(t),
            None => match self.segments.last() {
                Some(s) => s.point(s.t0 + s.duration),
                None => [0.0, 0.0],
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smoothed_height_matches_numerical_convolution() {
        for terrain in [
            TerrainProfile::ramp(16.35),
            TerrainProfile::stairs(0.6, 0.15),
        ] {
            for k in 0..80 {
                let x = -0.5 + k as f64 * 0.06;
                // Midpoint rule against the kernel density.
                let n = 4000;
                let mut acc = 0.0;
                for j in 0..n {
                    let u = (j as f64 + 0.5) / n as f64;
                    let s = -SMOOTHING + 2.0 * SMOOTHING * u;
                    acc += terrain.height(x - s) * smootherstep(u)[1] / n as f64;
                }
                let h = terrain.smoothed(x);
                assert!((h[0] - acc).abs() < 1e-4, "{x}: {} vs {acc}", h[0]);
            }
        }
    }

    #[test]
    fn smoothed_derivatives_match_differences() {
        let terrain = TerrainProfile::stairs(0.6, 0.15);
        let e = 1e-5;
        for k in 0..200 {
            let x = k as f64 * 0.023;
            let h = terrain.smoothed(x);
            let (a, b) = (terrain.smoothed(x + e), terrain.smoothed(x - e));
            assert!(((a[0] - b[0]) / (2.0 * e) - h[1]).abs() < 1e-6);
            assert!(((a[1] - b[1]) / (2.0 * e) - h[2]).abs() < 1e-4);
        }
    }

    #[test]
    fn smoothed_ramp_reaches_full_rise() {
        let t = TerrainProfile::ramp(16.35);
        let top = 16.35f64.to_radians().tan() * 3.0;
        assert!((t.smoothed(10.0)[0] - top).abs() < 1e-12);
        assert!((t.smoothed(APPROACH + 1.5)[0] - t.height(APPROACH + 1.5)).abs() < 1e-12);
        assert_eq!(t.smoothed(0.0)[0], 0.0);
    }

    #[test]
    fn stairs_have_expected_risers() {
        let t = TerrainProfile::stairs(0.6, 0.15);
        assert_eq!(t.risers().len(), 5);
        assert!((t.height(10.0) - 0.75).abs() < 1e-12);
    }

    #[test]
    fn square_path_closes() {
        let path = BodyPath::new(&TerrainProfile::flat(), 0.1);
        let end = path.point(path.end_time() + 5.0);
        assert!(end[0].abs() < 1e-9 && end[1].abs() < 1e-9);
        let corner = path.point(SETTLE_TIME + 15.0 + RAMP_TIME);
        assert!((corner[0] - 1.5).abs() < 1e-12 && corner[1].abs() < 1e-12);
    }

    #[test]
    fn validation() {
        assert!(TerrainProfile::ramp(50.0).validate().is_err());
        assert!(TerrainProfile::stairs(0.0, 0.1).validate().is_err());
        TerrainProfile::ramp(16.35).validate().unwrap();
    }
}
