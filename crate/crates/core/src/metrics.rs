//! Drift metrics against a truth trajectory.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::TrajectoryPoint;
use crate::spatial::{Quaternion, Vec3};

/// Position error summary of one estimated trajectory.
///
/// `drift_percent` is the final position error divided by the distance
/// travelled along the truth trajectory (not the net displacement, which is
/// close to zero on a closed loop). It is NaN when the truth path has zero
/// length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftReport {
    pub final_error: [f64; 3],
    pub drift_percent: f64,
    pub path_length: f64,
    pub rmse: f64,
}

impl DriftReport {
    pub fn final_error_norm(&self) -> f64 {
        Vec3::from(self.final_error).norm()
    }
}

/// Truth position (lerp) and orientation (slerp) at `t`, or `None` outside
/// the sampled range. Samples must be time-ordered.
pub fn interpolate(truth: &[TrajectoryPoint], t: f64) -> Option<(Vec3<f64>, Quaternion<f64>)> {
    let first = truth.first()?;
    let last = truth.last()?;
    if t < first.timestamp || t > last.timestamp {
        return None;
    }
    let k = truth.partition_point(|p| p.timestamp <= t);
    if k == truth.len() {
        return Some((last.position, last.orientation));
    }
    let (a, b) = (&truth[k - 1], &truth[k]);
    if a.timestamp == t {
        return Some((a.position, a.orientation));
    }
    let u = (t - a.timestamp) / (b.timestamp - a.timestamp);
    Some((
        a.position + (b.position - a.position) * u,
        a.orientation.slerp(&b.orientation, u),
    ))
}

/// Length of the truth polyline restricted to `[t0, t1]`.
pub fn path_length(truth: &[TrajectoryPoint], t0: f64, t1: f64) -> f64 {
    let mut pts: Vec<Vec3<f64>> = Vec::new();
    if let Some((p, _)) = interpolate(truth, t0) {
        pts.push(p);
    }
    pts.extend(
        truth
            .iter()
            .filter(|p| p.timestamp > t0 && p.timestamp < t1)
            .map(|p| p.position),
    );
    if let Some((p, _)) = interpolate(truth, t1) {
        pts.push(p);
    }
    pts.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
}

/// Compares an estimate with truth over their common time range.
pub fn drift_report(
    estimate: &[TrajectoryPoint],
    truth: &[TrajectoryPoint],
) -> Result<DriftReport> {
    let (Some(e0), Some(e1), Some(g0), Some(g1)) = (
        estimate.first(),
        estimate.last(),
        truth.first(),
        truth.last(),
    ) else {
        return Err(Error::DisjointTimeRanges);
    };
    let t0 = e0.timestamp.max(g0.timestamp);
    let t1 = e1.timestamp.min(g1.timestamp);
    if t0 > t1 {
        return Err(Error::DisjointTimeRanges);
    }
    let mut sq = 0.0;
    let mut n = 0usize;
    let mut last = Vec3::zeros();
    for p in estimate
        .iter()
        .filter(|p| p.timestamp >= t0 && p.timestamp <= t1)
    {
        let (r, _) = interpolate(truth, p.timestamp).expect("inside truth range");
        last = p.position - r;
        sq += last.norm_squared();
        n += 1;
    }
    if n == 0 {
        return Err(Error::DisjointTimeRanges);
    }
    let path = path_length(truth, t0, t1);
    let drift = if path > 0.0 {
        100.0 * last.norm() / path
    } else {
        f64::NAN
    };
    Ok(DriftReport {
        final_error: [last.x, last.y, last.z],
        drift_percent: drift,
        path_length: path,
        rmse: (sq / n as f64).sqrt(),
    })
}

const COLUMNS: [&str; 8] = [
    "run",
    "final_error_x",
    "final_error_y",
    "final_error_z",
    "final_error",
    "drift_percent",
    "path_length",
    "rmse",
];

fn row(name: &str, r: &DriftReport) -> [String; 8] {
    [
        name.to_string(),
        r.final_error[0].to_string(),
        r.final_error[1].to_string(),
        r.final_error[2].to_string(),
        r.final_error_norm().to_string(),
        r.drift_percent.to_string(),
        r.path_length.to_string(),
        r.rmse.to_string(),
    ]
}

/// Machine-readable table, one row per run.
pub fn report_csv(runs: &[(String, DriftReport)]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(COLUMNS).expect("in-memory write");
    for (name, r) in runs {
        w.write_record(row(name, r)).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

/// Column-aligned table for terminals.
pub fn report_text(runs: &[(String, DriftReport)]) -> String {
    let cells: Vec<[String; 8]> = std::iter::once(COLUMNS.map(String::from))
        .chain(runs.iter().map(|(name, r)| {
            [
                name.clone(),
                format!("{:.4}", r.final_error[0]),
                format!("{:.4}", r.final_error[1]),
                format!("{:.4}", r.final_error[2]),
                format!("{:.4}", r.final_error_norm()),
                format!("{:.3}", r.drift_percent),
                format!("{:.3}", r.path_length),
                format!("{:.4}", r.rmse),
            ]
        }))
        .collect();
    let widths: Vec<usize> = (0..8)
        .map(|c| cells.iter().map(|r| r[c].len()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for r in &cells {
        let line: Vec<String> = r
            .iter()
            .enumerate()
            .map(|(c, s)| {
                if c == 0 {
                    format!("{:<w$}", s, w = widths[c])
                } else {
                    format!("{:>w$}", s, w = widths[c])
                }
            })
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn point(t: f64, p: Vec3<f64>) -> TrajectoryPoint {
        TrajectoryPoint {
            timestamp: t,
            position: p,
            orientation: Quaternion::identity(),
            velocity: Vec3::zeros(),
            feet: Vec::new(),
            contact: Vec::new(),
        }
    }

    fn line(n: usize, end: f64) -> Vec<TrajectoryPoint> {
        (0..=n)
            .map(|k| {
                let u = k as f64 / n as f64;
                point(u, Vec3::new(end * u, 0.0, 0.0))
            })
            .collect()
    }

    #[test]
    fn identical_trajectories_have_zero_drift() {
        let t = line(10, 1.0);
        let r = drift_report(&t, &t).unwrap();
        assert_eq!(r.drift_percent, 0.0);
        assert_eq!(r.rmse, 0.0);
        assert_eq!(r.final_error, [0.0; 3]);
    }

    #[test]
    fn two_centimetres_over_one_metre_is_two_percent() {
        let truth = line(10, 1.0);
        let est: Vec<_> = truth
            .iter()
            .map(|p| {
                point(
                    p.timestamp,
                    p.position + Vec3::new(0.0, 0.02 * p.timestamp, 0.0),
                )
            })
            .collect();
        let r = drift_report(&est, &truth).unwrap();
        assert!((r.path_length - 1.0).abs() < 1e-12);
        assert!((r.drift_percent - 2.0).abs() < 1e-12);
        assert!((r.final_error[1] - 0.02).abs() < 1e-15);
    }

    #[test]
    fn disjoint_ranges_are_rejected() {
        let a = line(10, 1.0);
        let b: Vec<_> = a
            .iter()
            .map(|p| point(p.timestamp + 2.0, p.position))
            .collect();
        assert!(matches!(
            drift_report(&a, &b),
            Err(Error::DisjointTimeRanges)
        ));
        assert!(matches!(
            drift_report(&[], &b),
            Err(Error::DisjointTimeRanges)
        ));
    }

    #[test]
    fn interpolation_lerps_and_slerps() {
        let mut a = point(0.0, Vec3::zeros());
        let mut b = point(1.0, Vec3::new(2.0, 0.0, 0.0));
        a.orientation = Quaternion::identity();
        b.orientation = Quaternion::from_axis_angle(&Vec3::z(), 1.0);
        let (p, q) = interpolate(&[a, b], 0.25).unwrap();
        assert!((p.x - 0.5).abs() < 1e-15);
        let expect = Quaternion::from_axis_angle(&Vec3::z(), 0.25);
        assert!(q.angle_to(&expect) < 1e-12);
        assert!(interpolate(&[point(0.0, Vec3::zeros())], 0.5).is_none());
    }

    #[test]
    fn tables_list_every_run() {
        let t = line(4, 1.0);
        let r = drift_report(&t, &t).unwrap();
        let runs = vec![("coclo".to_string(), r), ("imu".to_string(), r)];
        let csv = report_csv(&runs);
        assert_eq!(csv.lines().count(), 3);
        assert!(csv.starts_with("run,final_error_x"));
        let text = report_text(&runs);
        assert_eq!(text.lines().count(), 3);
        let widths: Vec<usize> = text.lines().map(str::len).collect();
        assert!(widths.iter().all(|&w| w == widths[0]));
    }

    proptest! {
        #[test]
        fn drift_is_scale_consistent(s in 0.1f64..10.0, e in 0.0f64..0.5) {
            let truth = line(20, 1.0);
            let est: Vec<_> = truth.iter().map(|p| point(p.timestamp, p.position + Vec3::new(0.0, e, 0.0))).collect();
            let scaled = |v: &[TrajectoryPoint]| -> Vec<TrajectoryPoint> {
                v.iter().map(|p| point(p.timestamp, p.position * s)).collect()
            };
            let a = drift_report(&est, &truth).unwrap();
            let b = drift_report(&scaled(&est), &scaled(&truth)).unwrap();
            prop_assert!((a.drift_percent - b.drift_percent).abs() < 1e-9 * (1.0 + a.drift_percent));
            prop_assert!(a.drift_percent >= 0.0);
        }
    }
}
