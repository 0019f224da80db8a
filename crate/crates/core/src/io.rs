//! Sensor logs (JSON lines) and trajectories (CSV).
//!
//! Sensor log, one frame per line:
//!
//! ```text
//! {"t":0.01,"legs":[[{"angle":0.0,"velocity":0.0,"torque":1.5},...],...],"gyro":[0,0,0],"accel":[0,0,9.81]}
//! ```
//!
//! Trajectory CSV header for `n` legs:
//! `t,rx,ry,rz,qx,qy,qz,qw,vx,vy,vz,foot0_x,foot0_y,foot0_z,...,contact0,...`.
//! Floats use shortest round-trip formatting, so reading a file back yields
//! bit-identical values.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::{RobotState, SensorFrame};
use crate::kinematics::JointReading;
use crate::sim::SimTrace;
use crate::spatial::{Quaternion, Vec3};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JointRecord {
    angle: f64,
    velocity: f64,
    torque: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FrameRecord {
    t: f64,
    legs: Vec<Vec<JointRecord>>,
    gyro: [f64; 3],
    accel: [f64; 3],
}

impl From<&SensorFrame<f64>> for FrameRecord {
    fn from(f: &SensorFrame<f64>) -> Self {
        Self {
            t: f.timestamp,
            legs: f
                .legs
                .iter()
                .map(|leg| {
                    leg.iter()
                        .map(|j| JointRecord {
                            angle: j.angle,
                            velocity: j.velocity,
                            torque: j.torque,
                        })
                        .collect()
                })
                .collect(),
            gyro: [f.gyro.x, f.gyro.y, f.gyro.z],
            accel: [f.accel.x, f.accel.y, f.accel.z],
        }
    }
}

impl From<FrameRecord> for SensorFrame<f64> {
    fn from(r: FrameRecord) -> Self {
        Self {
            timestamp: r.t,
            legs: r
                .legs
                .into_iter()
                .map(|leg| {
                    leg.into_iter()
                        .map(|j| JointReading {
                            angle: j.angle,
                            velocity: j.velocity,
                            torque: j.torque,
                        })
                        .collect()
                })
                .collect(),
            gyro: Vec3::from(r.gyro),
            accel: Vec3::from(r.accel),
        }
    }
}

/// Serializes one frame as a JSON line (without the newline).
pub fn frame_to_json(frame: &SensorFrame<f64>) -> String {
    serde_json::to_string(&FrameRecord::from(frame)).expect("finite frame serializes")
}

/// Parses one JSON line.
pub fn frame_from_json(line: &str) -> std::result::Result<SensorFrame<f64>, String> {
    serde_json::from_str::<FrameRecord>(line)
        .map(SensorFrame::from)
        .map_err(|e| e.to_string())
}

pub fn write_sensor_log(path: &Path, frames: &[SensorFrame<f64>]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for f in frames {
        writeln!(w, "{}", frame_to_json(f)).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a sensor log. Blank lines are skipped; timestamps must strictly
/// increase.
pub fn read_sensor_log(path: &Path) -> Result<Vec<SensorFrame<f64>>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut frames: Vec<SensorFrame<f64>> = Vec::new();
    for (k, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let frame = frame_from_json(&line).map_err(|message| Error::Parse {
            line: k + 1,
            message,
        })?;
        if let Some(prev) = frames.last() {
            if !(frame.timestamp > prev.timestamp) {
                return Err(Error::Ordering {
                    previous: prev.timestamp,
                    current: frame.timestamp,
                });
            }
        }
        frames.push(frame);
    }
    Ok(frames)
}

/// One trajectory row.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryPoint {
    pub timestamp: f64,
    pub position: Vec3<f64>,
    pub orientation: Quaternion<f64>,
    pub velocity: Vec3<f64>,
    pub feet: Vec<Vec3<f64>>,
    pub contact: Vec<f64>,
}

impl TrajectoryPoint {
    pub fn from_state(timestamp: f64, s: &RobotState<f64>) -> Self {
        Self {
            timestamp,
            position: s.position,
            orientation: s.orientation,
            velocity: s.velocity,
            feet: s.feet.clone(),
            contact: s.contact.clone(),
        }
    }
}

/// Truth samples as trajectory rows; contact is 1 in stance, 0 in swing.
pub fn truth_trajectory(trace: &SimTrace) -> Vec<TrajectoryPoint> {
    trace
        .truth
        .iter()
        .map(|s| TrajectoryPoint {
            timestamp: s.timestamp,
            position: s.position,
            orientation: s.orientation,
            velocity: s.velocity,
            feet: s.feet.clone(),
            contact: s
                .contact
                .iter()
                .map(|&c| if c { 1.0 } else { 0.0 })
                .collect(),
        })
        .collect()
}

pub fn trajectory_header(legs: usize) -> Vec<String> {
    let mut h: Vec<String> = [
        "t", "rx", "ry", "rz", "qx", "qy", "qz", "qw", "vx", "vy", "vz",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for i in 0..legs {
        for a in ["x", "y", "z"] {
            h.push(format!("foot{i}_{a}"));
        }
    }
    for i in 0..legs {
        h.push(format!("contact{i}"));
    }
    h
}

pub fn write_trajectory(path: &Path, points: &[TrajectoryPoint]) -> Result<()> {
    let legs = points.first().map_or(0, |p| p.feet.len());
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(trajectory_header(legs))
        .map_err(|e| csv_error(path, e))?;
    for p in points {
        if p.feet.len() != legs || p.contact.len() != legs {
            return Err(Error::FrameMismatch(
                "trajectory rows disagree on leg count".into(),
            ));
        }
        let q = p.orientation;
        let mut row = vec![p.timestamp];
        row.extend(p.position.iter());
        row.extend([q.x, q.y, q.z, q.w]);
        row.extend(p.velocity.iter());
        for f in &p.feet {
            row.extend(f.iter());
        }
        row.extend(p.contact.iter());
        w.write_record(row.iter().map(|v| v.to_string()))
            .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Parse {
            line: 0,
            message: format!("{other:?}"),
        },
    }
}

pub fn read_trajectory(path: &Path) -> Result<Vec<TrajectoryPoint>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let header: Vec<String> = r
        .headers()
        .map_err(|e| csv_error(path, e))?
        .iter()
        .map(|s| s.to_string())
        .collect();
    if header.len() < 11 || !(header.len() - 11).is_multiple_of(4) {
        return Err(Error::Parse {
            line: 1,
            message: format!("unexpected trajectory header with {} columns", header.len()),
        });
    }
    let legs = (header.len() - 11) / 4;
    if header != trajectory_header(legs) {
        return Err(Error::Parse {
            line: 1,
            message: "trajectory header does not match the expected columns".into(),
        });
    }
    let mut out = Vec::new();
    for (k, rec) in r.records().enumerate() {
        let line = k + 2;
        let rec = rec.map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        let v: Vec<f64> = rec
            .iter()
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse {
                line,
                message: e.to_string(),
            })?;
        if v.len() != header.len() {
            return Err(Error::Parse {
                line,
                message: format!("expected {} columns, got {}", header.len(), v.len()),
            });
        }
        let foot = |i: usize| Vec3::new(v[11 + 3 * i], v[12 + 3 * i], v[13 + 3 * i]);
        let point = TrajectoryPoint {
            timestamp: v[0],
            position: Vec3::new(v[1], v[2], v[3]),
            orientation: Quaternion::new(v[4], v[5], v[6], v[7]),
            velocity: Vec3::new(v[8], v[9], v[10]),
            feet: (0..legs).map(foot).collect(),
            contact: v[11 + 3 * legs..].to_vec(),
        };
        if let Some(prev) = out.last() {
            let prev: &TrajectoryPoint = prev;
            if !(point.timestamp > prev.timestamp) {
                return Err(Error::Ordering {
                    previous: prev.timestamp,
                    current: point.timestamp,
                });
            }
        }
        out.push(point);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn frame(t: f64, x: f64) -> SensorFrame<f64> {
        SensorFrame {
            timestamp: t,
            legs: vec![
                vec![
                    JointReading {
                        angle: x,
                        velocity: -x / 3.0,
                        torque: 1e-300
                    },
                    JointReading {
                        angle: 0.1,
                        velocity: 0.2,
                        torque: 0.3
                    },
                ];
                2
            ],
            gyro: Vec3::new(x, 1.0 / 3.0, -0.0),
            accel: Vec3::new(f64::MIN_POSITIVE, 9.81, 1e300),
        }
    }

    proptest! {
        #[test]
        fn frame_json_round_trip_is_exact(t in -1e6f64..1e6, x in proptest::num::f64::NORMAL) {
            let f = frame(t, x);
            let back = frame_from_json(&frame_to_json(&f)).unwrap();
            prop_assert_eq!(back.timestamp.to_bits(), f.timestamp.to_bits());
            prop_assert_eq!(back, f);
        }
    }

    #[test]
    fn log_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.jsonl");
        let frames: Vec<_> = (0..5)
            .map(|k| frame(k as f64 * 0.01, k as f64 / 7.0))
            .collect();
        write_sensor_log(&path, &frames).unwrap();
        assert_eq!(read_sensor_log(&path).unwrap(), frames);
    }

    #[test]
    fn malformed_line_reports_its_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.jsonl");
        let good = frame_to_json(&frame(0.0, 1.0));
        std::fs::write(&path, format!("{good}\n{{\"t\": 1.0}}\n")).unwrap();
        match read_sensor_log(&path) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn timestamp_regression_is_an_ordering_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.jsonl");
        let lines = [frame(1.0, 0.0), frame(0.5, 0.0)]
            .map(|f| frame_to_json(&f))
            .join("\n");
        std::fs::write(&path, lines).unwrap();
        assert!(matches!(
            read_sensor_log(&path),
            Err(Error::Ordering { .. })
        ));
    }

    #[test]
    fn trajectory_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("traj.csv");
        let pts: Vec<_> = (0..4)
            .map(|k| TrajectoryPoint {
                timestamp: k as f64 * 0.1,
                position: Vec3::new(1.0 / 3.0, k as f64, -2e-17),
                orientation: Quaternion::from_axis_angle(&Vec3::z(), 0.1 * k as f64),
                velocity: Vec3::new(0.1, 0.2, 0.3),
                feet: vec![Vec3::new(0.7, 0.1, -0.2); 3],
                contact: vec![1.0, 0.5, f64::NAN],
            })
            .collect();
        write_trajectory(&path, &pts).unwrap();
        let back = read_trajectory(&path).unwrap();
        assert_eq!(back.len(), 4);
        for (a, b) in back.iter().zip(&pts) {
            assert_eq!(a.position, b.position);
            assert_eq!(a.orientation, b.orientation);
            assert_eq!(a.feet, b.feet);
            assert_eq!(a.contact[..2], b.contact[..2]);
            assert!(a.contact[2].is_nan());
        }
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("t,rx,ry,rz,qx,qy,qz,qw,vx,vy,vz,foot0_x,foot0_y,foot0_z,"));
    }

    #[test]
    fn bad_trajectory_header_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("traj.csv");
        std::fs::write(&path, "t,x,y\n0,1,2\n").unwrap();
        assert!(matches!(
            read_trajectory(&path),
            Err(Error::Parse { line: 1, .. })
        ));
    }
}
