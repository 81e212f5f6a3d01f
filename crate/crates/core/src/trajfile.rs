//! Plain-text trajectory files.
//!
//! One pose per line: `timestamp tx ty tz qx qy qz qw`, whitespace separated.
//! `(tx, ty, tz)` and the quaternion are the world-to-camera translation and
//! rotation. Blank lines and lines starting with `#` are ignored. Output uses
//! 17 significant digits so parsing it back yields identical values.

use nalgebra::{Quaternion, UnitQuaternion, Vector3};

use crate::camera::{Intrinsics, Pose, Trajectory, TrajectoryEntry};
use crate::error::{Error, Result};
use crate::numfmt::format_significant;

/// Allowed deviation of a quaternion's norm from 1.
pub const QUATERNION_NORM_TOL: f64 = 1e-6;

pub fn parse_trajectory(text: &str) -> Result<Trajectory> {
    let mut entries = Vec::new();
    let mut lines = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line_no = n + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields = line
            .split_whitespace()
            .map(|f| {
                f.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::Parse { line: line_no, message: format!("invalid number '{f}'") })
            })
            .collect::<Result<Vec<f64>>>()?;
        if fields.len() != 8 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected 8 fields (timestamp tx ty tz qx qy qz qw), found {}", fields.len()),
            });
        }
        let q = Quaternion::new(fields[7], fields[4], fields[5], fields[6]);
        let norm = q.norm();
        if (norm - 1.0).abs() > QUATERNION_NORM_TOL {
            return Err(Error::Validation(format!("line {line_no}: quaternion norm {norm} is not 1")));
        }
        // Already-unit quaternions are kept verbatim so that output re-parses identically.
        let unit = if (q.norm_squared() - 1.0).abs() <= 4.0 * f64::EPSILON {
            UnitQuaternion::new_unchecked(q)
        } else {
            UnitQuaternion::new_normalize(q)
        };
        let translation = Vector3::new(fields[1], fields[2], fields[3]);
        entries.push(TrajectoryEntry { timestamp: fields[0], pose: Pose::from_quaternion(&unit, translation) });
        lines.push(line_no);
    }
    Trajectory::new(entries, Intrinsics::identity()).map_err(|e| match e {
        Error::Ordering { index } => Error::Parse { line: lines[index], message: "timestamp does not increase".into() },
        other => other,
    })
}

pub fn serialize_trajectory(traj: &Trajectory) -> String {
    let mut out = String::new();
    for e in traj.entries() {
        let t = e.pose.translation();
        let q = e.pose.quaternion().quaternion();
        let fields = [e.timestamp, t.x, t.y, t.z, q.i, q.j, q.k, q.w];
        let line: Vec<String> = fields.iter().map(|v| format_significant(*v, 17)).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}
