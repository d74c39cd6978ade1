//! Reference trajectory text format: one row per 0.1 s with
//! `t x y z qw qx qy qz`, space separated, 12 significant digits. Lines
//! starting with `#` are comments.

use std::fmt::Write as _;

use super::metrics::{Trajectory, TrajectorySample};
use super::ScenarioError;
use crate::{Pose, Quat, Vec3};

/// Golden references generated by the csm model at fine settings.
pub fn golden(scenario: &str) -> Option<&'static str> {
    match scenario {
        "circular" => Some(include_str!("../../data/reference/circular.txt")),
        "ramp" => Some(include_str!("../../data/reference/ramp.txt")),
        "staircase_down" => Some(include_str!("../../data/reference/staircase_down.txt")),
        "pallet" => Some(include_str!("../../data/reference/pallet.txt")),
        _ => None,
    }
}

fn sig12(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let s = format!("{:.11e}", v);
    // trim trailing zeros of the mantissa
    match s.split_once('e') {
        Some((m, e)) => {
            let m = if m.contains('.') {
                m.trim_end_matches('0').trim_end_matches('.')
            } else {
                m
            };
            if e == "0" {
                m.to_string()
            } else {
                format!("{m}e{e}")
            }
        }
        None => s,
    }
}

pub fn write_trajectory(traj: &[TrajectorySample], header: &[String]) -> String {
    let mut out = String::new();
    for h in header {
        let _ = writeln!(out, "# {h}");
    }
    out.push_str("# t x y z qw qx qy qz\n");
    for s in traj {
        let p = s.pose.position;
        let q = s.pose.orientation;
        let row = [s.t, p.x, p.y, p.z, q.w, q.x, q.y, q.z].map(sig12);
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

pub fn parse_trajectory(text: &str) -> Result<Trajectory, ScenarioError> {
    let mut traj = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |msg: String| ScenarioError::ReferenceFormat {
            line: i + 1,
            message: msg,
        };
        let v: Vec<f64> = line
            .split_whitespace()
            .map(|f| f.parse::<f64>().map_err(|e| bad(format!("'{f}': {e}"))))
            .collect::<Result<_, _>>()?;
        if v.len() != 8 {
            return Err(bad(format!("expected 8 columns, found {}", v.len())));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(bad("non-finite value".into()));
        }
        if let Some(prev) = traj.last().map(|s: &TrajectorySample| s.t) {
            if v[0] < prev {
                return Err(bad("timestamps must be non-decreasing".into()));
            }
        }
        let q = Quat {
            w: v[4],
            x: v[5],
            y: v[6],
            z: v[7],
        };
        traj.push(TrajectorySample {
            t: v[0],
            pose: Pose::new(Vec3::new(v[1], v[2], v[3]), q.normalize()),
        });
    }
    Ok(traj)
}
