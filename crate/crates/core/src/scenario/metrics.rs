//! Trajectory metrics: distances to targets and summed errors against a
//! reference sampled at 10 Hz.

use serde::{Deserialize, Serialize};

use super::ScenarioError;
use crate::{Pose, Quat, Vec3};

/// Sampling period of recorded trajectories and references (s).
pub const SAMPLE_PERIOD: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub pose: Pose,
}

pub type Trajectory = Vec<TrajectorySample>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricSpec {
    /// Final distance to a point (d_t).
    DistanceToPoint { target: [f64; 3] },
    /// Final angular offset from a roll-pitch-yaw orientation (d_ω).
    AngularOffset { target_rpy: [f64; 3] },
    /// Final angular offset from the starting orientation.
    AngularOffsetFromStart,
    /// Final distance from the starting position (d_st).
    DistanceFromStart,
    /// Σd_t against the reference trajectory.
    SumPositionalError,
    /// Σd_ω against the reference trajectory.
    SumAngularError,
}

impl MetricSpec {
    pub fn name(&self) -> &'static str {
        match self {
            MetricSpec::DistanceToPoint { .. } => "d_t",
            MetricSpec::AngularOffset { .. } | MetricSpec::AngularOffsetFromStart => "d_omega",
            MetricSpec::DistanceFromStart => "d_st",
            MetricSpec::SumPositionalError => "sum_d_t",
            MetricSpec::SumAngularError => "sum_d_omega",
        }
    }

    pub fn unit(&self) -> &'static str {
        if self.is_angular() {
            "rad"
        } else {
            "m"
        }
    }

    pub fn is_angular(&self) -> bool {
        matches!(
            self,
            MetricSpec::AngularOffset { .. } | MetricSpec::AngularOffsetFromStart | MetricSpec::SumAngularError
        )
    }

    pub fn needs_reference(&self) -> bool {
        matches!(self, MetricSpec::SumPositionalError | MetricSpec::SumAngularError)
    }

    /// Evaluates the metric on a trajectory that starts at t = 0.
    pub fn evaluate(
        &self,
        traj: &[TrajectorySample],
        reference: Option<&[TrajectorySample]>,
    ) -> Result<f64, ScenarioError> {
        let (first, last) = match (traj.first(), traj.last()) {
            (Some(f), Some(l)) => (f.pose, l.pose),
            _ => return Err(ScenarioError::EmptyTrajectory),
        };
        Ok(match *self {
            MetricSpec::DistanceToPoint { target } => {
                (last.position - Vec3::new(target[0], target[1], target[2])).norm()
            }
            MetricSpec::AngularOffset { target_rpy } => angular_offset(
                &last.orientation,
                &Quat::from_rpy(target_rpy[0], target_rpy[1], target_rpy[2]),
            ),
            MetricSpec::AngularOffsetFromStart => angular_offset(&last.orientation, &first.orientation),
            MetricSpec::DistanceFromStart => (last.position - first.position).norm(),
            MetricSpec::SumPositionalError => {
                sum_positional_error(traj, reference.ok_or(ScenarioError::MissingReference)?)?
            }
            MetricSpec::SumAngularError => sum_angular_error(traj, reference.ok_or(ScenarioError::MissingReference)?)?,
        })
    }
}

/// Geodesic angle between two orientations, in [0, π].
pub fn angular_offset(a: &Quat, b: &Quat) -> f64 {
    let d = a.normalize().dot(&b.normalize()).abs().min(1.0);
    2.0 * d.acos()
}

fn paired<'a>(
    traj: &'a [TrajectorySample],
    reference: &'a [TrajectorySample],
) -> Result<impl Iterator<Item = (&'a TrajectorySample, &'a TrajectorySample)>, ScenarioError> {
    let needed = traj.len();
    if reference.len() < needed {
        return Err(ScenarioError::ReferenceTooShort {
            needed: traj.last().map_or(0.0, |s| s.t),
            available: reference.last().map_or(0.0, |s| s.t),
        });
    }
    for (s, r) in traj.iter().zip(reference) {
        if (s.t - r.t).abs() > 1e-6 {
            return Err(ScenarioError::ReferenceMisaligned {
                t: s.t,
                reference_t: r.t,
            });
        }
    }
    Ok(traj.iter().zip(reference).skip(1))
}

/// Σ_k ‖p(t_k) − p_ref(t_k)‖ over the samples after t = 0.
pub fn sum_positional_error(traj: &[TrajectorySample], reference: &[TrajectorySample]) -> Result<f64, ScenarioError> {
    Ok(paired(traj, reference)?
        .map(|(s, r)| (s.pose.position - r.pose.position).norm())
        .sum())
}

/// Σ_k of the geodesic angle between sampled and reference orientations.
pub fn sum_angular_error(traj: &[TrajectorySample], reference: &[TrajectorySample]) -> Result<f64, ScenarioError> {
    Ok(paired(traj, reference)?
        .map(|(s, r)| angular_offset(&s.pose.orientation, &r.pose.orientation))
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn line(speed: f64, seconds: f64) -> Trajectory {
        let n = (seconds / SAMPLE_PERIOD).round() as usize;
        (0..=n)
            .map(|k| {
                let t = k as f64 * SAMPLE_PERIOD;
                TrajectorySample {
                    t,
                    pose: Pose::from_translation(Vec3::new(speed * t, 0.0, 0.0)),
                }
            })
            .collect()
    }

    #[test]
    fn angular_offset_examples() {
        let id = Quat::identity();
        assert_eq!(angular_offset(&id, &id), 0.0);
        let yaw = Quat::from_rpy(0.0, 0.0, PI / 2.0);
        assert!((angular_offset(&yaw, &id) - PI / 2.0).abs() < 1e-12);
        let neg = Quat {
            w: -yaw.w,
            x: -yaw.x,
            y: -yaw.y,
            z: -yaw.z,
        };
        assert!(angular_offset(&yaw, &neg) < 1e-7);
    }

    #[test]
    fn heading_wraps() {
        let q = Quat::from_rpy(0.0, 0.0, 6.0);
        let r = Quat::from_rpy(0.0, 0.0, 6.0 - 2.0 * PI);
        assert!(angular_offset(&q, &r) < 1e-7);
    }

    #[test]
    fn identical_trajectories_sum_to_zero() {
        let a = line(0.3, 10.0);
        assert_eq!(sum_positional_error(&a, &a).unwrap(), 0.0);
        assert_eq!(sum_angular_error(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn constant_offset_sums_to_ten() {
        let a = line(0.3, 10.0);
        let b: Trajectory = a
            .iter()
            .map(|s| TrajectorySample {
                t: s.t,
                pose: Pose::from_translation(s.pose.position + Vec3::new(0.0, 0.1, 0.0)),
            })
            .collect();
        assert!((sum_positional_error(&a, &b).unwrap() - 10.0).abs() < 1e-9);
    }

    #[test]
    fn speed_mismatch_closed_form() {
        // Σ_{k=1}^{100} 0.1·(0.1k) = 0.01·5050
        let oracle: f64 = (1..=100).map(|k| 0.1 * 0.1 * k as f64).sum();
        let got = sum_positional_error(&line(0.3, 10.0), &line(0.2, 10.0)).unwrap();
        assert!((got - oracle).abs() < 1e-9);
        assert!((got - 50.5).abs() < 1e-9);
    }

    #[test]
    fn short_reference_is_an_error() {
        let err = sum_positional_error(&line(0.3, 10.0), &line(0.3, 5.0)).unwrap_err();
        assert!(matches!(err, ScenarioError::ReferenceTooShort { .. }));
    }

    #[test]
    fn longer_reference_is_truncated() {
        let a = line(0.3, 5.0);
        assert_eq!(sum_positional_error(&a, &line(0.3, 10.0)).unwrap(), 0.0);
    }

    #[test]
    fn zero_duration_metrics_vanish() {
        let a = line(0.3, 0.0);
        for m in [
            MetricSpec::DistanceFromStart,
            MetricSpec::AngularOffsetFromStart,
            MetricSpec::SumPositionalError,
            MetricSpec::SumAngularError,
        ] {
            assert_eq!(m.evaluate(&a, Some(&a)).unwrap(), 0.0);
        }
    }
}
