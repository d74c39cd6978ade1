//! Contact Surface Motion tracks.
//!
//! Track hulls are rigid. Instead of moving a belt, every contact between a
//! track and the environment gets a friction direction tangent to the circle
//! around the instantaneous center of rotation (ICR) and a target relative
//! velocity equal to the commanded belt speed of that side.
//!
//! Vehicle frame: x forward, y left, z up. Sign convention: `t1` points along
//! the hull's motion for a positive belt speed, and the friction row demands
//! that the track moves along `t1` at the belt speed relative to the ground.

use serde::{Deserialize, Serialize};

use crate::collision::{ContactManifold, GeomId};
use crate::dynamics::{BodyId, Pose};
use crate::math::Vector3;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackSpec<T> {
    pub body: BodyId,
    /// The hull geometry of this track.
    pub geom: GeomId,
    pub side: Side,
    pub belt_max_speed: T,
    pub mu1: T,
    pub mu2: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteeringModel<T> {
    /// Center-to-center track distance B (m).
    pub track_separation: T,
    /// χ ∈ (0, 1].
    pub steering_efficiency: T,
    pub linear_gain: T,
    pub angular_gain: T,
}

impl<T: Scalar> SteeringModel<T> {
    pub fn new(track_separation: T, steering_efficiency: T) -> Self {
        Self {
            track_separation,
            steering_efficiency,
            linear_gain: T::one(),
            angular_gain: T::one(),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.track_separation > T::zero()) {
            return Err("track_separation must be > 0".into());
        }
        if !(self.steering_efficiency > T::zero() && self.steering_efficiency <= T::one()) {
            return Err("steering_efficiency must be in (0, 1]".into());
        }
        if !(self.linear_gain > T::zero()) || !(self.angular_gain > T::zero()) {
            return Err("gains must be > 0".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackDriveState<T> {
    pub v_left: T,
    pub v_right: T,
    /// Forward speed (m/s).
    pub v_forward: T,
    /// Yaw rate (rad/s).
    pub yaw_rate: T,
    /// ICR in the vehicle frame; `None` when at infinity.
    pub icr: Option<Vector3<T>>,
}

impl<T: Scalar> Default for TrackDriveState<T> {
    fn default() -> Self {
        Self {
            v_left: T::zero(),
            v_right: T::zero(),
            v_forward: T::zero(),
            yaw_rate: T::zero(),
            icr: None,
        }
    }
}

impl<T: Scalar> TrackDriveState<T> {
    pub fn speed(&self, side: Side) -> T {
        match side {
            Side::Left => self.v_left,
            Side::Right => self.v_right,
        }
    }
}

pub fn kinematics_from_tracks<T: Scalar>(v_left: T, v_right: T, model: &SteeringModel<T>) -> TrackDriveState<T> {
    let half = T::of(0.5);
    let v = (v_left + v_right) * half;
    let w = model.steering_efficiency * (v_right - v_left) / model.track_separation;
    let icr = (w != T::zero()).then(|| Vector3::new(T::zero(), v / w, T::zero()));
    TrackDriveState {
        v_left,
        v_right,
        v_forward: v,
        yaw_rate: w,
        icr,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackSpeeds<T> {
    pub left: T,
    pub right: T,
    /// Both speeds were scaled down to respect the belt speed limit.
    pub saturated: bool,
}

/// Inverse kinematics; speeds beyond `max_speed` are scaled uniformly.
pub fn tracks_from_twist<T: Scalar>(v: T, w: T, model: &SteeringModel<T>, max_speed: T) -> TrackSpeeds<T> {
    let d = w * model.track_separation / (T::of(2.0) * model.steering_efficiency);
    let (left, right) = (v - d, v + d);
    let peak = left.abs().max(right.abs());
    if peak > max_speed && peak > T::zero() {
        let s = max_speed / peak;
        TrackSpeeds {
            left: left * s,
            right: right * s,
            saturated: true,
        }
    } else {
        TrackSpeeds {
            left,
            right,
            saturated: false,
        }
    }
}

/// Friction direction for a contact. `position` and `n_out` (the contact
/// normal pointing out of the track) are in the vehicle frame.
///
/// Returns the direction and whether the contact lies on the ICR, in which
/// case the straight-drive direction is used and the belt speed is dropped.
pub fn friction_direction<T: Scalar>(
    position: &Vector3<T>,
    n_out: &Vector3<T>,
    icr: Option<&Vector3<T>>,
) -> (Vector3<T>, bool) {
    let eps = T::of(1e-9);
    let straight = straight_direction(n_out);
    let Some(icr) = icr else {
        return (straight, false);
    };
    let r = Vector3::new(position.x - icr.x, position.y - icr.y, T::zero());
    if r.norm() <= eps {
        return (straight, true);
    }
    match n_out.cross(&r).try_normalize(T::of(1e-6) * r.norm()) {
        Some(t) if t.dot(&straight) < T::zero() => (-t, false),
        Some(t) => (t, false),
        None => (straight, false),
    }
}

/// Hull motion direction when driving straight: forward on the bottom, up on
/// the front face.
fn straight_direction<T: Scalar>(n_out: &Vector3<T>) -> Vector3<T> {
    let eps = T::of(1e-6);
    n_out
        .cross(&Vector3::unit_y())
        .try_normalize(eps)
        .or_else(|| {
            let x = Vector3::unit_x();
            (x - *n_out * n_out.dot(&x)).try_normalize(eps)
        })
        .unwrap_or_else(|| n_out.any_perpendicular())
}

/// Belt speed of `side`, zero for a contact on the ICR.
pub fn surface_velocity<T: Scalar>(side: Side, drive: &TrackDriveState<T>, at_icr: bool) -> T {
    if at_icr {
        T::zero()
    } else {
        drive.speed(side)
    }
}

/// A vehicle whose hull geometries act as CSM tracks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackedVehicle<T> {
    pub body: BodyId,
    /// Vehicle frame relative to the body frame.
    pub frame_offset: Pose<T>,
    pub tracks: Vec<TrackSpec<T>>,
    pub drive: TrackDriveState<T>,
}

impl<T: Scalar> TrackedVehicle<T> {
    fn track_of(&self, g: GeomId) -> Option<&TrackSpec<T>> {
        self.tracks.iter().find(|t| t.geom == g)
    }

    /// Sets friction directions, belt speeds and friction coefficients on
    /// every track–environment contact. `body_pose` is the current pose of
    /// `self.body`.
    pub fn annotate_contacts(&self, manifolds: &mut [ContactManifold<T>], body_pose: &Pose<T>) {
        let frame = body_pose.compose(&self.frame_offset);
        for m in manifolds.iter_mut() {
            let (spec, track_is_first) = match (self.track_of(m.geom1), self.track_of(m.geom2)) {
                (Some(_), Some(_)) => continue,
                (Some(s), None) => (s, true),
                (None, Some(s)) => (s, false),
                (None, None) => continue,
            };
            for c in m.contacts.iter_mut() {
                let p = frame.inverse_transform_point(&c.position);
                let n = frame.orientation.inverse_rotate(&c.normal);
                let n_out = if track_is_first { n } else { -n };
                let (t, at_icr) = friction_direction(&p, &n_out, self.drive.icr.as_ref());
                c.set_friction_direction(frame.orientation.rotate(&t));
                let v = surface_velocity(spec.side, &self.drive, at_icr);
                // v2 − v1 along t1: the track is body2 → +v, body1 → −v
                c.surface_velocity_1 = if track_is_first { T::zero() - v } else { v };
                c.surface_velocity_2 = T::zero();
                c.mu1 = spec.mu1;
                c.mu2 = spec.mu2;
            }
        }
    }
}
