//! Cylinder vs box by rim sampling.
//!
//! Three sources of contacts are merged and the deepest are kept:
//! sampled points on both cap rims lying inside the box, box vertices inside
//! the cylinder, and box edges crossing the cylinder tread.

use super::box_box::{closest_segment_points, sign, Obb};
use super::{touch_tolerance, CollisionSettings, RawContact};
use crate::dynamics::Pose;
use crate::math::Vector3;
use crate::scalar::Scalar;

/// Evenly spaced rim points on both caps, starting at `u0`.
fn rim_samples<T: Scalar>(pose: &Pose<T>, r: T, hl: T, k: usize, u0: Vector3<T>) -> Vec<Vector3<T>> {
    let a = pose.orientation.rotate(&Vector3::unit_y());
    let v0 = a.cross(&u0);
    let mut out = Vec::with_capacity(2 * k);
    for cap in [-T::one(), T::one()] {
        let cc = pose.position + a * (cap * hl);
        for i in 0..k {
            let th = T::of(2.0 * std::f64::consts::PI * i as f64 / k as f64);
            out.push(cc + (u0 * th.cos() + v0 * th.sin()) * r);
        }
    }
    out
}

/// Rim samples with an arbitrary but deterministic phase.
pub(crate) fn rim_points<T: Scalar>(pose: &Pose<T>, r: T, hl: T, k: usize) -> Vec<Vector3<T>> {
    let a = pose.orientation.rotate(&Vector3::unit_y());
    // phase toward world -z so the lowest rim point is sampled exactly
    let down = -Vector3::unit_z();
    let u0 = (down - a * a.dot(&down))
        .try_normalize(T::of(1e-9))
        .unwrap_or_else(|| a.any_perpendicular());
    rim_samples(pose, r, hl, k, u0)
}

/// Contacts with normals pointing from the cylinder toward the box.
pub(crate) fn cylinder_box<T: Scalar>(
    pc: &Pose<T>,
    r: T,
    hl: T,
    pbox: &Pose<T>,
    half: &Vector3<T>,
    settings: &CollisionSettings,
) -> Vec<RawContact<T>> {
    let b = Obb::new(pbox, half);
    let tol = touch_tolerance(b.max_extent().max(r).max(hl));
    let a = pc.orientation.rotate(&Vector3::unit_y());
    let c = pc.position;
    let half_t = T::of(0.5);

    // least-penetrated box face
    let mut face = (T::infinity(), Vector3::zeros(), T::zero());
    for k in 0..3 {
        for s in [T::one(), -T::one()] {
            let f = b.axes[k] * s;
            let plane = b.c.dot(&f) + b.h[k];
            let af = a.dot(&f);
            let extent = af.abs() * hl + r * (T::one() - af * af).max(T::zero()).sqrt();
            let pen = plane - (c.dot(&f) - extent);
            if pen < -tol {
                return Vec::new();
            }
            if pen < face.0 {
                face = (pen, f, plane);
            }
        }
    }
    let (_, f, plane) = face;

    let mut out = Vec::new();
    let u0 = (-f - a * a.dot(&-f))
        .try_normalize(T::of(1e-9))
        .unwrap_or_else(|| a.any_perpendicular());
    for p in rim_samples(pc, r, hl, settings.rim_samples.max(1), u0) {
        if b.contains(&p, tol) {
            let depth = plane - p.dot(&f);
            out.push(RawContact {
                position: p + f * (depth * half_t),
                normal: -f,
                depth: depth.max(T::zero()),
            });
        }
    }

    for v in b.vertices() {
        let q = pc.orientation.inverse_rotate(&(v - c));
        let radial = Vector3::new(q.x, T::zero(), q.z);
        let rho = radial.norm();
        if q.y.abs() > hl || rho > r {
            continue;
        }
        let (gap_r, gap_a) = (r - rho, hl - q.y.abs());
        let (n_local, depth) = match radial.try_normalize(T::of(1e-12)) {
            Some(dir) if gap_r <= gap_a => (dir, gap_r),
            _ => (Vector3::new(T::zero(), sign(q.y), T::zero()), gap_a),
        };
        let normal = pc.orientation.rotate(&n_local);
        out.push(RawContact {
            position: v + normal * (depth * half_t),
            normal,
            depth,
        });
    }

    for (ec, ed, eh) in b.edges() {
        let (qa, qe, t_axis, _) = closest_segment_points(c, a, hl, ec, ed, eh);
        if t_axis.abs() >= hl {
            continue;
        }
        let delta = qe - qa;
        let dist = delta.norm();
        if dist >= r || dist <= T::of(1e-12) {
            continue;
        }
        let normal = delta / dist;
        let depth = r - dist;
        out.push(RawContact {
            position: qe + normal * (depth * half_t),
            normal,
            depth,
        });
    }

    // deepest first, stable for equal depths
    out.sort_by(|x, y| y.depth.partial_cmp(&x.depth).unwrap_or(std::cmp::Ordering::Equal));
    out.truncate(settings.max_contacts);
    out
}
