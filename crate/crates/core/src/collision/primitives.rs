//! Sphere contacts.

use super::box_box::Obb;
use super::{touch_tolerance, RawContact};
use crate::dynamics::Pose;
use crate::math::Vector3;
use crate::scalar::Scalar;

pub(crate) fn flip<T: Scalar>(mut v: Vec<RawContact<T>>) -> Vec<RawContact<T>> {
    for c in v.iter_mut() {
        c.normal = -c.normal;
    }
    v
}

pub(crate) fn sphere_sphere<T: Scalar>(pa: &Pose<T>, ra: T, pb: &Pose<T>, rb: T) -> Vec<RawContact<T>> {
    let d = pb.position - pa.position;
    let dist = d.norm();
    let depth = ra + rb - dist;
    if depth < -touch_tolerance(ra + rb) {
        return Vec::new();
    }
    let normal = d.try_normalize(T::of(1e-12)).unwrap_or_else(Vector3::unit_z);
    let half = T::of(0.5);
    // midpoint between the two surface points
    let sa = pa.position + normal * ra;
    let sb = pb.position - normal * rb;
    vec![RawContact {
        position: (sa + sb) * half,
        normal,
        depth: depth.max(T::zero()),
    }]
}

/// Normal points from the box toward the sphere.
pub(crate) fn box_sphere<T: Scalar>(pbox: &Pose<T>, half: &Vector3<T>, ps: &Pose<T>, r: T) -> Vec<RawContact<T>> {
    let b = Obb::new(pbox, half);
    let q = b.local(&ps.position);
    let clamped = Vector3::new(
        q.x.max(-b.h[0]).min(b.h[0]),
        q.y.max(-b.h[1]).min(b.h[1]),
        q.z.max(-b.h[2]).min(b.h[2]),
    );
    let to_world = |v: Vector3<T>| b.axes[0] * v.x + b.axes[1] * v.y + b.axes[2] * v.z;
    let half_t = T::of(0.5);
    if clamped != q {
        let delta = q - clamped;
        let dist = delta.norm();
        let depth = r - dist;
        if depth < -touch_tolerance(r) {
            return Vec::new();
        }
        let normal = to_world(delta / dist);
        let surface = b.c + to_world(clamped);
        let sphere_pt = ps.position - normal * r;
        return vec![RawContact {
            position: (surface + sphere_pt) * half_t,
            normal,
            depth: depth.max(T::zero()),
        }];
    }
    // center inside the box: push out through the nearest face
    let mut k = 0;
    let mut gap = T::infinity();
    for i in 0..3 {
        let g = b.h[i] - q[i].abs();
        if g < gap {
            gap = g;
            k = i;
        }
    }
    let s = super::box_box::sign(q[k]);
    let normal = b.axes[k] * s;
    let face_pt = ps.position + normal * gap;
    let sphere_pt = ps.position - normal * r;
    vec![RawContact {
        position: (face_pt + sphere_pt) * half_t,
        normal,
        depth: gap + r,
    }]
}

/// Normal points from the cylinder toward the sphere.
pub(crate) fn cylinder_sphere<T: Scalar>(pc: &Pose<T>, rc: T, hl: T, ps: &Pose<T>, r: T) -> Vec<RawContact<T>> {
    let local = pc.orientation.inverse_rotate(&(ps.position - pc.position));
    let radial = Vector3::new(local.x, T::zero(), local.z);
    let rho = radial.norm();
    let y = local.y;
    let half = T::of(0.5);
    let inside = rho <= rc && y.abs() <= hl;
    let (normal_l, surface_l, depth) = if inside {
        let gap_r = rc - rho;
        let gap_a = hl - y.abs();
        if gap_r <= gap_a {
            let dir = radial.try_normalize(T::of(1e-12)).unwrap_or_else(Vector3::unit_x);
            (dir, local + dir * gap_r, gap_r + r)
        } else {
            let dir = Vector3::new(T::zero(), super::box_box::sign(y), T::zero());
            (dir, local + dir * gap_a, gap_a + r)
        }
    } else {
        let cr = rho.min(rc);
        let cy = y.max(-hl).min(hl);
        let rdir = radial.try_normalize(T::of(1e-12)).unwrap_or_else(Vector3::unit_x);
        let closest = Vector3::new(rdir.x * cr, cy, rdir.z * cr);
        let delta = local - closest;
        let dist = delta.norm();
        if r - dist < -touch_tolerance(r) {
            return Vec::new();
        }
        (delta / dist, closest, r - dist)
    };
    let normal = pc.orientation.rotate(&normal_l);
    let surface = pc.transform_point(&surface_l);
    let sphere_pt = ps.position - normal * r;
    vec![RawContact {
        position: (surface + sphere_pt) * half,
        normal,
        depth: depth.max(T::zero()),
    }]
}
