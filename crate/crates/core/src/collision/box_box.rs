//! Oriented box vs oriented box: separating-axis test followed by
//! reference-face clipping or edge-edge closest points.

use super::{reduce_contacts, touch_tolerance, RawContact};
use crate::dynamics::Pose;
use crate::math::Vector3;
use crate::scalar::Scalar;

const FACE_REL_TOL: f64 = 0.95;
const FACE_ABS_TOL: f64 = 0.01;
const PARALLEL_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy)]
pub(crate) struct Obb<T> {
    pub c: Vector3<T>,
    pub axes: [Vector3<T>; 3],
    pub h: [T; 3],
}

impl<T: Scalar> Obb<T> {
    pub fn new(pose: &Pose<T>, half: &Vector3<T>) -> Self {
        let r = pose.orientation.to_matrix();
        Self {
            c: pose.position,
            axes: [r.column(0), r.column(1), r.column(2)],
            h: [half.x, half.y, half.z],
        }
    }

    /// Half-length of the projection onto unit direction `n`.
    pub fn radius(&self, n: &Vector3<T>) -> T {
        (0..3).fold(T::zero(), |acc, k| acc + self.axes[k].dot(n).abs() * self.h[k])
    }

    pub fn vertices(&self) -> [Vector3<T>; 8] {
        let mut out = [self.c; 8];
        for (i, v) in out.iter_mut().enumerate() {
            for k in 0..3 {
                let s = if (i >> k) & 1 == 1 { T::one() } else { -T::one() };
                *v += self.axes[k] * (s * self.h[k]);
            }
        }
        out
    }

    /// The 12 edges as (center, unit direction, half length).
    pub fn edges(&self) -> Vec<(Vector3<T>, Vector3<T>, T)> {
        let mut out = Vec::with_capacity(12);
        for k in 0..3 {
            let (u, v) = ((k + 1) % 3, (k + 2) % 3);
            for (su, sv) in [(1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0)] {
                let c = self.c + self.axes[u] * (T::of(su) * self.h[u]) + self.axes[v] * (T::of(sv) * self.h[v]);
                out.push((c, self.axes[k], self.h[k]));
            }
        }
        out
    }

    /// Box-local coordinates of a world point.
    pub fn local(&self, p: &Vector3<T>) -> Vector3<T> {
        let d = *p - self.c;
        Vector3::new(d.dot(&self.axes[0]), d.dot(&self.axes[1]), d.dot(&self.axes[2]))
    }

    pub fn contains(&self, p: &Vector3<T>, tol: T) -> bool {
        let q = self.local(p);
        (0..3).all(|k| q[k].abs() <= self.h[k] + tol)
    }

    pub fn max_extent(&self) -> T {
        self.h[0].max(self.h[1]).max(self.h[2])
    }

    pub fn min_extent(&self) -> T {
        self.h[0].min(self.h[1]).min(self.h[2])
    }
}

pub(crate) fn sign<T: Scalar>(v: T) -> T {
    if v < T::zero() {
        -T::one()
    } else {
        T::one()
    }
}

/// Closest points between segments `p1 + s·d1, |s| ≤ h1` and
/// `p2 + t·d2, |t| ≤ h2` with unit directions.
pub(crate) fn closest_segment_points<T: Scalar>(
    p1: Vector3<T>,
    d1: Vector3<T>,
    h1: T,
    p2: Vector3<T>,
    d2: Vector3<T>,
    h2: T,
) -> (Vector3<T>, Vector3<T>, T, T) {
    let r = p1 - p2;
    let b = d1.dot(&d2);
    let c = d1.dot(&r);
    let f = d2.dot(&r);
    let denom = T::one() - b * b;
    let clamp = |x: T, h: T| x.max(-h).min(h);
    let mut s = if denom > T::of(1e-12) {
        clamp((b * f - c) / denom, h1)
    } else {
        T::zero()
    };
    let mut t = b * s + f;
    if t.abs() > h2 {
        t = clamp(t, h2);
        s = clamp(t * b - c, h1);
    }
    (p1 + d1 * s, p2 + d2 * t, s, t)
}

enum Axis {
    FaceA(usize),
    FaceB(usize),
    Edge(usize, usize),
}

/// Contacts between two boxes, normal pointing from `a` toward `b`.
pub(crate) fn box_box<T: Scalar>(
    pa: &Pose<T>,
    ha: &Vector3<T>,
    pb: &Pose<T>,
    hb: &Vector3<T>,
    max_contacts: usize,
) -> Vec<RawContact<T>> {
    let a = Obb::new(pa, ha);
    let b = Obb::new(pb, hb);
    let tol = touch_tolerance(a.max_extent().max(b.max_extent()));
    let d = b.c - a.c;

    let mut best_a = (T::neg_infinity(), 0, Vector3::zeros());
    for i in 0..3 {
        let n = a.axes[i];
        let dist = d.dot(&n);
        let s = dist.abs() - (a.h[i] + b.radius(&n));
        if s > tol {
            return Vec::new();
        }
        if s > best_a.0 {
            best_a = (s, i, n * sign(dist));
        }
    }
    let mut best_b = (T::neg_infinity(), 0, Vector3::zeros());
    for j in 0..3 {
        let n = b.axes[j];
        let dist = d.dot(&n);
        let s = dist.abs() - (b.h[j] + a.radius(&n));
        if s > tol {
            return Vec::new();
        }
        if s > best_b.0 {
            best_b = (s, j, n * sign(dist));
        }
    }
    let mut best_edge = (T::neg_infinity(), 0, 0, Vector3::zeros());
    for i in 0..3 {
        for j in 0..3 {
            let Some(n) = a.axes[i].cross(&b.axes[j]).try_normalize(T::of(PARALLEL_EPS)) else {
                continue;
            };
            let dist = d.dot(&n);
            let s = dist.abs() - (a.radius(&n) + b.radius(&n));
            if s > tol {
                return Vec::new();
            }
            if s > best_edge.0 {
                best_edge = (s, i, j, n * sign(dist));
            }
        }
    }

    let rel = T::of(FACE_REL_TOL);
    let abs_tol = T::of(FACE_ABS_TOL) * a.min_extent().min(b.min_extent());
    let (mut sep, mut axis, mut normal) = (best_a.0, Axis::FaceA(best_a.1), best_a.2);
    if best_b.0 > rel * sep + abs_tol {
        (sep, axis, normal) = (best_b.0, Axis::FaceB(best_b.1), best_b.2);
    }
    if best_edge.0 > rel * sep + abs_tol {
        (sep, axis, normal) = (best_edge.0, Axis::Edge(best_edge.1, best_edge.2), best_edge.3);
    }

    let contacts = match axis {
        Axis::FaceA(i) => face_contacts(&a, i, normal, &b, tol, false),
        Axis::FaceB(j) => face_contacts(&b, j, -normal, &a, tol, true),
        Axis::Edge(i, j) => {
            let ea = a.c
                + (0..3).filter(|&k| k != i).fold(Vector3::zeros(), |acc, k| {
                    acc + a.axes[k] * (a.h[k] * sign(a.axes[k].dot(&normal)))
                });
            let eb = b.c
                - (0..3).filter(|&k| k != j).fold(Vector3::zeros(), |acc, k| {
                    acc + b.axes[k] * (b.h[k] * sign(b.axes[k].dot(&normal)))
                });
            let (qa, qb, _, _) = closest_segment_points(ea, a.axes[i], a.h[i], eb, b.axes[j], b.h[j]);
            vec![RawContact {
                position: (qa + qb) * T::of(0.5),
                normal,
                depth: (-sep).max(T::zero()),
            }]
        }
    };
    let mut contacts = reduce_contacts(contacts, 4);
    contacts.truncate(max_contacts);
    contacts
}

/// Clips the incident face of `inc` against reference face `i` of `reference`.
/// `n_ref` points from the reference box toward the incident box.
fn face_contacts<T: Scalar>(
    reference: &Obb<T>,
    i: usize,
    n_ref: Vector3<T>,
    inc: &Obb<T>,
    tol: T,
    flip: bool,
) -> Vec<RawContact<T>> {
    // incident face: most anti-parallel to n_ref
    let mut j = 0;
    let mut best = T::neg_infinity();
    for k in 0..3 {
        let v = inc.axes[k].dot(&n_ref).abs();
        if v > best {
            best = v;
            j = k;
        }
    }
    let s_inc = -sign(inc.axes[j].dot(&n_ref));
    let ic = inc.c + inc.axes[j] * (s_inc * inc.h[j]);
    let (u, v) = ((j + 1) % 3, (j + 2) % 3);
    let (eu, ev) = (inc.axes[u] * inc.h[u], inc.axes[v] * inc.h[v]);
    let mut poly = vec![ic + eu + ev, ic - eu + ev, ic - eu - ev, ic + eu - ev];

    for k in [(i + 1) % 3, (i + 2) % 3] {
        let ax = reference.axes[k];
        let off = reference.c.dot(&ax);
        poly = clip(&poly, ax, off + reference.h[k]);
        poly = clip(&poly, -ax, -(off - reference.h[k]));
        if poly.is_empty() {
            return Vec::new();
        }
    }

    let face_center = reference.c + n_ref * reference.h[i];
    let half = T::of(0.5);
    let normal = if flip { -n_ref } else { n_ref };
    poly.into_iter()
        .filter_map(|p| {
            let s = (p - face_center).dot(&n_ref);
            (s <= tol).then(|| RawContact {
                position: p - n_ref * (s * half),
                normal,
                depth: (-s).max(T::zero()),
            })
        })
        .collect()
}

/// Sutherland–Hodgman clip keeping the half-space `n·p ≤ offset`.
fn clip<T: Scalar>(poly: &[Vector3<T>], n: Vector3<T>, offset: T) -> Vec<Vector3<T>> {
    let mut out = Vec::with_capacity(poly.len() + 2);
    for (k, &p) in poly.iter().enumerate() {
        let q = poly[(k + 1) % poly.len()];
        let dp = n.dot(&p) - offset;
        let dq = n.dot(&q) - offset;
        if dp <= T::zero() {
            out.push(p);
        }
        if (dp < T::zero() && dq > T::zero()) || (dp > T::zero() && dq < T::zero()) {
            let t = dp / (dp - dq);
            out.push(p + (q - p) * t);
        }
    }
    out
}
