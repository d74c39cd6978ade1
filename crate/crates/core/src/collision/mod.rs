//! Collision shapes, broad phase and contact manifold generation.
//!
//! Every narrow-phase routine reports contacts with the normal pointing from
//! the first geometry toward the second. Pairs are evaluated in a canonical
//! order and flipped afterwards, so `collide(a, b)` and `collide(b, a)`
//! produce the same points with negated normals.

mod box_box;
mod cylinder;
mod primitives;
mod trimesh;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{BodyId, Pose};
use crate::math::Vector3;
use crate::scalar::Scalar;

pub use trimesh::TriMesh;

/// Default cap on contacts kept per geometry pair.
pub const DEFAULT_MAX_CONTACTS: usize = 8;
/// Default number of rim samples per cylinder cap.
pub const DEFAULT_RIM_SAMPLES: usize = 16;
/// AABB inflation used by the broad phase (m).
pub const BROAD_PHASE_MARGIN: f64 = 0.001;

/// Index of a geometry in the simulation's geometry list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GeomId(pub usize);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Shape<T> {
    Box {
        half_extents: Vector3<T>,
    },
    /// Axis along local y.
    Cylinder {
        radius: T,
        half_length: T,
    },
    Sphere {
        radius: T,
    },
    StaticTriMesh(TriMesh<T>),
}

impl<T: Scalar> Shape<T> {
    pub fn kind(&self) -> &'static str {
        match self {
            Shape::Box { .. } => "box",
            Shape::Cylinder { .. } => "cylinder",
            Shape::Sphere { .. } => "sphere",
            Shape::StaticTriMesh(_) => "trimesh",
        }
    }

    fn rank(&self) -> u8 {
        match self {
            Shape::Sphere { .. } => 0,
            Shape::Box { .. } => 1,
            Shape::Cylinder { .. } => 2,
            Shape::StaticTriMesh(_) => 3,
        }
    }

    pub fn validate(&self) -> Result<(), CollisionError> {
        let ok = match self {
            Shape::Box { half_extents: h } => h.x > T::zero() && h.y > T::zero() && h.z > T::zero(),
            Shape::Cylinder { radius, half_length } => *radius > T::zero() && *half_length > T::zero(),
            Shape::Sphere { radius } => *radius > T::zero(),
            Shape::StaticTriMesh(m) => !m.triangles().is_empty(),
        };
        if ok {
            Ok(())
        } else {
            Err(CollisionError::InvalidShape(self.kind()))
        }
    }

    /// World-space AABB for this shape placed at `pose`.
    pub fn aabb(&self, pose: &Pose<T>) -> Aabb<T> {
        let c = pose.position;
        match self {
            Shape::Box { half_extents } => {
                let r = pose.orientation.to_matrix();
                let mut e = Vector3::zeros();
                for i in 0..3 {
                    let row = r.row(i).abs();
                    let v = row.dot(half_extents);
                    match i {
                        0 => e.x = v,
                        1 => e.y = v,
                        _ => e.z = v,
                    }
                }
                Aabb { min: c - e, max: c + e }
            }
            Shape::Cylinder { radius, half_length } => {
                let a = pose.orientation.rotate(&Vector3::unit_y());
                let ext = |ai: T| ai.abs() * *half_length + *radius * (T::one() - ai * ai).max(T::zero()).sqrt();
                let e = Vector3::new(ext(a.x), ext(a.y), ext(a.z));
                Aabb { min: c - e, max: c + e }
            }
            Shape::Sphere { radius } => {
                let e = Vector3::new(*radius, *radius, *radius);
                Aabb { min: c - e, max: c + e }
            }
            Shape::StaticTriMesh(m) => m.aabb(pose),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb<T> {
    pub min: Vector3<T>,
    pub max: Vector3<T>,
}

impl<T: Scalar> Aabb<T> {
    pub fn inflate(&self, margin: T) -> Self {
        let m = Vector3::new(margin, margin, margin);
        Self {
            min: self.min - m,
            max: self.max + m,
        }
    }

    pub fn overlaps(&self, o: &Self) -> bool {
        self.min.x <= o.max.x
            && o.min.x <= self.max.x
            && self.min.y <= o.max.y
            && o.min.y <= self.max.y
            && self.min.z <= o.max.z
            && o.min.z <= self.max.z
    }
}

/// Friction and restitution of a surface. Pairs combine by minimum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfaceParams<T> {
    pub mu_primary: T,
    pub mu_secondary: T,
    pub restitution: T,
}

impl<T: Scalar> Default for SurfaceParams<T> {
    fn default() -> Self {
        Self {
            mu_primary: T::one(),
            mu_secondary: T::one(),
            restitution: T::zero(),
        }
    }
}

impl<T: Scalar> SurfaceParams<T> {
    pub fn new(mu_primary: T, mu_secondary: T) -> Self {
        Self {
            mu_primary,
            mu_secondary,
            restitution: T::zero(),
        }
    }

    pub fn frictionless() -> Self {
        Self::new(T::zero(), T::zero())
    }

    pub fn combine(&self, o: &Self) -> Self {
        Self {
            mu_primary: self.mu_primary.min(o.mu_primary),
            mu_secondary: self.mu_secondary.min(o.mu_secondary),
            restitution: self.restitution.min(o.restitution),
        }
    }

    pub fn validate(&self) -> Result<(), CollisionError> {
        let z = T::zero();
        if self.mu_primary >= z && self.mu_secondary >= z && self.restitution >= z && self.restitution <= T::one() {
            Ok(())
        } else {
            Err(CollisionError::InvalidSurface)
        }
    }
}

pub mod groups {
    pub const ENVIRONMENT: u32 = 1;
    pub const VEHICLE: u32 = 1 << 1;
    pub const ALL: u32 = u32::MAX;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollisionGeometry<T> {
    pub body: BodyId,
    pub shape: Shape<T>,
    /// Pose relative to the owning body frame.
    pub local_pose: Pose<T>,
    pub group: u32,
    pub mask: u32,
    pub surface: SurfaceParams<T>,
}

impl<T: Scalar> CollisionGeometry<T> {
    pub fn new(body: BodyId, shape: Shape<T>, local_pose: Pose<T>) -> Self {
        Self {
            body,
            shape,
            local_pose,
            group: groups::ENVIRONMENT,
            mask: groups::ALL,
            surface: SurfaceParams::default(),
        }
    }

    pub fn with_filter(mut self, group: u32, mask: u32) -> Self {
        self.group = group;
        self.mask = mask;
        self
    }

    pub fn with_surface(mut self, surface: SurfaceParams<T>) -> Self {
        self.surface = surface;
        self
    }

    pub fn admits(&self, o: &Self) -> bool {
        (self.group & o.mask) != 0 && (o.group & self.mask) != 0
    }
}

/// One contact point between two geometries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactPoint<T> {
    pub position: Vector3<T>,
    /// Unit normal pointing from body1 toward body2.
    pub normal: Vector3<T>,
    pub depth: T,
    pub body1: BodyId,
    pub body2: BodyId,
    pub geom1: GeomId,
    pub geom2: GeomId,
    /// First friction direction, perpendicular to the normal.
    pub t1: Vector3<T>,
    /// `normal × t1`.
    pub t2: Vector3<T>,
    pub mu1: T,
    pub mu2: T,
    pub restitution: T,
    /// Target relative velocity of body2 w.r.t. body1 along `t1`.
    pub surface_velocity_1: T,
    pub surface_velocity_2: T,
}

impl<T: Scalar> ContactPoint<T> {
    /// Replaces the friction frame with `t1` (projected onto the tangent
    /// plane) and `t2 = normal × t1`.
    pub fn set_friction_direction(&mut self, t1: Vector3<T>) {
        let n = self.normal;
        let projected = t1 - n * n.dot(&t1);
        let t1 = projected
            .try_normalize(T::of(1e-12))
            .unwrap_or_else(|| n.any_perpendicular());
        self.t1 = t1;
        self.t2 = n.cross(&t1);
    }

    /// Maximum deviation of `{t1, t2, n}` from a right-handed orthonormal triad.
    pub fn frame_error(&self) -> T {
        let one = T::one();
        let errs = [
            (self.normal.norm() - one).abs(),
            (self.t1.norm() - one).abs(),
            (self.t2.norm() - one).abs(),
            self.t1.dot(&self.normal).abs(),
            self.t2.dot(&self.normal).abs(),
            self.t1.dot(&self.t2).abs(),
            (self.t1.cross(&self.t2) - self.normal).max_abs(),
        ];
        errs.iter().fold(T::zero(), |a, e| a.max(*e))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactManifold<T> {
    pub geom1: GeomId,
    pub geom2: GeomId,
    pub body1: BodyId,
    pub body2: BodyId,
    pub contacts: Vec<ContactPoint<T>>,
}

impl<T> ContactManifold<T> {
    pub fn is_empty(&self) -> bool {
        self.contacts.is_empty()
    }

    pub fn len(&self) -> usize {
        self.contacts.len()
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CollisionError {
    #[error("unsupported shape pair: {0} vs {1}")]
    UnsupportedPair(&'static str, &'static str),
    #[error("invalid {0} dimensions: all dimensions must be positive")]
    InvalidShape(&'static str),
    #[error("invalid surface parameters: friction must be >= 0 and restitution in [0, 1]")]
    InvalidSurface,
}

/// Narrow-phase settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CollisionSettings {
    pub max_contacts: usize,
    pub rim_samples: usize,
}

impl Default for CollisionSettings {
    fn default() -> Self {
        Self {
            max_contacts: DEFAULT_MAX_CONTACTS,
            rim_samples: DEFAULT_RIM_SAMPLES,
        }
    }
}

/// A geometry placed in the world for one collision query.
#[derive(Debug, Clone, Copy)]
pub struct Placed<'a, T> {
    pub id: GeomId,
    pub geom: &'a CollisionGeometry<T>,
    pub pose: Pose<T>,
}

/// Contact produced by a narrow-phase routine; normal points from the first
/// shape toward the second.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct RawContact<T> {
    pub position: Vector3<T>,
    pub normal: Vector3<T>,
    pub depth: T,
}

/// Distance tolerance under which touching features count as contact.
pub(crate) fn touch_tolerance<T: Scalar>(scale: T) -> T {
    T::epsilon().sqrt() * T::one().max(scale)
}

/// Keeps at most `keep` contacts: the deepest one, then greedily the points
/// that maximize the area spanned by the kept set.
pub(crate) fn reduce_contacts<T: Scalar>(contacts: Vec<RawContact<T>>, keep: usize) -> Vec<RawContact<T>> {
    if contacts.len() <= keep || keep == 0 {
        return contacts;
    }
    let mut chosen = Vec::with_capacity(keep);
    let deepest = argmax(&contacts, |c| c.depth);
    chosen.push(deepest);
    if keep > 1 {
        let p0 = contacts[deepest].position;
        chosen.push(argmax(&contacts, |c| (c.position - p0).norm_squared()));
    }
    if keep > 2 {
        let (p0, p1) = (contacts[chosen[0]].position, contacts[chosen[1]].position);
        chosen.push(argmax(&contacts, |c| {
            (p1 - p0).cross(&(c.position - p0)).norm_squared()
        }));
    }
    while chosen.len() < keep {
        let kept: Vec<Vector3<T>> = chosen.iter().map(|&i| contacts[i].position).collect();
        let next = argmax(&contacts, |c| {
            if chosen.iter().any(|&i| contacts[i].position == c.position) {
                return T::neg_infinity();
            }
            // area added by c: sum of triangle areas with each kept edge
            (0..kept.len()).fold(T::zero(), |acc, k| {
                let (a, b) = (kept[k], kept[(k + 1) % kept.len()]);
                acc + (b - a).cross(&(c.position - a)).norm()
            })
        });
        if chosen.contains(&next) {
            break;
        }
        chosen.push(next);
    }
    chosen.sort_unstable();
    chosen.dedup();
    chosen.into_iter().map(|i| contacts[i]).collect()
}

fn argmax<T: Scalar>(contacts: &[RawContact<T>], f: impl Fn(&RawContact<T>) -> T) -> usize {
    let mut best = 0;
    let mut best_v = T::neg_infinity();
    for (i, c) in contacts.iter().enumerate() {
        let v = f(c);
        if v > best_v {
            best_v = v;
            best = i;
        }
    }
    best
}

/// Generates the contact manifold between two placed geometries.
pub fn collide<T: Scalar>(
    a: &Placed<'_, T>,
    b: &Placed<'_, T>,
    settings: &CollisionSettings,
) -> Result<ContactManifold<T>, CollisionError> {
    let swap = (b.geom.shape.rank(), b.geom.body, b.id) < (a.geom.shape.rank(), a.geom.body, a.id);
    let (first, second) = if swap { (b, a) } else { (a, b) };
    let mut raw = narrow_phase(first, second, settings)?;
    if swap {
        for c in raw.iter_mut() {
            c.normal = -c.normal;
        }
    }
    raw.truncate(settings.max_contacts);

    let surface = a.geom.surface.combine(&b.geom.surface);
    let contacts = raw
        .into_iter()
        .map(|c| {
            let t1 = c.normal.any_perpendicular();
            ContactPoint {
                position: c.position,
                normal: c.normal,
                depth: c.depth.max(T::zero()),
                body1: a.geom.body,
                body2: b.geom.body,
                geom1: a.id,
                geom2: b.id,
                t1,
                t2: c.normal.cross(&t1),
                mu1: surface.mu_primary,
                mu2: surface.mu_secondary,
                restitution: surface.restitution,
                surface_velocity_1: T::zero(),
                surface_velocity_2: T::zero(),
            }
        })
        .collect();
    Ok(ContactManifold {
        geom1: a.id,
        geom2: b.id,
        body1: a.geom.body,
        body2: b.geom.body,
        contacts,
    })
}

fn narrow_phase<T: Scalar>(
    a: &Placed<'_, T>,
    b: &Placed<'_, T>,
    settings: &CollisionSettings,
) -> Result<Vec<RawContact<T>>, CollisionError> {
    use Shape::*;
    let (pa, pb) = (&a.pose, &b.pose);
    let out = match (&a.geom.shape, &b.geom.shape) {
        (Sphere { radius: ra }, Sphere { radius: rb }) => primitives::sphere_sphere(pa, *ra, pb, *rb),
        (Sphere { radius }, Box { half_extents }) => {
            primitives::flip(primitives::box_sphere(pb, half_extents, pa, *radius))
        }
        (
            Sphere { radius },
            Cylinder {
                radius: rc,
                half_length,
            },
        ) => primitives::flip(primitives::cylinder_sphere(pb, *rc, *half_length, pa, *radius)),
        (Sphere { radius }, StaticTriMesh(mesh)) => primitives::flip(trimesh::mesh_sphere(mesh, pb, pa, *radius)),
        (Box { half_extents: ha }, Box { half_extents: hb }) => box_box::box_box(pa, ha, pb, hb, settings.max_contacts),
        (Box { half_extents }, Cylinder { radius, half_length }) => primitives::flip(cylinder::cylinder_box(
            pb,
            *radius,
            *half_length,
            pa,
            half_extents,
            settings,
        )),
        (Box { half_extents }, StaticTriMesh(mesh)) => {
            let pts = trimesh::box_probe_points(pa, half_extents);
            primitives::flip(trimesh::mesh_points(mesh, pb, &pts, settings.max_contacts))
        }
        (Cylinder { radius, half_length }, StaticTriMesh(mesh)) => {
            let pts = cylinder::rim_points(pa, *radius, *half_length, settings.rim_samples);
            primitives::flip(trimesh::mesh_points(mesh, pb, &pts, settings.max_contacts))
        }
        (x, y) => return Err(CollisionError::UnsupportedPair(x.kind(), y.kind())),
    };
    Ok(out)
}

/// Returns every geometry pair whose inflated AABBs overlap and whose
/// group/mask filters admit each other, sorted by `(i, j)` with `i < j`.
/// Pairs on the same body and static–static pairs are skipped.
pub fn broad_phase<T: Scalar>(
    geoms: &[CollisionGeometry<T>],
    poses: &[Pose<T>],
    body_is_static: impl Fn(BodyId) -> bool,
) -> Vec<(GeomId, GeomId)> {
    let margin = T::of(BROAD_PHASE_MARGIN);
    let boxes: Vec<Aabb<T>> = geoms
        .iter()
        .zip(poses)
        .map(|(g, p)| g.shape.aabb(p).inflate(margin))
        .collect();
    // sweep along x
    let mut order: Vec<usize> = (0..geoms.len()).collect();
    order.sort_by(|&i, &j| {
        boxes[i]
            .min
            .x
            .partial_cmp(&boxes[j].min.x)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(i.cmp(&j))
    });
    let mut pairs = Vec::new();
    for (k, &i) in order.iter().enumerate() {
        for &j in &order[k + 1..] {
            if boxes[j].min.x > boxes[i].max.x {
                break;
            }
            let (gi, gj) = (&geoms[i], &geoms[j]);
            if gi.body == gj.body || (body_is_static(gi.body) && body_is_static(gj.body)) {
                continue;
            }
            if !gi.admits(gj) || !boxes[i].overlaps(&boxes[j]) {
                continue;
            }
            pairs.push(if i < j {
                (GeomId(i), GeomId(j))
            } else {
                (GeomId(j), GeomId(i))
            });
        }
    }
    pairs.sort();
    pairs
}
