//! Static triangle meshes.
//!
//! Support is approximate: convex shapes are probed with a fixed set of
//! points (box vertices, cylinder rim samples) tested against each triangle,
//! and spheres use exact closest-point-on-triangle queries.

use serde::{Deserialize, Serialize};

use super::box_box::Obb;
use super::{touch_tolerance, Aabb, CollisionError, RawContact};
use crate::dynamics::Pose;
use crate::math::Vector3;
use crate::scalar::Scalar;

/// Probe points deeper than this below a triangle are ignored (m).
pub const MAX_PROBE_DEPTH: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriMesh<T> {
    vertices: Vec<Vector3<T>>,
    triangles: Vec<[usize; 3]>,
}

impl<T: Scalar> TriMesh<T> {
    /// Triangles are wound counter-clockwise seen from outside.
    pub fn new(vertices: Vec<Vector3<T>>, triangles: Vec<[usize; 3]>) -> Result<Self, CollisionError> {
        let ok = !triangles.is_empty()
            && triangles.iter().all(|t| t.iter().all(|&i| i < vertices.len()))
            && triangles.iter().all(|t| {
                let [a, b, c] = t.map(|i| vertices[i]);
                (b - a).cross(&(c - a)).norm() > T::zero()
            });
        if ok {
            Ok(Self { vertices, triangles })
        } else {
            Err(CollisionError::InvalidShape("trimesh"))
        }
    }

    /// Union of axis-aligned boxes given as (center, half extents).
    pub fn from_boxes(boxes: &[(Vector3<T>, Vector3<T>)]) -> Result<Self, CollisionError> {
        let mut vertices = Vec::with_capacity(8 * boxes.len());
        let mut triangles = Vec::with_capacity(12 * boxes.len());
        // vertex index bit k set ⇔ + side on axis k
        const FACES: [[usize; 4]; 6] = [
            [0, 4, 6, 2], // -x
            [1, 3, 7, 5], // +x
            [0, 1, 5, 4], // -y
            [2, 6, 7, 3], // +y
            [0, 2, 3, 1], // -z
            [4, 5, 7, 6], // +z
        ];
        for (c, h) in boxes {
            let base = vertices.len();
            for i in 0..8 {
                let s = |k: usize| if (i >> k) & 1 == 1 { T::one() } else { -T::one() };
                vertices.push(*c + Vector3::new(s(0) * h.x, s(1) * h.y, s(2) * h.z));
            }
            for f in FACES {
                triangles.push([base + f[0], base + f[1], base + f[2]]);
                triangles.push([base + f[0], base + f[2], base + f[3]]);
            }
        }
        Self::new(vertices, triangles)
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn vertices(&self) -> &[Vector3<T>] {
        &self.vertices
    }

    pub fn aabb(&self, pose: &Pose<T>) -> Aabb<T> {
        let mut min = Vector3::new(T::infinity(), T::infinity(), T::infinity());
        let mut max = -min;
        for v in &self.vertices {
            let w = pose.transform_point(v);
            min = min.min_components(&w);
            max = max.max_components(&w);
        }
        Aabb { min, max }
    }

    fn world_triangles(&self, pose: &Pose<T>) -> Vec<[Vector3<T>; 3]> {
        self.triangles
            .iter()
            .map(|t| t.map(|i| pose.transform_point(&self.vertices[i])))
            .collect()
    }
}

fn triangle_normal<T: Scalar>(t: &[Vector3<T>; 3]) -> Vector3<T> {
    (t[1] - t[0]).cross(&(t[2] - t[0])).normalize()
}

/// Barycentric inside test for a point already in the triangle plane.
fn projects_inside<T: Scalar>(t: &[Vector3<T>; 3], n: &Vector3<T>, p: &Vector3<T>, tol: T) -> bool {
    (0..3).all(|k| {
        let (a, b) = (t[k], t[(k + 1) % 3]);
        (b - a).cross(&(*p - a)).dot(n) >= -tol
    })
}

/// Closest point on a triangle (Ericson's region test).
fn closest_on_triangle<T: Scalar>(t: &[Vector3<T>; 3], p: &Vector3<T>) -> Vector3<T> {
    let [a, b, c] = *t;
    let (ab, ac, ap) = (b - a, c - a, *p - a);
    let (d1, d2) = (ab.dot(&ap), ac.dot(&ap));
    let z = T::zero();
    if d1 <= z && d2 <= z {
        return a;
    }
    let bp = *p - b;
    let (d3, d4) = (ab.dot(&bp), ac.dot(&bp));
    if d3 >= z && d4 <= d3 {
        return b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= z && d1 >= z && d3 <= z {
        return a + ab * (d1 / (d1 - d3));
    }
    let cp = *p - c;
    let (d5, d6) = (ab.dot(&cp), ac.dot(&cp));
    if d6 >= z && d5 <= d6 {
        return c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= z && d2 >= z && d6 <= z {
        return a + ac * (d2 / (d2 - d6));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= z && (d4 - d3) >= z && (d5 - d6) >= z {
        return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));
    }
    let denom = T::one() / (va + vb + vc);
    a + ab * (vb * denom) + ac * (vc * denom)
}

/// Normal points from the mesh toward the sphere.
pub(crate) fn mesh_sphere<T: Scalar>(mesh: &TriMesh<T>, mesh_pose: &Pose<T>, ps: &Pose<T>, r: T) -> Vec<RawContact<T>> {
    let c = ps.position;
    let tol = touch_tolerance(r);
    let mut best: Option<RawContact<T>> = None;
    for t in mesh.world_triangles(mesh_pose) {
        let n = triangle_normal(&t);
        if (c - t[0]).dot(&n) < T::zero() {
            continue;
        }
        let q = closest_on_triangle(&t, &c);
        let d = c - q;
        let dist = d.norm();
        if dist > r + tol {
            continue;
        }
        let normal = d.try_normalize(T::of(1e-12)).unwrap_or(n);
        let depth = (r - dist).max(T::zero());
        let contact = RawContact {
            position: (q + (c - normal * r)) * T::of(0.5),
            normal,
            depth,
        };
        if best.is_none_or(|b| depth > b.depth) {
            best = Some(contact);
        }
    }
    best.into_iter().collect()
}

/// Tests probe points of a convex shape against the mesh; normals point from
/// the mesh toward the shape.
pub(crate) fn mesh_points<T: Scalar>(
    mesh: &TriMesh<T>,
    mesh_pose: &Pose<T>,
    points: &[Vector3<T>],
    max_contacts: usize,
) -> Vec<RawContact<T>> {
    let tris: Vec<_> = mesh
        .world_triangles(mesh_pose)
        .into_iter()
        .map(|t| (t, triangle_normal(&t)))
        .collect();
    let tol = touch_tolerance(T::one());
    let limit = T::of(MAX_PROBE_DEPTH);
    let mut out = Vec::new();
    for p in points {
        // the shallowest penetrated face is the exit direction
        let mut best: Option<(T, Vector3<T>)> = None;
        for (t, n) in &tris {
            let s = (*p - t[0]).dot(n);
            if s > tol || s < -limit {
                continue;
            }
            if !projects_inside(t, n, &(*p - *n * s), tol) {
                continue;
            }
            let depth = (-s).max(T::zero());
            if best.is_none_or(|(d, _)| depth < d) {
                best = Some((depth, *n));
            }
        }
        if let Some((depth, n)) = best {
            out.push(RawContact {
                position: *p + n * (depth * T::of(0.5)),
                normal: n,
                depth,
            });
        }
    }
    out.sort_by(|x, y| y.depth.partial_cmp(&x.depth).unwrap_or(std::cmp::Ordering::Equal));
    out.truncate(max_contacts);
    out
}

pub(crate) fn box_probe_points<T: Scalar>(pose: &Pose<T>, half: &Vector3<T>) -> Vec<Vector3<T>> {
    Obb::new(pose, half).vertices().to_vec()
}

#[cfg(test)]
mod tests {
    use super::*;

    type V = Vector3<f64>;

    fn slab() -> TriMesh<f64> {
        TriMesh::from_boxes(&[(V::new(0.0, 0.0, -0.5), V::new(5.0, 5.0, 0.5))]).unwrap()
    }

    #[test]
    fn box_mesh_normals_point_outward() {
        let m = slab();
        let center = V::new(0.0, 0.0, -0.5);
        for t in m.world_triangles(&Pose::identity()) {
            let n = triangle_normal(&t);
            assert!((t[0] - center).dot(&n) > 0.0);
        }
    }

    #[test]
    fn sphere_on_mesh_matches_plane() {
        let c = mesh_sphere(
            &slab(),
            &Pose::identity(),
            &Pose::from_translation(V::new(0.3, 0.2, 0.4)),
            0.5,
        );
        assert_eq!(c.len(), 1);
        assert!((c[0].depth - 0.1).abs() < 1e-12);
        assert!((c[0].normal - V::unit_z()).max_abs() < 1e-12);
    }

    #[test]
    fn box_probes_on_mesh() {
        let pts = box_probe_points(&Pose::from_translation(V::new(0.0, 0.0, 0.49)), &V::new(0.5, 0.5, 0.5));
        let c = mesh_points(&slab(), &Pose::identity(), &pts, 8);
        assert_eq!(c.len(), 4);
        for p in &c {
            assert!((p.depth - 0.01).abs() < 1e-12);
            assert!((p.normal - V::unit_z()).max_abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_mesh_rejected() {
        assert!(TriMesh::new(vec![V::zeros(); 3], vec![[0, 1, 2]]).is_err());
        assert!(TriMesh::<f64>::new(vec![], vec![]).is_err());
    }
}
