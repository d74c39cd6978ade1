//! Small fixed-size linear algebra: 3-vectors, quaternions and 3×3 matrices.

use std::ops::{Add, AddAssign, Div, Index, Mul, MulAssign, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vector3<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Scalar> Vector3<T> {
    #[inline]
    pub const fn new(x: T, y: T, z: T) -> Self {
        Self { x, y, z }
    }

    #[inline]
    pub fn zeros() -> Self {
        Self::new(T::zero(), T::zero(), T::zero())
    }

    #[inline]
    pub fn unit_x() -> Self {
        Self::new(T::one(), T::zero(), T::zero())
    }

    #[inline]
    pub fn unit_y() -> Self {
        Self::new(T::zero(), T::one(), T::zero())
    }

    #[inline]
    pub fn unit_z() -> Self {
        Self::new(T::zero(), T::zero(), T::one())
    }

    /// Builds a vector from `f64` literals.
    #[inline]
    pub fn from_f64(x: f64, y: f64, z: f64) -> Self {
        Self::new(T::of(x), T::of(y), T::of(z))
    }

    #[inline]
    pub fn dot(&self, o: &Self) -> T {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    #[inline]
    pub fn cross(&self, o: &Self) -> Self {
        Self::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    #[inline]
    pub fn norm_squared(&self) -> T {
        self.dot(self)
    }

    #[inline]
    pub fn norm(&self) -> T {
        self.norm_squared().sqrt()
    }

    /// Unit vector in the same direction. Returns zero for the zero vector.
    #[inline]
    pub fn normalize(&self) -> Self {
        let n = self.norm();
        if n > T::zero() {
            *self / n
        } else {
            Self::zeros()
        }
    }

    /// Unit vector, or `None` when the norm is at most `eps`.
    #[inline]
    pub fn try_normalize(&self, eps: T) -> Option<Self> {
        let n = self.norm();
        if n > eps {
            Some(*self / n)
        } else {
            None
        }
    }

    #[inline]
    pub fn component_mul(&self, o: &Self) -> Self {
        Self::new(self.x * o.x, self.y * o.y, self.z * o.z)
    }

    #[inline]
    pub fn abs(&self) -> Self {
        Self::new(self.x.abs(), self.y.abs(), self.z.abs())
    }

    #[inline]
    pub fn min_components(&self, o: &Self) -> Self {
        Self::new(self.x.min(o.x), self.y.min(o.y), self.z.min(o.z))
    }

    #[inline]
    pub fn max_components(&self, o: &Self) -> Self {
        Self::new(self.x.max(o.x), self.y.max(o.y), self.z.max(o.z))
    }

    #[inline]
    pub fn max_abs(&self) -> T {
        self.x.abs().max(self.y.abs()).max(self.z.abs())
    }

    #[inline]
    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    #[inline]
    pub fn to_array(&self) -> [T; 3] {
        [self.x, self.y, self.z]
    }

    /// Any unit vector perpendicular to `self`, which must be non-zero.
    pub fn any_perpendicular(&self) -> Self {
        // cross with the axis least aligned with self
        let a = self.abs();
        let helper = if a.x <= a.y && a.x <= a.z {
            Self::unit_x()
        } else if a.y <= a.z {
            Self::unit_y()
        } else {
            Self::unit_z()
        };
        self.cross(&helper).normalize()
    }

    pub fn cast<U: Scalar>(&self) -> Vector3<U> {
        Vector3::new(
            U::of(self.x.to_f64_lossy()),
            U::of(self.y.to_f64_lossy()),
            U::of(self.z.to_f64_lossy()),
        )
    }
}

impl<T: Scalar> Index<usize> for Vector3<T> {
    type Output = T;

    fn index(&self, i: usize) -> &T {
        match i {
            0 => &self.x,
            1 => &self.y,
            2 => &self.z,
            _ => panic!("Vector3 index {i} out of range"),
        }
    }
}

impl<T: Scalar> Add for Vector3<T> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl<T: Scalar> Sub for Vector3<T> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl<T: Scalar> Neg for Vector3<T> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y, -self.z)
    }
}

impl<T: Scalar> Mul<T> for Vector3<T> {
    type Output = Self;
    #[inline]
    fn mul(self, s: T) -> Self {
        Self::new(self.x * s, self.y * s, self.z * s)
    }
}

impl<T: Scalar> Div<T> for Vector3<T> {
    type Output = Self;
    #[inline]
    fn div(self, s: T) -> Self {
        Self::new(self.x / s, self.y / s, self.z / s)
    }
}

impl<T: Scalar> AddAssign for Vector3<T> {
    #[inline]
    fn add_assign(&mut self, o: Self) {
        self.x += o.x;
        self.y += o.y;
        self.z += o.z;
    }
}

impl<T: Scalar> SubAssign for Vector3<T> {
    #[inline]
    fn sub_assign(&mut self, o: Self) {
        self.x -= o.x;
        self.y -= o.y;
        self.z -= o.z;
    }
}

impl<T: Scalar> MulAssign<T> for Vector3<T> {
    #[inline]
    fn mul_assign(&mut self, s: T) {
        self.x *= s;
        self.y *= s;
        self.z *= s;
    }
}

/// Row-major 3×3 matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Matrix3<T> {
    pub m: [[T; 3]; 3],
}

impl<T: Scalar> Matrix3<T> {
    pub fn zeros() -> Self {
        Self { m: [[T::zero(); 3]; 3] }
    }

    pub fn identity() -> Self {
        Self::diagonal(Vector3::new(T::one(), T::one(), T::one()))
    }

    pub fn diagonal(d: Vector3<T>) -> Self {
        let z = T::zero();
        Self {
            m: [[d.x, z, z], [z, d.y, z], [z, z, d.z]],
        }
    }

    pub fn from_rows(r0: Vector3<T>, r1: Vector3<T>, r2: Vector3<T>) -> Self {
        Self {
            m: [r0.to_array(), r1.to_array(), r2.to_array()],
        }
    }

    pub fn from_columns(c0: Vector3<T>, c1: Vector3<T>, c2: Vector3<T>) -> Self {
        Self::from_rows(c0, c1, c2).transpose()
    }

    #[inline]
    pub fn row(&self, i: usize) -> Vector3<T> {
        Vector3::new(self.m[i][0], self.m[i][1], self.m[i][2])
    }

    #[inline]
    pub fn column(&self, j: usize) -> Vector3<T> {
        Vector3::new(self.m[0][j], self.m[1][j], self.m[2][j])
    }

    #[inline]
    pub fn transpose(&self) -> Self {
        let m = &self.m;
        Self {
            m: [
                [m[0][0], m[1][0], m[2][0]],
                [m[0][1], m[1][1], m[2][1]],
                [m[0][2], m[1][2], m[2][2]],
            ],
        }
    }

    #[inline]
    pub fn mul_vec(&self, v: &Vector3<T>) -> Vector3<T> {
        let m = &self.m;
        Vector3::new(
            m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
            m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
            m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z,
        )
    }

    /// `selfᵀ · v` without forming the transpose.
    #[inline]
    pub fn tr_mul_vec(&self, v: &Vector3<T>) -> Vector3<T> {
        let m = &self.m;
        Vector3::new(
            m[0][0] * v.x + m[1][0] * v.y + m[2][0] * v.z,
            m[0][1] * v.x + m[1][1] * v.y + m[2][1] * v.z,
            m[0][2] * v.x + m[1][2] * v.y + m[2][2] * v.z,
        )
    }

    pub fn mul_mat(&self, o: &Self) -> Self {
        let mut out = Self::zeros();
        for i in 0..3 {
            for j in 0..3 {
                out.m[i][j] = self.m[i][0] * o.m[0][j] + self.m[i][1] * o.m[1][j] + self.m[i][2] * o.m[2][j];
            }
        }
        out
    }

    pub fn determinant(&self) -> T {
        let m = &self.m;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// Inverse via the adjugate; `None` for singular matrices.
    pub fn try_inverse(&self) -> Option<Self> {
        let det = self.determinant();
        if det == T::zero() || !det.is_finite() {
            return None;
        }
        let m = &self.m;
        let inv_det = T::one() / det;
        let mut out = Self::zeros();
        out.m[0][0] = (m[1][1] * m[2][2] - m[1][2] * m[2][1]) * inv_det;
        out.m[0][1] = (m[0][2] * m[2][1] - m[0][1] * m[2][2]) * inv_det;
        out.m[0][2] = (m[0][1] * m[1][2] - m[0][2] * m[1][1]) * inv_det;
        out.m[1][0] = (m[1][2] * m[2][0] - m[1][0] * m[2][2]) * inv_det;
        out.m[1][1] = (m[0][0] * m[2][2] - m[0][2] * m[2][0]) * inv_det;
        out.m[1][2] = (m[0][2] * m[1][0] - m[0][0] * m[1][2]) * inv_det;
        out.m[2][0] = (m[1][0] * m[2][1] - m[1][1] * m[2][0]) * inv_det;
        out.m[2][1] = (m[0][1] * m[2][0] - m[0][0] * m[2][1]) * inv_det;
        out.m[2][2] = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) * inv_det;
        Some(out)
    }

    pub fn scale(&self, s: T) -> Self {
        let mut out = *self;
        for row in out.m.iter_mut() {
            for v in row.iter_mut() {
                *v *= s;
            }
        }
        out
    }

    pub fn add(&self, o: &Self) -> Self {
        let mut out = *self;
        for i in 0..3 {
            for j in 0..3 {
                out.m[i][j] += o.m[i][j];
            }
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.m.iter().flatten().all(|v| v.is_finite())
    }

    /// `R · self · Rᵀ`, used to move inertia tensors between frames.
    pub fn rotated(&self, r: &Self) -> Self {
        r.mul_mat(self).mul_mat(&r.transpose())
    }
}

/// Hamilton quaternion `w + xi + yj + zk`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quaternion<T> {
    pub w: T,
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Scalar> Default for Quaternion<T> {
    fn default() -> Self {
        Self::identity()
    }
}

impl<T: Scalar> Quaternion<T> {
    #[inline]
    pub const fn new(w: T, x: T, y: T, z: T) -> Self {
        Self { w, x, y, z }
    }

    #[inline]
    pub fn identity() -> Self {
        Self::new(T::one(), T::zero(), T::zero(), T::zero())
    }

    pub fn from_axis_angle(axis: &Vector3<T>, angle: T) -> Self {
        let a = axis.normalize();
        let half = angle * T::of(0.5);
        let s = half.sin();
        Self::new(half.cos(), a.x * s, a.y * s, a.z * s)
    }

    /// Rotation from roll (x), pitch (y), yaw (z) applied in Z·Y·X order.
    pub fn from_rpy(roll: T, pitch: T, yaw: T) -> Self {
        let half = T::of(0.5);
        let (sr, cr) = (roll * half).sin_cos();
        let (sp, cp) = (pitch * half).sin_cos();
        let (sy, cy) = (yaw * half).sin_cos();
        Self::new(
            cr * cp * cy + sr * sp * sy,
            sr * cp * cy - cr * sp * sy,
            cr * sp * cy + sr * cp * sy,
            cr * cp * sy - sr * sp * cy,
        )
    }

    /// Inverse of [`Quaternion::from_rpy`].
    pub fn to_rpy(&self) -> (T, T, T) {
        let two = T::of(2.0);
        let (w, x, y, z) = (self.w, self.x, self.y, self.z);
        let roll = (two * (w * x + y * z)).atan2(T::one() - two * (x * x + y * y));
        let sp = (two * (w * y - z * x)).max(-T::one()).min(T::one());
        let pitch = sp.asin();
        let yaw = (two * (w * z + x * y)).atan2(T::one() - two * (y * y + z * z));
        (roll, pitch, yaw)
    }

    #[inline]
    pub fn dot(&self, o: &Self) -> T {
        self.w * o.w + self.x * o.x + self.y * o.y + self.z * o.z
    }

    #[inline]
    pub fn norm(&self) -> T {
        self.dot(self).sqrt()
    }

    pub fn normalize(&self) -> Self {
        let n = self.norm();
        Self::new(self.w / n, self.x / n, self.y / n, self.z / n)
    }

    #[inline]
    pub fn conjugate(&self) -> Self {
        Self::new(self.w, -self.x, -self.y, -self.z)
    }

    #[inline]
    pub fn mul(&self, o: &Self) -> Self {
        Self::new(
            self.w * o.w - self.x * o.x - self.y * o.y - self.z * o.z,
            self.w * o.x + self.x * o.w + self.y * o.z - self.z * o.y,
            self.w * o.y - self.x * o.z + self.y * o.w + self.z * o.x,
            self.w * o.z + self.x * o.y - self.y * o.x + self.z * o.w,
        )
    }

    /// Rotates `v` by this (unit) quaternion.
    #[inline]
    pub fn rotate(&self, v: &Vector3<T>) -> Vector3<T> {
        let u = Vector3::new(self.x, self.y, self.z);
        let two = T::of(2.0);
        let t = u.cross(v) * two;
        *v + t * self.w + u.cross(&t)
    }

    /// Rotates `v` by the inverse of this (unit) quaternion.
    #[inline]
    pub fn inverse_rotate(&self, v: &Vector3<T>) -> Vector3<T> {
        self.conjugate().rotate(v)
    }

    pub fn to_matrix(&self) -> Matrix3<T> {
        let (w, x, y, z) = (self.w, self.x, self.y, self.z);
        let one = T::one();
        let two = T::of(2.0);
        Matrix3 {
            m: [
                [
                    one - two * (y * y + z * z),
                    two * (x * y - w * z),
                    two * (x * z + w * y),
                ],
                [
                    two * (x * y + w * z),
                    one - two * (x * x + z * z),
                    two * (y * z - w * x),
                ],
                [
                    two * (x * z - w * y),
                    two * (y * z + w * x),
                    one - two * (x * x + y * y),
                ],
            ],
        }
    }

    /// First-order quaternion derivative step `q + ½·Δt·(0, ω)⊗q` followed by
    /// renormalization. `omega` is expressed in the world frame.
    pub fn integrate(&self, omega: &Vector3<T>, dt: T) -> Self {
        let h = dt * T::of(0.5);
        let dq = Quaternion::new(T::zero(), omega.x, omega.y, omega.z).mul(self);
        Self::new(
            self.w + dq.w * h,
            self.x + dq.x * h,
            self.y + dq.y * h,
            self.z + dq.z * h,
        )
        .normalize()
    }

    /// Geodesic angle to `o` in `[0, π]`, insensitive to the quaternion sign.
    pub fn angle_to(&self, o: &Self) -> T {
        let d = self.normalize().dot(&o.normalize()).abs().min(T::one());
        T::of(2.0) * d.acos()
    }

    pub fn is_finite(&self) -> bool {
        self.w.is_finite() && self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn cast<U: Scalar>(&self) -> Quaternion<U> {
        Quaternion::new(
            U::of(self.w.to_f64_lossy()),
            U::of(self.x.to_f64_lossy()),
            U::of(self.y.to_f64_lossy()),
            U::of(self.z.to_f64_lossy()),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    type V = Vector3<f64>;
    type Q = Quaternion<f64>;

    fn close(a: V, b: V, tol: f64) -> bool {
        (a - b).max_abs() <= tol
    }

    #[test]
    fn cross_is_right_handed() {
        assert_eq!(V::unit_x().cross(&V::unit_y()), V::unit_z());
        assert_eq!(V::unit_y().cross(&V::unit_z()), V::unit_x());
    }

    #[test]
    fn rotation_matches_matrix() {
        let q = Q::from_rpy(0.3, -0.7, 2.1);
        let v = V::new(0.4, -1.2, 3.3);
        assert!(close(q.rotate(&v), q.to_matrix().mul_vec(&v), 1e-12));
        assert!(close(q.inverse_rotate(&q.rotate(&v)), v, 1e-12));
    }

    #[test]
    fn rpy_round_trip() {
        let (r, p, y) = Q::from_rpy(0.2, 0.5, -1.3).to_rpy();
        assert!((r - 0.2).abs() < 1e-12);
        assert!((p - 0.5).abs() < 1e-12);
        assert!((y + 1.3).abs() < 1e-12);
    }

    #[test]
    fn yaw_rotates_x_to_y() {
        let q = Q::from_axis_angle(&V::unit_z(), PI / 2.0);
        assert!(close(q.rotate(&V::unit_x()), V::unit_y(), 1e-12));
    }

    #[test]
    fn inverse_of_rotation_matrix_is_transpose() {
        let r = Q::from_rpy(1.0, 0.2, 0.3).to_matrix();
        let inv = r.try_inverse().unwrap();
        let t = r.transpose();
        for i in 0..3 {
            for j in 0..3 {
                assert!((inv.m[i][j] - t.m[i][j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn singular_matrix_has_no_inverse() {
        assert!(Matrix3::<f64>::zeros().try_inverse().is_none());
    }

    #[test]
    fn angle_to_ignores_double_cover() {
        let q = Q::from_rpy(0.1, 0.2, 0.3);
        let neg = Q::new(-q.w, -q.x, -q.y, -q.z);
        assert!(q.angle_to(&neg) < 1e-7);
        let yaw = Q::from_axis_angle(&V::unit_z(), PI / 2.0);
        assert!((Q::identity().angle_to(&yaw) - PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn perpendicular_is_unit_and_orthogonal() {
        for v in [V::new(1.0, 0.0, 0.0), V::new(0.3, -2.0, 0.1), V::new(0.0, 0.0, -5.0)] {
            let p = v.any_perpendicular();
            assert!((p.norm() - 1.0).abs() < 1e-12);
            assert!(p.dot(&v).abs() < 1e-12);
        }
    }
}
