//! Rigid-body state and the semi-implicit Euler time stepper.
//!
//! Velocities are advanced first from external forces and constraint
//! impulses, then poses are advanced with the *new* velocities:
//!
//! ```text
//! v[n+1] = v[n] + M⁻¹ (F_e Δt + Jᵀλ)
//! q[n+1] = q[n] + v[n+1] Δt
//! ```

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math::{Matrix3, Quaternion, Vector3};
use crate::scalar::Scalar;

/// Index of a body inside its [`World`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BodyId(pub usize);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("step size must be positive and finite, got {0}")]
    InvalidStepSize(f64),
    #[error("mass must be positive and finite, got {0}")]
    InvalidMass(f64),
    #[error("inertia tensor is not positive definite")]
    InvalidInertia,
    #[error("body {0:?} does not exist")]
    UnknownBody(BodyId),
    #[error("non-finite state on body {body:?} at t = {time}")]
    NonFinite { body: BodyId, time: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose<T> {
    pub position: Vector3<T>,
    pub orientation: Quaternion<T>,
}

impl<T: Scalar> Default for Pose<T> {
    fn default() -> Self {
        Self::identity()
    }
}

impl<T: Scalar> Pose<T> {
    pub fn identity() -> Self {
        Self {
            position: Vector3::zeros(),
            orientation: Quaternion::identity(),
        }
    }

    pub fn new(position: Vector3<T>, orientation: Quaternion<T>) -> Self {
        Self { position, orientation }
    }

    pub fn from_translation(position: Vector3<T>) -> Self {
        Self::new(position, Quaternion::identity())
    }

    /// Maps a point from this frame into the parent frame.
    #[inline]
    pub fn transform_point(&self, p: &Vector3<T>) -> Vector3<T> {
        self.orientation.rotate(p) + self.position
    }

    /// Maps a parent-frame point into this frame.
    #[inline]
    pub fn inverse_transform_point(&self, p: &Vector3<T>) -> Vector3<T> {
        self.orientation.inverse_rotate(&(*p - self.position))
    }

    /// `self ∘ other`: `other` expressed relative to `self`.
    pub fn compose(&self, other: &Self) -> Self {
        Self {
            position: self.transform_point(&other.position),
            orientation: self.orientation.mul(&other.orientation).normalize(),
        }
    }

    pub fn inverse(&self) -> Self {
        let inv = self.orientation.conjugate();
        Self {
            position: -inv.rotate(&self.position),
            orientation: inv,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Twist<T> {
    pub linear: Vector3<T>,
    pub angular: Vector3<T>,
}

impl<T: Scalar> Twist<T> {
    pub fn zero() -> Self {
        Self {
            linear: Vector3::zeros(),
            angular: Vector3::zeros(),
        }
    }

    pub fn norm(&self) -> T {
        (self.linear.norm_squared() + self.angular.norm_squared()).sqrt()
    }
}

/// Mass and inertia of a body. Static bodies carry zero inverse mass and
/// zero inverse inertia.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MassProperties<T> {
    pub mass: T,
    pub inertia_body: Matrix3<T>,
    pub center_of_mass: Vector3<T>,
    pub inv_mass: T,
    pub inv_inertia_body: Matrix3<T>,
}

impl<T: Scalar> MassProperties<T> {
    pub fn new(mass: T, inertia_body: Matrix3<T>, center_of_mass: Vector3<T>) -> Result<Self, DynamicsError> {
        if !(mass > T::zero()) || !mass.is_finite() {
            return Err(DynamicsError::InvalidMass(mass.to_f64_lossy()));
        }
        if !is_symmetric_positive_definite(&inertia_body) {
            return Err(DynamicsError::InvalidInertia);
        }
        let inv_inertia_body = inertia_body.try_inverse().ok_or(DynamicsError::InvalidInertia)?;
        Ok(Self {
            mass,
            inertia_body,
            center_of_mass,
            inv_mass: T::one() / mass,
            inv_inertia_body,
        })
    }

    /// Infinite mass.
    pub fn fixed() -> Self {
        Self {
            mass: T::infinity(),
            inertia_body: Matrix3::zeros(),
            center_of_mass: Vector3::zeros(),
            inv_mass: T::zero(),
            inv_inertia_body: Matrix3::zeros(),
        }
    }

    /// Solid box with the given half extents, centered at the origin.
    pub fn solid_box(mass: T, half_extents: Vector3<T>) -> Result<Self, DynamicsError> {
        let (a, b, c) = (
            half_extents.x * T::of(2.0),
            half_extents.y * T::of(2.0),
            half_extents.z * T::of(2.0),
        );
        let k = mass / T::of(12.0);
        let inertia = Matrix3::diagonal(Vector3::new(
            k * (b * b + c * c),
            k * (a * a + c * c),
            k * (a * a + b * b),
        ));
        Self::new(mass, inertia, Vector3::zeros())
    }

    /// Solid cylinder with its axis along local y.
    pub fn solid_cylinder_y(mass: T, radius: T, half_length: T) -> Result<Self, DynamicsError> {
        let h = half_length * T::of(2.0);
        let axial = mass * radius * radius * T::of(0.5);
        let transverse = mass * (T::of(3.0) * radius * radius + h * h) / T::of(12.0);
        let inertia = Matrix3::diagonal(Vector3::new(transverse, axial, transverse));
        Self::new(mass, inertia, Vector3::zeros())
    }

    pub fn solid_sphere(mass: T, radius: T) -> Result<Self, DynamicsError> {
        let i = T::of(0.4) * mass * radius * radius;
        Self::new(mass, Matrix3::diagonal(Vector3::new(i, i, i)), Vector3::zeros())
    }
}

fn is_symmetric_positive_definite<T: Scalar>(m: &Matrix3<T>) -> bool {
    let a = &m.m;
    let tol = T::of(1e-9) * (a[0][0].abs() + a[1][1].abs() + a[2][2].abs());
    for i in 0..3 {
        for j in 0..3 {
            if !a[i][j].is_finite() || (a[i][j] - a[j][i]).abs() > tol {
                return false;
            }
        }
    }
    // Sylvester's criterion on leading minors
    let m1 = a[0][0];
    let m2 = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    m1 > T::zero() && m2 > T::zero() && m.determinant() > T::zero()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RigidBody<T> {
    pub id: BodyId,
    pub name: String,
    pub pose: Pose<T>,
    pub twist: Twist<T>,
    pub mass_props: MassProperties<T>,
    pub external_force: Vector3<T>,
    pub external_torque: Vector3<T>,
    pub is_static: bool,
}

impl<T: Scalar> RigidBody<T> {
    pub fn center_of_mass_world(&self) -> Vector3<T> {
        self.pose.transform_point(&self.mass_props.center_of_mass)
    }

    /// `R · I⁻¹ · Rᵀ`; zero for static bodies.
    pub fn inv_inertia_world(&self) -> Matrix3<T> {
        if self.is_static {
            return Matrix3::zeros();
        }
        let r = self.pose.orientation.to_matrix();
        self.mass_props.inv_inertia_body.rotated(&r)
    }

    pub fn inertia_world(&self) -> Matrix3<T> {
        let r = self.pose.orientation.to_matrix();
        self.mass_props.inertia_body.rotated(&r)
    }

    #[inline]
    pub fn inv_mass(&self) -> T {
        if self.is_static {
            T::zero()
        } else {
            self.mass_props.inv_mass
        }
    }

    /// Velocity of a world-space point rigidly attached to this body.
    pub fn point_velocity(&self, point: &Vector3<T>) -> Vector3<T> {
        let r = *point - self.center_of_mass_world();
        self.twist.linear + self.twist.angular.cross(&r)
    }

    pub fn kinetic_energy(&self) -> T {
        if self.is_static {
            return T::zero();
        }
        let half = T::of(0.5);
        let lin = self.mass_props.mass * self.twist.linear.norm_squared();
        let w = self.twist.angular;
        let ang = w.dot(&self.inertia_world().mul_vec(&w));
        half * (lin + ang)
    }

    pub fn linear_momentum(&self) -> Vector3<T> {
        if self.is_static {
            Vector3::zeros()
        } else {
            self.twist.linear * self.mass_props.mass
        }
    }

    fn is_finite(&self) -> bool {
        self.pose.position.is_finite()
            && self.pose.orientation.is_finite()
            && self.twist.linear.is_finite()
            && self.twist.angular.is_finite()
    }
}

/// Outcome of [`apply_force_at_point`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForceApplication {
    Applied,
    IgnoredStatic,
}

/// Accumulates a world-frame force acting at a world-frame point.
pub fn apply_force_at_point<T: Scalar>(
    body: &mut RigidBody<T>,
    force: Vector3<T>,
    point: Vector3<T>,
) -> ForceApplication {
    if body.is_static {
        return ForceApplication::IgnoredStatic;
    }
    let lever = point - body.center_of_mass_world();
    body.external_force += force;
    body.external_torque += lever.cross(&force);
    ForceApplication::Applied
}

/// Linear/angular impulse to apply to one body during velocity integration.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BodyImpulse<T> {
    pub linear: Vector3<T>,
    pub angular: Vector3<T>,
}

impl<T: Scalar> BodyImpulse<T> {
    pub fn zero() -> Self {
        Self {
            linear: Vector3::zeros(),
            angular: Vector3::zeros(),
        }
    }
}

/// Upper bound on the per-step gyroscopic velocity change relative to |ω|.
pub const GYROSCOPIC_MAX_RELATIVE_CHANGE: f64 = 0.01;

/// Velocity a body would have after one step under external forces only
/// (gravity, accumulated force/torque and the clamped gyroscopic term).
pub fn unconstrained_velocity<T: Scalar>(body: &RigidBody<T>, gravity: &Vector3<T>, dt: T) -> Twist<T> {
    if body.is_static {
        return body.twist;
    }
    let inv_i = body.inv_inertia_world();
    let linear = body.twist.linear + *gravity * dt + body.external_force * (body.mass_props.inv_mass * dt);
    let w = body.twist.angular;
    let mut angular = w + inv_i.mul_vec(&(body.external_torque * dt));
    let gyro = w.cross(&body.inertia_world().mul_vec(&w));
    if gyro.norm_squared() > T::zero() {
        let mut dw = inv_i.mul_vec(&gyro) * dt;
        let limit = w.norm() * T::of(GYROSCOPIC_MAX_RELATIVE_CHANGE);
        let n = dw.norm();
        if n > limit {
            dw *= limit / n;
        }
        angular -= dw;
    }
    Twist { linear, angular }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct World<T> {
    pub bodies: Vec<RigidBody<T>>,
    pub gravity: Vector3<T>,
    pub time: T,
    pub step_size: T,
}

/// Default step size: 1 ms.
pub const DEFAULT_STEP_SIZE: f64 = 0.001;

impl<T: Scalar> World<T> {
    pub fn new(step_size: T) -> Result<Self, DynamicsError> {
        if !(step_size > T::zero()) || !step_size.is_finite() {
            return Err(DynamicsError::InvalidStepSize(step_size.to_f64_lossy()));
        }
        Ok(Self {
            bodies: Vec::new(),
            gravity: Vector3::from_f64(0.0, 0.0, -9.81),
            time: T::zero(),
            step_size,
        })
    }

    pub fn add_dynamic(&mut self, name: impl Into<String>, pose: Pose<T>, mass_props: MassProperties<T>) -> BodyId {
        self.push(name.into(), pose, mass_props, false)
    }

    pub fn add_static(&mut self, name: impl Into<String>, pose: Pose<T>) -> BodyId {
        self.push(name.into(), pose, MassProperties::fixed(), true)
    }

    fn push(&mut self, name: String, pose: Pose<T>, mass_props: MassProperties<T>, is_static: bool) -> BodyId {
        let id = BodyId(self.bodies.len());
        self.bodies.push(RigidBody {
            id,
            name,
            pose,
            twist: Twist::zero(),
            mass_props,
            external_force: Vector3::zeros(),
            external_torque: Vector3::zeros(),
            is_static,
        });
        id
    }

    pub fn body(&self, id: BodyId) -> &RigidBody<T> {
        &self.bodies[id.0]
    }

    pub fn body_mut(&mut self, id: BodyId) -> &mut RigidBody<T> {
        &mut self.bodies[id.0]
    }

    pub fn get(&self, id: BodyId) -> Result<&RigidBody<T>, DynamicsError> {
        self.bodies.get(id.0).ok_or(DynamicsError::UnknownBody(id))
    }

    pub fn clear_forces(&mut self) {
        for b in &mut self.bodies {
            b.external_force = Vector3::zeros();
            b.external_torque = Vector3::zeros();
        }
    }

    pub fn kinetic_energy(&self) -> T {
        self.bodies
            .iter()
            .map(|b| b.kinetic_energy())
            .fold(T::zero(), |a, e| a + e)
    }

    /// Kinetic plus gravitational potential energy.
    pub fn mechanical_energy(&self) -> T {
        let potential = self
            .bodies
            .iter()
            .filter(|b| !b.is_static)
            .map(|b| -b.mass_props.mass * self.gravity.dot(&b.center_of_mass_world()))
            .fold(T::zero(), |a, e| a + e);
        self.kinetic_energy() + potential
    }

    pub fn linear_momentum(&self) -> Vector3<T> {
        self.bodies
            .iter()
            .map(|b| b.linear_momentum())
            .fold(Vector3::zeros(), |a, e| a + e)
    }

    pub fn check_finite(&self) -> Result<(), DynamicsError> {
        match self.bodies.iter().find(|b| !b.is_finite()) {
            Some(b) => Err(DynamicsError::NonFinite {
                body: b.id,
                time: self.time.to_f64_lossy(),
            }),
            None => Ok(()),
        }
    }
}

/// Advances velocities by external forces plus constraint impulses.
/// `impulses` is indexed by body; a shorter slice means zero impulse for
/// the remaining bodies.
pub fn integrate_velocities<T: Scalar>(world: &mut World<T>, impulses: &[BodyImpulse<T>]) {
    let dt = world.step_size;
    let gravity = world.gravity;
    for (i, body) in world.bodies.iter_mut().enumerate() {
        if body.is_static {
            continue;
        }
        let mut next = unconstrained_velocity(body, &gravity, dt);
        if let Some(p) = impulses.get(i) {
            next.linear += p.linear * body.mass_props.inv_mass;
            next.angular += body.inv_inertia_world().mul_vec(&p.angular);
        }
        body.twist = next;
    }
}

/// Advances poses with the current velocities and the world clock by Δt.
pub fn integrate_poses<T: Scalar>(world: &mut World<T>) {
    let dt = world.step_size;
    for body in world.bodies.iter_mut() {
        if body.is_static {
            continue;
        }
        let com_local = body.mass_props.center_of_mass;
        let com = body.center_of_mass_world() + body.twist.linear * dt;
        let q = body.pose.orientation.integrate(&body.twist.angular, dt);
        body.pose.orientation = q;
        body.pose.position = com - q.rotate(&com_local);
    }
    world.time += dt;
}
