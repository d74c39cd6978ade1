//! Rigid-body simulation of tracked vehicles with an LCP contact solver and
//! Contact Surface Motion (CSM) track friction.
//!
//! The physics core ([`math`], [`dynamics`], [`collision`], [`solver`],
//! [`sim`], [`track`]) is generic over the scalar type; aliases for `f64` and
//! `f32` are exported at the crate root. Vehicle assembly, scenarios and the
//! parameter search run in `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod collision;
pub mod dynamics;
pub mod math;
pub mod scalar;
pub mod scenario;
pub mod search;
pub mod sim;
pub mod solver;
pub mod track;
pub mod vehicle;

pub use scalar::Scalar;

pub type Vec3 = math::Vector3<f64>;
pub type Quat = math::Quaternion<f64>;
pub type Mat3 = math::Matrix3<f64>;
pub type Pose = dynamics::Pose<f64>;
pub type Twist = dynamics::Twist<f64>;
pub type RigidBody = dynamics::RigidBody<f64>;
pub type World = dynamics::World<f64>;
pub type ContactPoint = collision::ContactPoint<f64>;

pub type Vec3f = math::Vector3<f32>;
pub type Quatf = math::Quaternion<f32>;
pub type Posef = dynamics::Pose<f32>;
pub type Worldf = dynamics::World<f32>;
