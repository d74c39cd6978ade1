use serde::{Deserialize, Serialize};

use super::{ConstraintRow, FrictionMode, RowKind, SolverSettings};
use crate::collision::ContactPoint;
use crate::dynamics::{BodyId, RigidBody};
use crate::math::Vector3;
use crate::scalar::Scalar;

/// Builds the normal row and two friction rows of one contact.
///
/// Friction rows target `surface_velocity_1/2`; with zero surface velocity
/// they stop relative tangential motion. Couplings and cone partners are
/// local indices (0 = normal row, 1 and 2 = friction rows) and are remapped
/// when the rows are added to a problem. Returns `None` when both bodies are
/// static.
pub fn rows_from_contact<T: Scalar>(
    c: &ContactPoint<T>,
    bodies: &[RigidBody<T>],
    dt: T,
    settings: &SolverSettings<T>,
) -> Option<[ConstraintRow<T>; 3]> {
    let b1 = &bodies[c.body1.0];
    let b2 = &bodies[c.body2.0];
    if b1.is_static && b2.is_static {
        return None;
    }
    let r1 = c.position - b1.center_of_mass_world();
    let r2 = c.position - b2.center_of_mass_world();
    let row = |kind: RowKind, d: Vector3<T>| ConstraintRow {
        kind,
        body1: c.body1,
        body2: c.body2,
        j1_lin: -d,
        j1_ang: -r1.cross(&d),
        j2_lin: d,
        j2_ang: r2.cross(&d),
        rhs: T::zero(),
        lower: T::zero(),
        upper: T::infinity(),
        coupling: None,
        mu: T::zero(),
        cone_partner: None,
        softness: settings.softness,
        bias: T::zero(),
    };

    let mut normal = row(RowKind::Normal, c.normal);
    normal.bias = (settings.erp * c.depth / dt).min(settings.max_correction_velocity);
    if c.restitution > T::zero() {
        let vn = normal.velocity(&b1.twist, &b2.twist);
        if vn < T::zero() {
            normal.rhs = -c.restitution * vn;
        }
    }

    let friction = |kind: RowKind, d: Vector3<T>, mu: T, target: T, partner: usize| {
        let mut f = row(kind, d);
        f.rhs = target;
        f.mu = mu;
        match settings.friction_mode {
            FrictionMode::Pyramid => {
                f.coupling = Some(0);
                f.upper = T::zero();
            }
            FrictionMode::Cone => {
                f.coupling = Some(0);
                f.upper = T::zero();
                f.cone_partner = Some(partner);
            }
            FrictionMode::PaperLiteral => {
                f.lower = -mu * dt;
                f.upper = mu * dt;
            }
        }
        f
    };
    Some([
        normal,
        friction(RowKind::Friction1, c.t1, c.mu1, c.surface_velocity_1, 2),
        friction(RowKind::Friction2, c.t2, c.mu2, c.surface_velocity_2, 1),
    ])
}

/// Revolute joint with an optional velocity motor about its axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HingeJoint<T> {
    pub body1: BodyId,
    pub body2: BodyId,
    /// Anchor in the body1 frame.
    pub anchor: Vector3<T>,
    /// The same anchor in the body2 frame.
    pub anchor2: Vector3<T>,
    /// Unit axis in the body1 frame.
    pub axis: Vector3<T>,
    /// Unit axis in the body2 frame.
    pub axis2: Vector3<T>,
    pub motor_target_velocity: T,
    pub motor_max_impulse: T,
    pub motor_enabled: bool,
}

impl<T: Scalar> HingeJoint<T> {
    /// Joint through a world-frame anchor and axis at the bodies' current poses.
    pub fn new(b1: &RigidBody<T>, b2: &RigidBody<T>, anchor_world: Vector3<T>, axis_world: Vector3<T>) -> Self {
        let axis_world = axis_world.normalize();
        Self {
            body1: b1.id,
            body2: b2.id,
            anchor: b1.pose.inverse_transform_point(&anchor_world),
            anchor2: b2.pose.inverse_transform_point(&anchor_world),
            axis: b1.pose.orientation.inverse_rotate(&axis_world),
            axis2: b2.pose.orientation.inverse_rotate(&axis_world),
            motor_target_velocity: T::zero(),
            motor_max_impulse: T::zero(),
            motor_enabled: false,
        }
    }

    pub fn with_motor(mut self, target_velocity: T, max_impulse: T) -> Self {
        self.motor_enabled = true;
        self.motor_target_velocity = target_velocity;
        self.motor_max_impulse = max_impulse.max(T::zero());
        self
    }
}

/// Three point-coincidence rows, two axis-alignment rows and, when the motor
/// is enabled, one motor row.
pub fn rows_from_hinge<T: Scalar>(
    j: &HingeJoint<T>,
    bodies: &[RigidBody<T>],
    dt: T,
    settings: &SolverSettings<T>,
) -> Vec<ConstraintRow<T>> {
    let b1 = &bodies[j.body1.0];
    let b2 = &bodies[j.body2.0];
    let p1 = b1.pose.transform_point(&j.anchor);
    let p2 = b2.pose.transform_point(&j.anchor2);
    let r1 = p1 - b1.center_of_mass_world();
    let r2 = p2 - b2.center_of_mass_world();
    let a1 = b1.pose.orientation.rotate(&j.axis).normalize();
    let a2 = b2.pose.orientation.rotate(&j.axis2).normalize();
    let k = settings.erp / dt;
    let base = |kind: RowKind| ConstraintRow {
        kind,
        body1: j.body1,
        body2: j.body2,
        j1_lin: Vector3::zeros(),
        j1_ang: Vector3::zeros(),
        j2_lin: Vector3::zeros(),
        j2_ang: Vector3::zeros(),
        rhs: T::zero(),
        lower: T::neg_infinity(),
        upper: T::infinity(),
        coupling: None,
        mu: T::zero(),
        cone_partner: None,
        softness: settings.softness,
        bias: T::zero(),
    };

    let mut rows = Vec::with_capacity(6);
    let err = p2 - p1;
    for e in [Vector3::unit_x(), Vector3::unit_y(), Vector3::unit_z()] {
        let mut r = base(RowKind::JointLinear);
        r.j1_lin = -e;
        r.j1_ang = -r1.cross(&e);
        r.j2_lin = e;
        r.j2_ang = r2.cross(&e);
        r.bias = -k * err.dot(&e);
        rows.push(r);
    }
    let p = a1.any_perpendicular();
    let q = a1.cross(&p);
    let mis = a1.cross(&a2);
    for d in [p, q] {
        let mut r = base(RowKind::JointAngular);
        r.j1_ang = -d;
        r.j2_ang = d;
        r.bias = -k * mis.dot(&d);
        rows.push(r);
    }
    if j.motor_enabled {
        let mut r = base(RowKind::Motor);
        r.j1_ang = -a1;
        r.j2_ang = a1;
        r.rhs = j.motor_target_velocity;
        r.lower = -j.motor_max_impulse;
        r.upper = j.motor_max_impulse;
        rows.push(r);
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::super::{solve_pgs, BodySnapshot, LcpProblem};
    use super::*;
    use crate::collision::GeomId;
    use crate::dynamics::{unconstrained_velocity, MassProperties, Pose, World};
    use crate::math::Matrix3;

    type V = Vector3<f64>;

    fn contact(body1: usize, body2: usize, pos: V) -> ContactPoint<f64> {
        ContactPoint {
            position: pos,
            normal: V::unit_z(),
            depth: 0.0,
            body1: BodyId(body1),
            body2: BodyId(body2),
            geom1: GeomId(0),
            geom2: GeomId(1),
            t1: V::unit_x(),
            t2: V::unit_y(),
            mu1: 1000.0,
            mu2: 1000.0,
            restitution: 0.0,
            surface_velocity_1: 0.0,
            surface_velocity_2: 0.0,
        }
    }

    fn floor_and_box() -> World<f64> {
        let mut w = World::new(0.001).unwrap();
        w.add_static("floor", Pose::identity());
        let mp = MassProperties::solid_box(1.0, V::new(0.5, 0.5, 0.5)).unwrap();
        w.add_dynamic("box", Pose::from_translation(V::new(0.0, 0.0, 0.5)), mp);
        w
    }

    fn problem(w: &World<f64>, rows: Vec<ConstraintRow<f64>>) -> LcpProblem<f64> {
        let bodies = w
            .bodies
            .iter()
            .map(|b| BodySnapshot::of(b, unconstrained_velocity(b, &w.gravity, w.step_size)))
            .collect();
        let mut p = LcpProblem::new(bodies, w.step_size);
        p.add_contact_rows(vec![rows.try_into().unwrap()]);
        p
    }

    #[test]
    fn resting_box_supports_weight() {
        let w = floor_and_box();
        let s = SolverSettings::default();
        let rows = rows_from_contact(&contact(0, 1, V::zeros()), &w.bodies, 0.001, &s).unwrap();
        let p = problem(&w, rows.to_vec());
        let sol = solve_pgs(&p, 50, 1e-12).unwrap();
        let normal = sol.lambda[0];
        // softness 1e-9 perturbs the impulse at the 1e-12 level
        assert!((normal - 0.00981).abs() < 1e-9);
        assert_eq!(sol.lambda[1], 0.0);
        assert_eq!(sol.lambda[2], 0.0);
    }

    #[test]
    fn surface_velocity_drives_box_in_one_step() {
        // closed form: contact under the com, so the tangential row is
        // decoupled from the normal row; Δv = λ/m must reach the target
        let w = floor_and_box();
        let s = SolverSettings::default();
        let mut c = contact(0, 1, V::zeros());
        c.surface_velocity_1 = 0.3;
        let rows = rows_from_contact(&c, &w.bodies, 0.001, &s).unwrap();
        assert_eq!(rows[1].rhs, 0.3);
        let p = problem(&w, rows.to_vec());
        let sol = solve_pgs(&p, 50, 1e-14).unwrap();
        // the contact is 0.5 m below the com, so a tangential impulse also
        // spins the box; the row still targets 0.3 at the contact point
        let v = p.velocities_after(&sol.lambda);
        let contact_vel = v[1].linear + v[1].angular.cross(&(V::zeros() - V::new(0.0, 0.0, 0.5)));
        assert!((contact_vel.x - 0.3).abs() < 1e-6);
        // effective mass along x at the contact: 1/(1/m + r²/I) with I = m(1+1)/12
        let m_eff = 1.0 / (1.0 + 0.25 / (2.0 / 12.0));
        assert!((sol.lambda[1] - m_eff * 0.3).abs() < 1e-6);
    }

    #[test]
    fn surface_velocity_at_com_gives_m_times_v() {
        let w = floor_and_box();
        let s = SolverSettings::default();
        let mut c = contact(0, 1, V::new(0.0, 0.0, 0.5));
        c.surface_velocity_1 = 0.3;
        let rows = rows_from_contact(&c, &w.bodies, 0.001, &s).unwrap();
        let p = problem(&w, rows.to_vec());
        let sol = solve_pgs(&p, 50, 1e-14).unwrap();
        assert!((sol.lambda[1] - 0.3).abs() < 1e-6);
    }

    #[test]
    fn zero_friction_rows_have_zero_bounds() {
        let w = floor_and_box();
        let s = SolverSettings::default();
        let mut c = contact(0, 1, V::zeros());
        c.mu1 = 0.0;
        c.mu2 = 0.0;
        let rows = rows_from_contact(&c, &w.bodies, 0.001, &s).unwrap();
        for r in &rows[1..] {
            assert_eq!(r.bounds(&[0.5, 0.0, 0.0]), (-0.0, 0.0));
        }
    }

    #[test]
    fn static_pair_has_no_rows() {
        let mut w = World::new(0.001).unwrap();
        w.add_static("a", Pose::identity());
        w.add_static("b", Pose::identity());
        assert!(rows_from_contact(&contact(0, 1, V::zeros()), &w.bodies, 0.001, &SolverSettings::default()).is_none());
    }

    #[test]
    fn paper_literal_bounds_are_constant() {
        let w = floor_and_box();
        let s = SolverSettings {
            friction_mode: FrictionMode::PaperLiteral,
            ..SolverSettings::default()
        };
        let mut c = contact(0, 1, V::zeros());
        c.mu1 = 2.0;
        let rows = rows_from_contact(&c, &w.bodies, 0.001, &s).unwrap();
        assert_eq!(rows[1].coupling, None);
        assert_eq!(rows[1].bounds(&[0.0, 0.0, 0.0]), (-0.002, 0.002));
    }

    fn wheel_world(inertia: f64) -> World<f64> {
        let mut w = World::new(0.001).unwrap();
        w.add_static("ground", Pose::identity());
        let mp = MassProperties::new(1.0, Matrix3::diagonal(V::new(inertia, inertia, inertia)), V::zeros()).unwrap();
        w.add_dynamic("wheel", Pose::from_translation(V::new(0.0, 0.0, 1.0)), mp);
        w.gravity = V::zeros();
        w
    }

    fn solve_hinge(w: &World<f64>, j: &HingeJoint<f64>) -> (Vec<ConstraintRow<f64>>, Vec<f64>, LcpProblem<f64>) {
        let rows = rows_from_hinge(j, &w.bodies, 0.001, &SolverSettings::default());
        let bodies = w.bodies.iter().map(|b| BodySnapshot::of(b, b.twist)).collect();
        let mut p = LcpProblem::new(bodies, 0.001);
        p.rows = rows.clone();
        let s = solve_pgs(&p, 100, 1e-15).unwrap();
        (rows, s.lambda, p)
    }

    #[test]
    fn free_hinge_leaves_axis_rotation() {
        let mut w = wheel_world(0.01);
        w.bodies[1].twist.angular = V::new(0.0, 3.0, 0.5);
        let j = HingeJoint::new(&w.bodies[0], &w.bodies[1], V::new(0.0, 0.0, 1.0), V::unit_y());
        let (rows, lambda, p) = solve_hinge(&w, &j);
        assert_eq!(rows.len(), 5);
        let v = p.velocities_after(&lambda);
        assert!((v[1].angular.y - 3.0).abs() < 1e-9);
        assert!(v[1].angular.z.abs() < 1e-6);
    }

    #[test]
    fn motor_reaches_target_in_one_step() {
        let w = wheel_world(0.01);
        let j = HingeJoint::new(&w.bodies[0], &w.bodies[1], V::new(0.0, 0.0, 1.0), V::unit_y()).with_motor(10.0, 1.0);
        let (rows, lambda, p) = solve_hinge(&w, &j);
        assert_eq!(rows.len(), 6);
        // oracle: λ = I·Δω
        assert!((lambda[5] - 0.01 * 10.0).abs() < 1e-9);
        assert!((p.velocities_after(&lambda)[1].angular.y - 10.0).abs() < 1e-6);
    }

    #[test]
    fn motor_impulse_is_clamped() {
        let w = wheel_world(0.01);
        let j = HingeJoint::new(&w.bodies[0], &w.bodies[1], V::new(0.0, 0.0, 1.0), V::unit_y()).with_motor(10.0, 0.01);
        let (_, lambda, p) = solve_hinge(&w, &j);
        assert_eq!(lambda[5], 0.01);
        assert!((p.velocities_after(&lambda)[1].angular.y - 1.0).abs() < 1e-9);
    }
}
