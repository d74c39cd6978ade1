//! Constraint rows and the projected Gauss-Seidel solver for the per-step
//! mixed LCP.
//!
//! Each row constrains the relative velocity `J·v` of two bodies:
//!
//! ```text
//! J·v = j1_lin·v1 + j1_ang·ω1 + j2_lin·v2 + j2_ang·ω2
//! w   = J·v − (rhs + bias) + softness·λ
//! λ = lower ⇒ w ≥ 0,  lower < λ < upper ⇒ w = 0,  λ = upper ⇒ w ≤ 0
//! ```
//!
//! Impulses `Jᵀλ` are applied to body2 with a positive sign along the row
//! direction and to body1 with a negative sign.

mod pgs;
mod rows;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{BodyId, BodyImpulse, RigidBody, Twist};
use crate::math::{Matrix3, Vector3};
use crate::scalar::Scalar;

pub use pgs::solve_pgs;
pub use rows::{rows_from_contact, rows_from_hinge, HingeJoint};

/// How friction impulse bounds are formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum FrictionMode {
    /// Each friction row bounded by `±μ·λ_n`, re-evaluated every sweep.
    #[default]
    Pyramid,
    /// The pair `(λ_t1, λ_t2)` projected onto the ellipse with semi-axes `μ1·λ_n`, `μ2·λ_n`.
    Cone,
    /// Constant bounds `±μ·Δt`, with `μ` read as a force limit (N).
    PaperLiteral,
}

impl FrictionMode {
    pub fn name(&self) -> &'static str {
        match self {
            FrictionMode::Pyramid => "pyramid",
            FrictionMode::Cone => "cone",
            FrictionMode::PaperLiteral => "paper-literal",
        }
    }
}

impl std::str::FromStr for FrictionMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pyramid" => Ok(Self::Pyramid),
            "cone" => Ok(Self::Cone),
            "paper-literal" => Ok(Self::PaperLiteral),
            other => Err(format!(
                "unknown friction mode '{other}' (expected pyramid, cone or paper-literal)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, bound(deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct SolverSettings<T> {
    pub max_iterations: usize,
    pub tolerance: T,
    pub erp: T,
    pub max_correction_velocity: T,
    pub softness: T,
    /// Set per run from the model; configured through `SimConfig`.
    #[serde(skip)]
    pub friction_mode: FrictionMode,
    pub warm_start: bool,
}

impl<T: Scalar> Default for SolverSettings<T> {
    fn default() -> Self {
        Self {
            max_iterations: 50,
            tolerance: T::of(1e-9),
            erp: T::of(0.2),
            max_correction_velocity: T::of(0.2),
            softness: T::of(1e-9),
            friction_mode: FrictionMode::Pyramid,
            warm_start: true,
        }
    }
}

impl<T: Scalar> SolverSettings<T> {
    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |field: &'static str| Err(SolverError::InvalidSetting(field));
        if self.max_iterations == 0 {
            return bad("max_iterations");
        }
        if !(self.tolerance >= T::zero()) {
            return bad("tolerance");
        }
        if !(self.erp >= T::zero() && self.erp <= T::one()) {
            return bad("erp");
        }
        if !(self.max_correction_velocity >= T::zero()) {
            return bad("max_correction_velocity");
        }
        if !(self.softness >= T::zero()) {
            return bad("softness");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowKind {
    Normal,
    Friction1,
    Friction2,
    JointLinear,
    JointAngular,
    Motor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintRow<T> {
    pub kind: RowKind,
    pub body1: BodyId,
    pub body2: BodyId,
    pub j1_lin: Vector3<T>,
    pub j1_ang: Vector3<T>,
    pub j2_lin: Vector3<T>,
    pub j2_ang: Vector3<T>,
    /// Target constraint-space velocity.
    pub rhs: T,
    pub lower: T,
    pub upper: T,
    /// Index of the normal row whose impulse scales this row's bounds.
    pub coupling: Option<usize>,
    /// Friction coefficient used with `coupling`.
    pub mu: T,
    /// The other friction row of the same contact, for cone projection.
    pub cone_partner: Option<usize>,
    pub softness: T,
    /// Stabilization velocity added to `rhs`.
    pub bias: T,
}

impl<T: Scalar> ConstraintRow<T> {
    pub fn target(&self) -> T {
        self.rhs + self.bias
    }

    /// `J·v` for the given body twists.
    pub fn velocity(&self, t1: &Twist<T>, t2: &Twist<T>) -> T {
        self.j1_lin.dot(&t1.linear)
            + self.j1_ang.dot(&t1.angular)
            + self.j2_lin.dot(&t2.linear)
            + self.j2_ang.dot(&t2.angular)
    }

    /// Bounds at the given normal impulses.
    pub fn bounds(&self, lambda: &[T]) -> (T, T) {
        match self.coupling {
            Some(n) => {
                let b = self.mu * lambda[n].max(T::zero());
                (-b, b)
            }
            None => (self.lower, self.upper),
        }
    }
}

/// Mass and velocity of one body as seen by the solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BodySnapshot<T> {
    pub inv_mass: T,
    pub inv_inertia: Matrix3<T>,
    pub com: Vector3<T>,
    /// Velocity before constraint impulses.
    pub velocity: Twist<T>,
}

impl<T: Scalar> BodySnapshot<T> {
    pub fn of(body: &RigidBody<T>, velocity: Twist<T>) -> Self {
        Self {
            inv_mass: body.inv_mass(),
            inv_inertia: body.inv_inertia_world(),
            com: body.center_of_mass_world(),
            velocity,
        }
    }

    pub fn is_static(&self) -> bool {
        self.inv_mass == T::zero() && self.inv_inertia == Matrix3::zeros()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LcpProblem<T> {
    pub rows: Vec<ConstraintRow<T>>,
    /// Indexed by `BodyId`.
    pub bodies: Vec<BodySnapshot<T>>,
    pub dt: T,
    /// Starting impulses (warm start); zeros when empty.
    pub initial_lambda: Vec<T>,
}

impl<T: Scalar> LcpProblem<T> {
    pub fn new(bodies: Vec<BodySnapshot<T>>, dt: T) -> Self {
        Self {
            rows: Vec::new(),
            bodies,
            dt,
            initial_lambda: Vec::new(),
        }
    }

    /// Appends rows without coupling (joints, motors).
    pub fn add_rows(&mut self, rows: impl IntoIterator<Item = ConstraintRow<T>>) {
        self.rows.extend(rows);
    }

    /// Appends contact row triples from [`rows_from_contact`]: all normal
    /// rows first, then the friction rows in contact order. Friction rows
    /// that can never carry impulse (μ = 0) are dropped.
    pub fn add_contact_rows(&mut self, triples: Vec<[ConstraintRow<T>; 3]>) -> Vec<ContactRowIndex> {
        let base = self.rows.len();
        let mut index = Vec::with_capacity(triples.len());
        let mut friction = Vec::new();
        for (k, [n, f1, f2]) in triples.into_iter().enumerate() {
            self.rows.push(n);
            let normal = base + k;
            let keep1 = f1.mu > T::zero();
            let keep2 = f2.mu > T::zero();
            let mut slots = [None, None];
            for (slot, (mut f, keep)) in [(f1, keep1), (f2, keep2)].into_iter().enumerate() {
                if !keep {
                    continue;
                }
                if f.coupling.is_some() {
                    f.coupling = Some(normal);
                }
                slots[slot] = Some(friction.len());
                friction.push(f);
            }
            index.push(ContactRowIndex {
                normal,
                friction: slots,
            });
        }
        let fbase = self.rows.len();
        for ix in index.iter_mut() {
            ix.friction = ix.friction.map(|s| s.map(|i| fbase + i));
            let [a, b] = ix.friction;
            for (own, other) in [(a, b), (b, a)] {
                if let Some(i) = own {
                    let f = &mut friction[i - fbase];
                    f.cone_partner = if f.cone_partner.is_some() { other } else { None };
                }
            }
        }
        self.rows.extend(friction);
        index
    }

    /// Per-body impulses `Jᵀλ`.
    pub fn body_impulses(&self, lambda: &[T]) -> Vec<BodyImpulse<T>> {
        let mut out = vec![BodyImpulse::zero(); self.bodies.len()];
        for (row, &l) in self.rows.iter().zip(lambda) {
            let b1 = &mut out[row.body1.0];
            b1.linear += row.j1_lin * l;
            b1.angular += row.j1_ang * l;
            let b2 = &mut out[row.body2.0];
            b2.linear += row.j2_lin * l;
            b2.angular += row.j2_ang * l;
        }
        out
    }

    /// Body velocities after applying `lambda`.
    pub fn velocities_after(&self, lambda: &[T]) -> Vec<Twist<T>> {
        self.body_impulses(lambda)
            .iter()
            .zip(&self.bodies)
            .map(|(imp, b)| Twist {
                linear: b.velocity.linear + imp.linear * b.inv_mass,
                angular: b.velocity.angular + b.inv_inertia.mul_vec(&imp.angular),
            })
            .collect()
    }

    /// Largest complementarity violation of `lambda`.
    pub fn residual(&self, lambda: &[T]) -> T {
        let v = self.velocities_after(lambda);
        let mut worst = T::zero();
        let w_of = |i: usize| {
            let row = &self.rows[i];
            row.velocity(&v[row.body1.0], &v[row.body2.0]) - row.target() + row.softness * lambda[i]
        };
        for (i, row) in self.rows.iter().enumerate() {
            let w = w_of(i);
            if let (Some(j), Some(n)) = (row.cone_partner, row.coupling) {
                worst = worst.max(self.cone_violation(lambda, i, j, n, w, w_of(j)));
                continue;
            }
            let (lo, hi) = row.bounds(lambda);
            let scale = T::of(1e-12) * T::one().max(hi.abs().min(lo.abs()));
            let viol = if lambda[i] <= lo + scale && lambda[i] >= hi - scale {
                T::zero()
            } else if lambda[i] <= lo + scale {
                (-w).max(T::zero())
            } else if lambda[i] >= hi - scale {
                w.max(T::zero())
            } else {
                w.abs()
            };
            worst = worst.max(viol);
        }
        worst
    }

    /// Violation of row `i` of a cone pair: zero slip inside the ellipse,
    /// slip anti-parallel to the impulse on its boundary.
    fn cone_violation(&self, lambda: &[T], i: usize, j: usize, n: usize, wi: T, wj: T) -> T {
        let ln = lambda[n].max(T::zero());
        let (mi, mj) = (self.rows[i].mu, self.rows[j].mu);
        let (li, lj) = (lambda[i], lambda[j]);
        let inside = |x: T, mu: T| if mu > T::zero() { (x / mu) * (x / mu) } else { T::zero() };
        let e = inside(li, mi) + inside(lj, mj);
        let limit = ln * ln;
        if e < limit * (T::one() - T::of(1e-9)) || limit == T::zero() {
            return if limit == T::zero() { T::zero() } else { wi.abs() };
        }
        let norm = (li * li + lj * lj).sqrt();
        if norm == T::zero() {
            return T::zero();
        }
        // slip component along the impulse must be ≤ 0, the rest zero
        let along = (wi * li + wj * lj) / norm;
        let across = wi - along * li / norm;
        along.max(T::zero()).max(across.abs())
    }
}

/// Where the rows of one contact ended up in an [`LcpProblem`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ContactRowIndex {
    pub normal: usize,
    pub friction: [Option<usize>; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LcpSolution<T> {
    pub lambda: Vec<T>,
    pub iterations_used: usize,
    pub residual: T,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("non-finite impulse in row {row} ({kind:?}) between bodies {body1:?} and {body2:?} at sweep {iteration}")]
    NonFinite {
        row: usize,
        kind: RowKind,
        body1: BodyId,
        body2: BodyId,
        iteration: usize,
    },
    #[error("invalid solver setting: {0}")]
    InvalidSetting(&'static str),
}
