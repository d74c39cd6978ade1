//! The per-step pipeline: controllers, collision, track annotation, row
//! assembly with warm starting, PGS, integration.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::collision::{
    broad_phase, collide, CollisionError, CollisionGeometry, CollisionSettings, ContactManifold, GeomId, Placed,
};
use crate::dynamics::{
    integrate_poses, integrate_velocities, unconstrained_velocity, BodyId, DynamicsError, Pose, World,
};
use crate::math::Vector3;
use crate::scalar::Scalar;
use crate::solver::{
    rows_from_contact, rows_from_hinge, solve_pgs, BodySnapshot, ContactRowIndex, HingeJoint, LcpProblem, LcpSolution,
    SolverError, SolverSettings,
};
use crate::track::TrackedVehicle;

/// Contacts closer than this in the body1 frame are treated as the same
/// contact across steps (m).
pub const WARM_START_MATCH_DISTANCE: f64 = 0.01;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("collision failed at step {step}: {source}")]
    Collision { step: u64, source: CollisionError },
    #[error("solver failed at step {step}: {source}")]
    Solver { step: u64, source: SolverError },
    #[error("dynamics failed at step {step}: {source}")]
    Dynamics { step: u64, source: DynamicsError },
}

impl SimError {
    pub fn step(&self) -> u64 {
        match self {
            SimError::Collision { step, .. } | SimError::Solver { step, .. } | SimError::Dynamics { step, .. } => *step,
        }
    }
}

/// What a controller may read and modify before each step.
pub struct ControlContext<'a, T> {
    pub time: T,
    pub dt: T,
    pub world: &'a mut World<T>,
    pub joints: &'a mut [HingeJoint<T>],
    pub tracked: &'a mut [TrackedVehicle<T>],
}

pub trait Controller<T: Scalar>: Send {
    fn update(&mut self, ctx: &mut ControlContext<'_, T>);
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StepStats {
    pub contacts: usize,
    pub rows: usize,
    pub iterations: usize,
    pub residual: f64,
}

#[derive(Debug, Clone)]
struct CachedContact<T> {
    pair: (GeomId, GeomId),
    local: Vector3<T>,
    normal: T,
    friction: Vector3<T>,
}

#[derive(Debug, Clone, Default)]
struct WarmStart<T> {
    contacts: Vec<CachedContact<T>>,
    joints: Vec<Vec<T>>,
}

/// A world together with its collision geometry, joints and tracks.
#[derive(Debug, Clone)]
pub struct Simulation<T> {
    pub world: World<T>,
    pub geometries: Vec<CollisionGeometry<T>>,
    pub joints: Vec<HingeJoint<T>>,
    pub tracked: Vec<TrackedVehicle<T>>,
    pub solver: SolverSettings<T>,
    pub collision: CollisionSettings,
    /// Keep the assembled problem of the next steps in `last_problem`.
    pub capture_lcp: bool,
    pub last_problem: Option<(LcpProblem<T>, LcpSolution<T>)>,
    pub last_contacts: Vec<ContactManifold<T>>,
    steps: u64,
    warm: WarmStart<T>,
}

impl<T: Scalar> Simulation<T> {
    pub fn new(world: World<T>) -> Self {
        Self {
            world,
            geometries: Vec::new(),
            joints: Vec::new(),
            tracked: Vec::new(),
            solver: SolverSettings::default(),
            collision: CollisionSettings::default(),
            capture_lcp: false,
            last_problem: None,
            last_contacts: Vec::new(),
            steps: 0,
            warm: WarmStart {
                contacts: Vec::new(),
                joints: Vec::new(),
            },
        }
    }

    pub fn add_geometry(&mut self, g: CollisionGeometry<T>) -> Result<GeomId, CollisionError> {
        g.shape.validate()?;
        g.surface.validate()?;
        self.geometries.push(g);
        Ok(GeomId(self.geometries.len() - 1))
    }

    pub fn steps_taken(&self) -> u64 {
        self.steps
    }

    pub fn geometry_poses(&self) -> Vec<Pose<T>> {
        self.geometries
            .iter()
            .map(|g| self.world.body(g.body).pose.compose(&g.local_pose))
            .collect()
    }

    /// Runs broad and narrow phase at the current poses.
    pub fn detect_contacts(&self) -> Result<Vec<ContactManifold<T>>, CollisionError> {
        let poses = self.geometry_poses();
        let pairs = broad_phase(&self.geometries, &poses, |b| self.world.body(b).is_static);
        let mut out = Vec::new();
        for (i, j) in pairs {
            let a = Placed {
                id: i,
                geom: &self.geometries[i.0],
                pose: poses[i.0],
            };
            let b = Placed {
                id: j,
                geom: &self.geometries[j.0],
                pose: poses[j.0],
            };
            let m = collide(&a, &b, &self.collision)?;
            if !m.is_empty() {
                out.push(m);
            }
        }
        Ok(out)
    }

    /// Advances the simulation by one step.
    pub fn step(&mut self, controllers: &mut [&mut dyn Controller<T>]) -> Result<StepStats, SimError> {
        let step = self.steps;
        let dt = self.world.step_size;

        {
            let mut ctx = ControlContext {
                time: self.world.time,
                dt,
                world: &mut self.world,
                joints: &mut self.joints,
                tracked: &mut self.tracked,
            };
            for c in controllers.iter_mut() {
                c.update(&mut ctx);
            }
        }

        let mut manifolds = self
            .detect_contacts()
            .map_err(|source| SimError::Collision { step, source })?;
        for v in &self.tracked {
            let pose = self.world.body(v.body).pose;
            v.annotate_contacts(&mut manifolds, &pose);
        }

        let bodies = &self.world.bodies;
        let snapshots = bodies
            .iter()
            .map(|b| BodySnapshot::of(b, unconstrained_velocity(b, &self.world.gravity, dt)))
            .collect();
        let mut problem = LcpProblem::new(snapshots, dt);

        let mut joint_ranges = Vec::with_capacity(self.joints.len());
        for j in &self.joints {
            let start = problem.rows.len();
            problem.add_rows(rows_from_hinge(j, bodies, dt, &self.solver));
            joint_ranges.push(start..problem.rows.len());
        }

        let mut contact_refs = Vec::new();
        let mut triples = Vec::new();
        for (mi, m) in manifolds.iter().enumerate() {
            for (ci, c) in m.contacts.iter().enumerate() {
                if let Some(rows) = rows_from_contact(c, bodies, dt, &self.solver) {
                    triples.push(rows);
                    contact_refs.push((mi, ci));
                }
            }
        }
        let index = problem.add_contact_rows(triples);

        if self.solver.warm_start {
            problem.initial_lambda = self.warm_start_lambda(&problem, &manifolds, &contact_refs, &index, &joint_ranges);
        }

        let solution = solve_pgs(&problem, self.solver.max_iterations, self.solver.tolerance)
            .map_err(|source| SimError::Solver { step, source })?;

        self.store_warm_start(
            &problem,
            &solution.lambda,
            &manifolds,
            &contact_refs,
            &index,
            &joint_ranges,
        );

        let impulses = problem.body_impulses(&solution.lambda);
        integrate_velocities(&mut self.world, &impulses);
        integrate_poses(&mut self.world);
        self.world.clear_forces();
        self.steps += 1;
        self.world
            .check_finite()
            .map_err(|source| SimError::Dynamics { step, source })?;

        let stats = StepStats {
            contacts: contact_refs.len(),
            rows: problem.rows.len(),
            iterations: solution.iterations_used,
            residual: solution.residual.to_f64_lossy(),
        };
        if self.capture_lcp {
            self.last_problem = Some((problem, solution));
        }
        self.last_contacts = manifolds;
        Ok(stats)
    }

    fn warm_start_lambda(
        &self,
        problem: &LcpProblem<T>,
        manifolds: &[ContactManifold<T>],
        refs: &[(usize, usize)],
        index: &[ContactRowIndex],
        joint_ranges: &[std::ops::Range<usize>],
    ) -> Vec<T> {
        let mut lambda = vec![T::zero(); problem.rows.len()];
        for (range, old) in joint_ranges.iter().zip(&self.warm.joints) {
            if range.len() == old.len() {
                lambda[range.clone()].copy_from_slice(old);
            }
        }
        let max_d2 = T::of(WARM_START_MATCH_DISTANCE * WARM_START_MATCH_DISTANCE);
        for (&(mi, ci), ix) in refs.iter().zip(index) {
            let m = &manifolds[mi];
            let c = &m.contacts[ci];
            let local = self.world.body(c.body1).pose.inverse_transform_point(&c.position);
            let mut best: Option<(&CachedContact<T>, T)> = None;
            for old in self.warm.contacts.iter().filter(|o| o.pair == (m.geom1, m.geom2)) {
                let d2 = (old.local - local).norm_squared();
                if d2 < max_d2 && best.is_none_or(|(_, b)| d2 < b) {
                    best = Some((old, d2));
                }
            }
            if let Some((old, _)) = best {
                lambda[ix.normal] = old.normal;
                for (slot, dir) in ix.friction.iter().zip([c.t1, c.t2]) {
                    if let Some(i) = slot {
                        lambda[*i] = old.friction.dot(&dir);
                    }
                }
            }
        }
        lambda
    }

    fn store_warm_start(
        &mut self,
        problem: &LcpProblem<T>,
        lambda: &[T],
        manifolds: &[ContactManifold<T>],
        refs: &[(usize, usize)],
        index: &[ContactRowIndex],
        joint_ranges: &[std::ops::Range<usize>],
    ) {
        self.warm.joints = joint_ranges.iter().map(|r| lambda[r.clone()].to_vec()).collect();
        self.warm.contacts.clear();
        for (&(mi, ci), ix) in refs.iter().zip(index) {
            let m = &manifolds[mi];
            let c = &m.contacts[ci];
            let mut friction = Vector3::zeros();
            for slot in ix.friction.iter().flatten() {
                friction += problem.rows[*slot].j2_lin * lambda[*slot];
            }
            self.warm.contacts.push(CachedContact {
                pair: (m.geom1, m.geom2),
                local: self.world.body(c.body1).pose.inverse_transform_point(&c.position),
                normal: lambda[ix.normal],
                friction,
            });
        }
    }

    /// Total impulse carried by normal rows of the last captured problem
    /// acting on `body`.
    pub fn captured_normal_impulse(&self, body: BodyId) -> Option<Vector3<T>> {
        let (p, s) = self.last_problem.as_ref()?;
        let mut total = Vector3::zeros();
        for (r, l) in p.rows.iter().zip(&s.lambda) {
            if r.kind != crate::solver::RowKind::Normal {
                continue;
            }
            if r.body2 == body {
                total += r.j2_lin * *l;
            }
            if r.body1 == body {
                total += r.j1_lin * *l;
            }
        }
        Some(total)
    }
}
