//! World assets, the eight benchmark scenarios and the scenario runner.

pub mod metrics;
pub mod reference;

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::collision::{CollisionError, CollisionGeometry, CollisionSettings, Shape, SurfaceParams};
use crate::dynamics::{DynamicsError, World};
use crate::sim::{SimError, Simulation};
use crate::solver::{FrictionMode, SolverSettings};
use crate::vehicle::{build_vehicle, CommandKind, DriveCommand, VehicleConfig, VehicleError, VehicleHandle};
use crate::{Pose, Quat, Vec3};

pub use metrics::{angular_offset, MetricSpec, Trajectory, TrajectorySample, SAMPLE_PERIOD};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("unknown scenario '{0}' (valid: {valid})", valid = SCENARIO_NAMES.join(", "))]
    UnknownScenario(String),
    #[error("scenario needs a reference trajectory but none is available")]
    MissingReference,
    #[error("reference trajectory ends at {available:.3} s but the run lasts {needed:.3} s")]
    ReferenceTooShort { needed: f64, available: f64 },
    #[error("reference sample at {reference_t} s does not match trajectory sample at {t} s")]
    ReferenceMisaligned { t: f64, reference_t: f64 },
    #[error("reference line {line}: {message}")]
    ReferenceFormat { line: usize, message: String },
    #[error("empty trajectory")]
    EmptyTrajectory,
    #[error("invalid run settings: {0}")]
    InvalidSettings(String),
    #[error(transparent)]
    Vehicle(#[from] VehicleError),
    #[error(transparent)]
    Collision(#[from] CollisionError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

pub const SCENARIO_NAMES: [&str; 8] = [
    "straight",
    "rotate",
    "circular",
    "ramp",
    "staircase_down",
    "stand_on_staircase",
    "pallet",
    "back_and_forth",
];

/// Static obstacles, all made of boxes. A floor with its top at z = 0 is
/// always present.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WorldAsset {
    Floor,
    /// Incline rising along +x from `start_x` up to a platform of `height`.
    Ramp {
        incline: f64,
        height: f64,
        start_x: f64,
    },
    /// Stairs descending along +x from a landing whose edge is at x = 0.
    Staircase {
        step_rise: f64,
        step_run: f64,
        steps: usize,
    },
    /// EUR-style pallet with its front face at `start_x`.
    Pallet {
        height: f64,
        start_x: f64,
    },
}

pub const BOARD_THICKNESS: f64 = 0.022;
const LANDING_LENGTH: f64 = 1.5;
const PLATFORM_LENGTH: f64 = 2.0;
const RAMP_THICKNESS: f64 = 0.2;

impl WorldAsset {
    pub fn ramp() -> Self {
        WorldAsset::Ramp {
            incline: 15f64.to_radians(),
            height: 0.4,
            start_x: 0.6,
        }
    }

    pub fn staircase() -> Self {
        WorldAsset::Staircase {
            step_rise: 0.17,
            step_run: 0.29,
            steps: 6,
        }
    }

    pub fn pallet() -> Self {
        WorldAsset::Pallet {
            height: 0.144,
            start_x: 0.8,
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let ok = match *self {
            WorldAsset::Floor => true,
            WorldAsset::Ramp { incline, height, .. } => incline > 0.0 && incline < 1.2 && height > 0.0,
            WorldAsset::Staircase {
                step_rise,
                step_run,
                steps,
            } => step_rise > 0.0 && step_run > 0.0 && steps >= 1,
            WorldAsset::Pallet { height, .. } => height > 3.0 * BOARD_THICKNESS,
        };
        if ok {
            Ok(())
        } else {
            Err(ScenarioError::InvalidSettings(format!(
                "asset dimensions out of range: {self:?}"
            )))
        }
    }

    /// Boxes as (center, rotation, half extents), floor excluded.
    pub fn boxes(&self) -> Vec<(Vec3, Quat, Vec3)> {
        let aligned = |min: [f64; 3], max: [f64; 3]| {
            let c = Vec3::new(
                (min[0] + max[0]) / 2.0,
                (min[1] + max[1]) / 2.0,
                (min[2] + max[2]) / 2.0,
            );
            let h = Vec3::new(
                (max[0] - min[0]) / 2.0,
                (max[1] - min[1]) / 2.0,
                (max[2] - min[2]) / 2.0,
            );
            (c, Quat::identity(), h)
        };
        match *self {
            WorldAsset::Floor => Vec::new(),
            WorldAsset::Ramp {
                incline,
                height,
                start_x,
            } => {
                let (s, c) = incline.sin_cos();
                let run = height / incline.tan();
                // extended below the floor so the foot is flush
                let extra = 0.5;
                let slope_len = height / s + extra;
                let top_mid = Vec3::new(start_x + (run - extra * c) / 2.0, (height - extra * s) / 2.0, 0.0);
                let top_mid = Vec3::new(top_mid.x, 0.0, top_mid.y);
                let normal = Vec3::new(-s, 0.0, c);
                let center = top_mid - normal * (RAMP_THICKNESS / 2.0);
                let q = Quat::from_axis_angle(&Vec3::unit_y(), -incline);
                vec![
                    (center, q, Vec3::new(slope_len / 2.0, 1.5, RAMP_THICKNESS / 2.0)),
                    aligned(
                        [start_x + run, -1.5, 0.0],
                        [start_x + run + PLATFORM_LENGTH, 1.5, height],
                    ),
                ]
            }
            WorldAsset::Staircase {
                step_rise,
                step_run,
                steps,
            } => {
                let top = step_rise * steps as f64;
                let mut v = vec![aligned([-LANDING_LENGTH, -1.0, 0.0], [0.0, 1.0, top])];
                for k in 1..steps {
                    let x0 = (k - 1) as f64 * step_run;
                    v.push(aligned(
                        [x0, -1.0, 0.0],
                        [x0 + step_run, 1.0, top - k as f64 * step_rise],
                    ));
                }
                v
            }
            WorldAsset::Pallet { height, start_x } => {
                let t = BOARD_THICKNESS;
                let block = height - 3.0 * t;
                let (length, half_w) = (1.2, 0.4);
                let x = |a: f64, b: f64| [start_x + a, start_x + b];
                let mut v = Vec::new();
                // top deck boards along x
                let deck = [
                    (-0.4, -0.255),
                    (-0.2025, -0.1025),
                    (-0.05, 0.05),
                    (0.1025, 0.2025),
                    (0.255, 0.4),
                ];
                for (y0, y1) in deck {
                    v.push(aligned([start_x, y0, height - t], [start_x + length, y1, height]));
                }
                let rows = [(0.0, 0.145), (0.5275, 0.6725), (1.055, 1.2)];
                for (a, b) in rows {
                    let [x0, x1] = x(a, b);
                    v.push(aligned([x0, -half_w, t + block], [x1, half_w, height - t]));
                    for (y0, y1) in [(-0.4, -0.255), (-0.0725, 0.0725), (0.255, 0.4)] {
                        v.push(aligned([x0, y0, t], [x1, y1, t + block]));
                    }
                }
                for (y0, y1) in [(-0.4, -0.255), (-0.05, 0.05), (0.255, 0.4)] {
                    v.push(aligned([start_x, y0, 0.0], [start_x + length, y1, t]));
                }
                v
            }
        }
    }

    /// Adds the floor and the asset's boxes as one static body.
    pub fn instantiate(&self, sim: &mut Simulation<f64>, surface: SurfaceParams<f64>) -> Result<(), ScenarioError> {
        self.validate()?;
        let ground = sim.world.add_static("ground", Pose::identity());
        let floor = Shape::Box {
            half_extents: Vec3::new(50.0, 50.0, 0.5),
        };
        sim.add_geometry(
            CollisionGeometry::new(ground, floor, Pose::from_translation(Vec3::new(0.0, 0.0, -0.5)))
                .with_surface(surface),
        )?;
        for (c, q, h) in self.boxes() {
            sim.add_geometry(
                CollisionGeometry::new(ground, Shape::Box { half_extents: h }, Pose::new(c, q)).with_surface(surface),
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub asset: WorldAsset,
    /// Initial pose of the vehicle frame.
    pub initial_pose: Pose,
    pub timeline: Vec<DriveCommand>,
    pub duration: f64,
    pub metrics: Vec<MetricSpec>,
}

fn twist_at(time: f64, v: f64, w: f64) -> DriveCommand {
    DriveCommand {
        time,
        kind: CommandKind::Twist { v, w },
    }
}

/// Pose resting on the nosings of steps 2 to 4, facing downhill.
pub fn stand_on_staircase_pose(step_rise: f64, step_run: f64, steps: usize) -> Pose {
    let pitch = (step_rise / step_run).atan();
    let top = step_rise * steps as f64;
    let nosing = Vec3::new(3.0 * step_run, 0.0, top - 3.0 * step_rise);
    Pose::new(nosing, Quat::from_rpy(0.0, pitch, 0.0))
}

pub fn build_scenario(name: &str) -> Result<Scenario, ScenarioError> {
    let vehicle = VehicleConfig::default();
    let half_len = vehicle.track.length / 2.0;
    let at = |x: f64, z: f64| Pose::from_translation(Vec3::new(x, 0.0, z));
    let s = |asset, initial_pose, timeline, duration, metrics| Scenario {
        name: name.to_string(),
        asset,
        initial_pose,
        timeline,
        duration,
        metrics,
    };
    Ok(match name {
        "straight" => s(
            WorldAsset::Floor,
            Pose::identity(),
            vec![twist_at(0.0, 0.3, 0.0)],
            10.0,
            vec![MetricSpec::DistanceToPoint {
                target: [3.0, 0.0, 0.0],
            }],
        ),
        "rotate" => s(
            WorldAsset::Floor,
            Pose::identity(),
            vec![twist_at(0.0, 0.0, 0.6)],
            10.0,
            vec![
                MetricSpec::AngularOffset {
                    target_rpy: [0.0, 0.0, 6.0],
                },
                MetricSpec::DistanceFromStart,
            ],
        ),
        "circular" => s(
            WorldAsset::Floor,
            Pose::identity(),
            vec![DriveCommand {
                time: 0.0,
                kind: CommandKind::Tracks { left: 0.1, right: 0.3 },
            }],
            10.0,
            vec![MetricSpec::SumPositionalError],
        ),
        "ramp" => s(
            WorldAsset::ramp(),
            Pose::identity(),
            vec![twist_at(0.0, 0.3, 0.0)],
            10.0,
            vec![MetricSpec::SumPositionalError, MetricSpec::SumAngularError],
        ),
        "staircase_down" => {
            let asset = WorldAsset::staircase();
            let WorldAsset::Staircase { step_rise, steps, .. } = asset else {
                unreachable!()
            };
            s(
                asset,
                at(-half_len - 0.05, step_rise * steps as f64),
                vec![twist_at(0.0, 0.3, 0.0)],
                10.0,
                vec![MetricSpec::SumPositionalError, MetricSpec::SumAngularError],
            )
        }
        "stand_on_staircase" => {
            let asset = WorldAsset::staircase();
            let WorldAsset::Staircase {
                step_rise,
                step_run,
                steps,
            } = asset
            else {
                unreachable!()
            };
            s(
                asset,
                stand_on_staircase_pose(step_rise, step_run, steps),
                Vec::new(),
                10.0,
                vec![MetricSpec::DistanceFromStart, MetricSpec::AngularOffsetFromStart],
            )
        }
        "pallet" => s(
            WorldAsset::pallet(),
            Pose::identity(),
            vec![twist_at(0.0, 0.1, 0.0)],
            30.0,
            vec![MetricSpec::SumPositionalError, MetricSpec::SumAngularError],
        ),
        "back_and_forth" => s(
            WorldAsset::Floor,
            Pose::identity(),
            (0..10)
                .map(|i| twist_at(2.0 * i as f64, if i % 2 == 0 { 0.2 } else { -0.2 }, 0.0))
                .collect(),
            20.0,
            vec![MetricSpec::DistanceFromStart],
        ),
        other => return Err(ScenarioError::UnknownScenario(other.to_string())),
    })
}

pub fn build_scenarios() -> Vec<Scenario> {
    SCENARIO_NAMES
        .iter()
        .map(|n| build_scenario(n).expect("known scenario"))
        .collect()
}

/// Simulation settings shared by every scenario run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub dt: f64,
    pub solver: SolverSettings<f64>,
    /// Overrides the model's default friction mode.
    pub friction_mode: Option<FrictionMode>,
    pub collision: CollisionSettings,
    /// Ground friction (the vehicle surfaces combine by minimum).
    pub ground_mu: f64,
    /// Half-width of the uniform initial pose jitter (m and rad).
    pub jitter: f64,
    pub record_every_step: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 0.001,
            solver: SolverSettings::default(),
            friction_mode: None,
            collision: CollisionSettings::default(),
            ground_mu: 10.0,
            jitter: 1e-3,
            record_every_step: false,
        }
    }
}

impl SimConfig {
    /// Settings used to produce the golden references.
    pub fn fine() -> Self {
        Self {
            dt: 0.0005,
            solver: SolverSettings {
                max_iterations: 100,
                ..SolverSettings::default()
            },
            ..Self::default()
        }
    }

    pub fn steps_per_sample(&self) -> Result<usize, ScenarioError> {
        let n = SAMPLE_PERIOD / self.dt;
        if !(self.dt > 0.0) || (n - n.round()).abs() > 1e-6 || n.round() < 1.0 {
            return Err(ScenarioError::InvalidSettings(format!(
                "dt = {} must divide the {SAMPLE_PERIOD} s sample period",
                self.dt
            )));
        }
        Ok(n.round() as usize)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricValue {
    pub name: String,
    pub unit: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub step: u64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub scenario: String,
    pub model: String,
    pub seed: u64,
    pub metrics: Vec<MetricValue>,
    /// Wall-clock seconds spent in the stepping loop.
    pub cpu_time: f64,
    pub sim_time: f64,
    pub steps: u64,
    pub trajectory: Trajectory,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub step_trajectory: Trajectory,
    pub failure: Option<Failure>,
}

impl ScenarioResult {
    pub fn metric(&self, name: &str) -> Option<f64> {
        self.metrics.iter().find(|m| m.name == name).map(|m| m.value)
    }

    pub fn failed(&self) -> bool {
        self.failure.is_some()
    }
}

/// Applies the seeded jitter to a pose: planar offset and yaw in the pose's
/// own frame.
pub fn jittered_pose(pose: &Pose, seed: u64, amplitude: f64) -> Pose {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u = || amplitude * rng.random_range(-1.0..=1.0);
    let (dx, dy, yaw) = (u(), u(), u());
    pose.compose(&Pose::new(Vec3::new(dx, dy, 0.0), Quat::from_rpy(0.0, 0.0, yaw)))
}

/// Resolves the reference used by Σ metrics: the explicit one, else the
/// golden file for the scenario.
pub fn reference_for(scenario: &Scenario, explicit: Option<&Trajectory>) -> Result<Option<Trajectory>, ScenarioError> {
    if !scenario.metrics.iter().any(MetricSpec::needs_reference) {
        return Ok(None);
    }
    if let Some(r) = explicit {
        return Ok(Some(r.clone()));
    }
    match reference::golden(&scenario.name) {
        Some(text) => Ok(Some(reference::parse_trajectory(text)?)),
        None => Err(ScenarioError::MissingReference),
    }
}

/// Builds the world and vehicle for a scenario without stepping it.
pub fn prepare(
    scenario: &Scenario,
    vehicle: &VehicleConfig,
    sim_cfg: &SimConfig,
    seed: u64,
) -> Result<(Simulation<f64>, VehicleHandle), ScenarioError> {
    let mut solver = sim_cfg.solver;
    solver.friction_mode = sim_cfg.friction_mode.unwrap_or(vehicle.model.default_friction_mode());
    solver
        .validate()
        .map_err(|e| ScenarioError::InvalidSettings(e.to_string()))?;
    let mut sim = Simulation::new(World::new(sim_cfg.dt)?);
    sim.solver = solver;
    sim.collision = sim_cfg.collision;
    scenario
        .asset
        .instantiate(&mut sim, SurfaceParams::new(sim_cfg.ground_mu, sim_cfg.ground_mu))?;
    let start = jittered_pose(&scenario.initial_pose, seed, sim_cfg.jitter);
    let handle = build_vehicle(vehicle, &mut sim, start)?;
    Ok((sim, handle))
}

/// Builds the world, runs the scenario and evaluates its metrics. A solver
/// abort returns a result flagged failed with the step index and no metrics.
/// With `skip_metrics` the metrics are left empty (used to emit references).
pub fn run_scenario_with(
    scenario: &Scenario,
    vehicle: &VehicleConfig,
    sim_cfg: &SimConfig,
    seed: u64,
    reference: Option<&Trajectory>,
    skip_metrics: bool,
) -> Result<ScenarioResult, ScenarioError> {
    let sps = sim_cfg.steps_per_sample()?;
    if !(scenario.duration >= 0.0) {
        return Err(ScenarioError::InvalidSettings("duration must be >= 0".into()));
    }
    let reference = if skip_metrics {
        None
    } else {
        reference_for(scenario, reference)?
    };

    let (mut sim, handle) = prepare(scenario, vehicle, sim_cfg, seed)?;
    let mut controller = handle.controller(scenario.timeline.clone());

    let steps = (scenario.duration / sim_cfg.dt).round() as u64;
    let sample = |sim: &Simulation<f64>, k: u64| TrajectorySample {
        t: k as f64 * sim_cfg.dt,
        pose: handle.base_pose(sim),
    };
    let mut trajectory = vec![sample(&sim, 0)];
    let mut step_trajectory = Vec::new();
    if sim_cfg.record_every_step {
        step_trajectory.push(sample(&sim, 0));
    }
    let mut failure = None;
    let clock = Instant::now();
    for k in 1..=steps {
        if let Err(e) = sim.step(&mut [&mut controller]) {
            failure = Some(Failure {
                step: k,
                message: error_chain(&e),
            });
            break;
        }
        if k % sps as u64 == 0 {
            trajectory.push(sample(&sim, k));
        }
        if sim_cfg.record_every_step {
            step_trajectory.push(sample(&sim, k));
        }
    }
    let cpu_time = clock.elapsed().as_secs_f64().max(1e-9);

    let mut metrics = Vec::new();
    if failure.is_none() && !skip_metrics {
        for m in &scenario.metrics {
            metrics.push(MetricValue {
                name: m.name().to_string(),
                unit: m.unit().to_string(),
                value: m.evaluate(&trajectory, reference.as_deref())?,
            });
        }
    }
    Ok(ScenarioResult {
        scenario: scenario.name.clone(),
        model: vehicle.model.name().to_string(),
        seed,
        metrics,
        cpu_time,
        sim_time: sim.world.time,
        steps: sim.steps_taken(),
        trajectory,
        step_trajectory,
        failure,
    })
}

pub fn run_scenario(
    scenario: &Scenario,
    vehicle: &VehicleConfig,
    sim_cfg: &SimConfig,
    seed: u64,
) -> Result<ScenarioResult, ScenarioError> {
    run_scenario_with(scenario, vehicle, sim_cfg, seed, None, false)
}

fn error_chain(e: &SimError) -> String {
    let mut msg = e.to_string();
    let mut src = std::error::Error::source(e);
    while let Some(s) = src {
        msg.push_str(": ");
        msg.push_str(&s.to_string());
        src = s.source();
    }
    msg
}
