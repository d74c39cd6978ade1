//! Comparison vehicles sharing one chassis: CSM tracks, 4 or 8 wheels per
//! side, and frictionless hulls pushed by a virtual force.
//!
//! Layout is given in the vehicle frame (x forward, y left, z up, origin at
//! the center of the track bottoms). The chassis body frame sits at the
//! center of mass.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::collision::{groups, CollisionError, CollisionGeometry, GeomId, Shape, SurfaceParams};
use crate::dynamics::{apply_force_at_point, BodyId, MassProperties, Pose};
use crate::sim::{ControlContext, Controller, Simulation};
use crate::solver::{FrictionMode, HingeJoint};
use crate::track::{kinematics_from_tracks, tracks_from_twist, Side, SteeringModel, TrackSpec, TrackedVehicle};
use crate::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Csm,
    Wheels4,
    Wheels8,
    NoFriction,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [
        ModelKind::Csm,
        ModelKind::Wheels4,
        ModelKind::Wheels8,
        ModelKind::NoFriction,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::Csm => "csm",
            ModelKind::Wheels4 => "wheels4",
            ModelKind::Wheels8 => "wheels8",
            ModelKind::NoFriction => "no_friction",
        }
    }

    pub fn wheels_per_side(&self) -> Option<usize> {
        match self {
            ModelKind::Wheels4 => Some(4),
            ModelKind::Wheels8 => Some(8),
            _ => None,
        }
    }

    pub fn default_friction_mode(&self) -> FrictionMode {
        if self.wheels_per_side().is_some() {
            FrictionMode::Cone
        } else {
            FrictionMode::Pyramid
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ModelKind::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown model '{s}' (valid: csm, wheels4, wheels8, no_friction)"))
    }
}

/// Parameters tuned by the identification search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IdentifiedParams {
    pub linear_gain: f64,
    pub angular_gain: f64,
    pub steering_efficiency: f64,
    pub mu1: f64,
    pub mu2: f64,
}

impl Default for IdentifiedParams {
    fn default() -> Self {
        Self {
            linear_gain: 1.0,
            angular_gain: 1.0,
            steering_efficiency: 0.6,
            mu1: 1.0,
            mu2: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChassisConfig {
    pub mass: f64,
    /// Dimensions of the solid box whose inertia the chassis uses (m).
    pub inertia_box: [f64; 3],
    /// Collision box between the tracks (m).
    pub size: [f64; 3],
    pub ground_clearance: f64,
    /// Height of the center of mass above the track bottoms (m).
    pub com_height: f64,
}

impl Default for ChassisConfig {
    fn default() -> Self {
        Self {
            mass: 40.0,
            inertia_box: [0.85, 0.7, 0.18],
            size: [0.6, 0.4, 0.15],
            ground_clearance: 0.055,
            com_height: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrackConfig {
    pub length: f64,
    pub width: f64,
    pub height: f64,
    /// Center-to-center distance B (m).
    pub separation: f64,
    pub belt_max_speed: f64,
    /// Replace the hull ends by cylinders of radius `height / 2`.
    pub rounded_ends: bool,
}

impl Default for TrackConfig {
    fn default() -> Self {
        Self {
            length: 0.85,
            width: 0.1,
            height: 0.18,
            separation: 0.6,
            belt_max_speed: 1.0,
            rounded_ends: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WheelConfig {
    pub radius: f64,
    pub mass: f64,
    pub max_torque: f64,
}

impl Default for WheelConfig {
    fn default() -> Self {
        Self {
            radius: 0.09,
            mass: 0.5,
            max_torque: 20.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    pub limit: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PushConfig {
    /// Velocity PID producing the planar push force (N).
    pub force: PidGains,
    /// Yaw-rate PID producing the yaw torque (N·m).
    pub torque: PidGains,
}

impl Default for PushConfig {
    fn default() -> Self {
        Self {
            force: PidGains {
                kp: 200.0,
                ki: 20.0,
                kd: 0.0,
                limit: 400.0,
            },
            torque: PidGains {
                kp: 100.0,
                ki: 0.0,
                kd: 0.0,
                limit: 150.0,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VehicleConfig {
    pub model: ModelKind,
    pub chassis: ChassisConfig,
    pub track: TrackConfig,
    pub wheels: WheelConfig,
    pub push: PushConfig,
    pub params: IdentifiedParams,
}

impl Default for VehicleConfig {
    fn default() -> Self {
        Self {
            model: ModelKind::Csm,
            chassis: ChassisConfig::default(),
            track: TrackConfig::default(),
            wheels: WheelConfig::default(),
            push: PushConfig::default(),
            params: IdentifiedParams::default(),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VehicleError {
    #[error("invalid vehicle config: {0}")]
    Invalid(String),
    #[error("wheels overlap: {count} wheels of radius {radius} m need {needed:.3} m but the track is {length} m long")]
    OverlappingWheels {
        count: usize,
        radius: f64,
        needed: f64,
        length: f64,
    },
    #[error(transparent)]
    Collision(#[from] CollisionError),
}

impl VehicleConfig {
    pub fn with_model(mut self, model: ModelKind) -> Self {
        self.model = model;
        self
    }

    pub fn steering(&self) -> SteeringModel<f64> {
        SteeringModel {
            track_separation: self.track.separation,
            steering_efficiency: self.params.steering_efficiency,
            linear_gain: self.params.linear_gain,
            angular_gain: self.params.angular_gain,
        }
    }

    pub fn validate(&self) -> Result<(), VehicleError> {
        let bad = |m: &str| Err(VehicleError::Invalid(m.to_string()));
        let c = &self.chassis;
        if !(c.mass > 0.0) {
            return bad("chassis.mass must be > 0");
        }
        if c.inertia_box.iter().chain(&c.size).any(|v| !(*v > 0.0)) {
            return bad("chassis dimensions must be > 0");
        }
        let t = &self.track;
        if [t.length, t.width, t.height, t.separation].iter().any(|v| !(*v > 0.0)) {
            return bad("track dimensions must be > 0");
        }
        if !(t.belt_max_speed > 0.0) {
            return bad("track.belt_max_speed must be > 0");
        }
        if t.separation <= t.width {
            return bad("track.separation must exceed track.width");
        }
        if !(self.wheels.radius > 0.0 && self.wheels.mass > 0.0 && self.wheels.max_torque >= 0.0) {
            return bad("wheel radius and mass must be > 0, max_torque >= 0");
        }
        let p = &self.params;
        if !(p.mu1 >= 0.0 && p.mu2 >= 0.0) {
            return bad("params.mu1 and params.mu2 must be >= 0");
        }
        self.steering().validate().map_err(VehicleError::Invalid)?;
        Ok(())
    }

    pub fn chassis_mass_properties(&self) -> MassProperties<f64> {
        let [x, y, z] = self.chassis.inertia_box;
        MassProperties::solid_box(self.chassis.mass, Vec3::new(x / 2.0, y / 2.0, z / 2.0))
            .expect("validated chassis mass")
    }

    /// Wheel centers along x for one side.
    pub fn wheel_positions(&self, count: usize) -> Vec<f64> {
        let r = self.wheels.radius;
        let span = self.track.length - 2.0 * r;
        (0..count)
            .map(|i| {
                if count == 1 {
                    0.0
                } else {
                    -span / 2.0 + span * i as f64 / (count - 1) as f64
                }
            })
            .collect()
    }
}

/// A timestamped drive command.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveCommand {
    pub time: f64,
    pub kind: CommandKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommandKind {
    /// Forward speed (m/s) and yaw rate (rad/s).
    Twist { v: f64, w: f64 },
    /// Left and right belt speeds (m/s).
    Tracks { left: f64, right: f64 },
}

impl CommandKind {
    /// Forward speed and yaw rate; track commands use differential-drive
    /// kinematics with χ = 1.
    pub fn twist(&self, separation: f64) -> (f64, f64) {
        match *self {
            CommandKind::Twist { v, w } => (v, w),
            CommandKind::Tracks { left, right } => ((left + right) / 2.0, (right - left) / separation),
        }
    }
}

/// Command active at time `t`: the last one with `time ≤ t`.
pub fn command_at(timeline: &[DriveCommand], t: f64) -> Option<&DriveCommand> {
    timeline.iter().rev().find(|c| c.time <= t + 1e-12)
}

/// Handles to a vehicle inside a simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct VehicleHandle {
    pub config: VehicleConfig,
    pub chassis: BodyId,
    pub wheels: Vec<BodyId>,
    pub left_joints: Vec<usize>,
    pub right_joints: Vec<usize>,
    pub tracked: Option<usize>,
    pub geoms: Vec<GeomId>,
    /// Vehicle frame relative to the chassis body frame.
    pub frame_offset: Pose<f64>,
}

impl VehicleHandle {
    /// Pose of the vehicle frame.
    pub fn base_pose(&self, sim: &Simulation<f64>) -> Pose<f64> {
        sim.world.body(self.chassis).pose.compose(&self.frame_offset)
    }

    pub fn controller(&self, timeline: Vec<DriveCommand>) -> VehicleController {
        VehicleController {
            handle: self.clone(),
            timeline,
            force_integral: [0.0; 2],
            force_prev: None,
            yaw_integral: 0.0,
            yaw_prev: None,
            last_force: Vec3::zeros(),
            last_targets: Vec::new(),
        }
    }
}

/// Adds the vehicle to `sim` with its vehicle frame at `base`.
pub fn build_vehicle(
    cfg: &VehicleConfig,
    sim: &mut Simulation<f64>,
    base: Pose<f64>,
) -> Result<VehicleHandle, VehicleError> {
    cfg.validate()?;
    let com = Vec3::new(0.0, 0.0, cfg.chassis.com_height);
    let frame_offset = Pose::from_translation(-com);
    let chassis_pose = base.compose(&Pose::from_translation(com));
    let chassis = sim
        .world
        .add_dynamic("chassis", chassis_pose, cfg.chassis_mass_properties());
    // vehicle-frame point → chassis body frame
    let local = |p: Vec3| Pose::from_translation(p - com);
    let vehicle_geom = |body: BodyId, shape: Shape<f64>, pose: Pose<f64>, surface: SurfaceParams<f64>| {
        CollisionGeometry::new(body, shape, pose)
            .with_filter(groups::VEHICLE, groups::ENVIRONMENT)
            .with_surface(surface)
    };
    let t = cfg.track;
    let p = cfg.params;
    let c = cfg.chassis;
    let mut geoms = Vec::new();

    let chassis_box = Shape::Box {
        half_extents: Vec3::new(c.size[0] / 2.0, c.size[1] / 2.0, c.size[2] / 2.0),
    };
    let chassis_center = Vec3::new(0.0, 0.0, c.ground_clearance + c.size[2] / 2.0);
    geoms.push(sim.add_geometry(vehicle_geom(
        chassis,
        chassis_box,
        local(chassis_center),
        SurfaceParams::new(p.mu1, p.mu2),
    ))?);

    let sides = [(Side::Left, t.separation / 2.0), (Side::Right, -t.separation / 2.0)];
    let mut handle = VehicleHandle {
        config: *cfg,
        chassis,
        wheels: Vec::new(),
        left_joints: Vec::new(),
        right_joints: Vec::new(),
        tracked: None,
        geoms: Vec::new(),
        frame_offset,
    };

    match cfg.model {
        ModelKind::Csm | ModelKind::NoFriction => {
            let (mu1, mu2) = if cfg.model == ModelKind::NoFriction {
                (0.0, 0.0)
            } else {
                (p.mu1, p.mu2)
            };
            let surface = SurfaceParams::new(mu1, mu2);
            let mut specs = Vec::new();
            for (side, y) in sides {
                let mut parts = Vec::new();
                let r = t.height / 2.0;
                let body_len = if t.rounded_ends { t.length - 2.0 * r } else { t.length };
                parts.push((
                    Shape::Box {
                        half_extents: Vec3::new(body_len / 2.0, t.width / 2.0, t.height / 2.0),
                    },
                    Vec3::new(0.0, y, t.height / 2.0),
                ));
                if t.rounded_ends {
                    for x in [-body_len / 2.0, body_len / 2.0] {
                        parts.push((
                            Shape::Cylinder {
                                radius: r,
                                half_length: t.width / 2.0,
                            },
                            Vec3::new(x, y, r),
                        ));
                    }
                }
                for (shape, center) in parts {
                    let g = sim.add_geometry(vehicle_geom(chassis, shape, local(center), surface))?;
                    geoms.push(g);
                    specs.push(TrackSpec {
                        body: chassis,
                        geom: g,
                        side,
                        belt_max_speed: t.belt_max_speed,
                        mu1,
                        mu2,
                    });
                }
            }
            if cfg.model == ModelKind::Csm {
                sim.tracked.push(TrackedVehicle {
                    body: chassis,
                    frame_offset,
                    tracks: specs,
                    drive: Default::default(),
                });
                handle.tracked = Some(sim.tracked.len() - 1);
            }
        }
        ModelKind::Wheels4 | ModelKind::Wheels8 => {
            let count = cfg.model.wheels_per_side().unwrap_or(4);
            let w = cfg.wheels;
            let xs = cfg.wheel_positions(count);
            if cfg.model == ModelKind::Wheels4 && count > 1 && xs[1] - xs[0] < 2.0 * w.radius {
                return Err(VehicleError::OverlappingWheels {
                    count,
                    radius: w.radius,
                    needed: 2.0 * w.radius * count as f64,
                    length: t.length,
                });
            }
            let half_width = t.width / 2.0;
            let mp = MassProperties::solid_cylinder_y(w.mass, w.radius, half_width)
                .map_err(|e| VehicleError::Invalid(e.to_string()))?;
            let surface = SurfaceParams::new(p.mu1, p.mu1);
            let dt = sim.world.step_size;
            for (side, y) in sides {
                for &x in &xs {
                    let center = Vec3::new(x, y, w.radius);
                    let world_center = base.transform_point(&center);
                    let body = sim.world.add_dynamic(
                        format!("wheel_{}_{x:.3}", if side == Side::Left { "l" } else { "r" }),
                        Pose::new(world_center, base.orientation),
                        mp,
                    );
                    let shape = Shape::Cylinder {
                        radius: w.radius,
                        half_length: half_width,
                    };
                    geoms.push(sim.add_geometry(vehicle_geom(body, shape, Pose::identity(), surface))?);
                    let axis = base.orientation.rotate(&Vec3::unit_y());
                    let joint = HingeJoint::new(sim.world.body(chassis), sim.world.body(body), world_center, axis)
                        .with_motor(0.0, w.max_torque * dt);
                    sim.joints.push(joint);
                    let ji = sim.joints.len() - 1;
                    match side {
                        Side::Left => handle.left_joints.push(ji),
                        Side::Right => handle.right_joints.push(ji),
                    }
                    handle.wheels.push(body);
                }
            }
        }
    }
    handle.geoms = geoms;
    Ok(handle)
}

/// Drives one vehicle from a command timeline.
#[derive(Debug, Clone)]
pub struct VehicleController {
    pub handle: VehicleHandle,
    pub timeline: Vec<DriveCommand>,
    force_integral: [f64; 2],
    force_prev: Option<[f64; 2]>,
    yaw_integral: f64,
    yaw_prev: Option<f64>,
    /// Push force applied in the last update (world frame).
    pub last_force: Vec3,
    /// Motor targets set in the last update, per joint index.
    pub last_targets: Vec<(usize, f64)>,
}

fn pid(g: &PidGains, e: f64, integral: &mut f64, prev: Option<f64>, dt: f64) -> f64 {
    *integral += e * dt;
    let d = prev.map_or(0.0, |p| (e - p) / dt);
    g.kp * e + g.ki * *integral + g.kd * d
}

impl VehicleController {
    /// Desired forward speed and yaw rate after gains.
    pub fn desired_twist(&self, t: f64) -> (f64, f64) {
        let cfg = &self.handle.config;
        let (v, w) = command_at(&self.timeline, t).map_or((0.0, 0.0), |c| c.kind.twist(cfg.track.separation));
        (v * cfg.params.linear_gain, w * cfg.params.angular_gain)
    }

    fn push(&mut self, ctx: &mut ControlContext<'_, f64>, v_des: f64, w_des: f64) {
        let cfg = self.handle.config;
        let body = ctx.world.body(self.handle.chassis);
        let q = body.pose.orientation;
        let v_local = q.inverse_rotate(&body.twist.linear);
        let w_local = q.inverse_rotate(&body.twist.angular);
        let e = [v_des - v_local.x, -v_local.y];
        let g = cfg.push.force;
        let mut f = [0.0; 2];
        for k in 0..2 {
            self.force_integral[k] += e[k] * ctx.dt;
            let d = self.force_prev.map_or(0.0, |p| (e[k] - p[k]) / ctx.dt);
            f[k] = g.kp * e[k] + g.ki * self.force_integral[k] + g.kd * d;
        }
        self.force_prev = Some(e);
        let mag = (f[0] * f[0] + f[1] * f[1]).sqrt();
        if mag > g.limit {
            f = [f[0] * g.limit / mag, f[1] * g.limit / mag];
        }
        let ew = w_des - w_local.z;
        let tau = pid(&cfg.push.torque, ew, &mut self.yaw_integral, self.yaw_prev, ctx.dt)
            .clamp(-cfg.push.torque.limit, cfg.push.torque.limit);
        self.yaw_prev = Some(ew);

        let force = q.rotate(&Vec3::new(f[0], f[1], 0.0));
        let torque = q.rotate(&Vec3::new(0.0, 0.0, tau));
        let body = ctx.world.body_mut(self.handle.chassis);
        let com = body.center_of_mass_world();
        apply_force_at_point(body, force, com);
        body.external_torque += torque;
        self.last_force = force;
    }
}

impl Controller<f64> for VehicleController {
    fn update(&mut self, ctx: &mut ControlContext<'_, f64>) {
        let (v, w) = self.desired_twist(ctx.time);
        let cfg = self.handle.config;
        let steering = cfg.steering();
        match cfg.model {
            ModelKind::NoFriction => self.push(ctx, v, w),
            ModelKind::Csm => {
                let s = tracks_from_twist(v, w, &steering, cfg.track.belt_max_speed);
                if let Some(i) = self.handle.tracked {
                    ctx.tracked[i].drive = kinematics_from_tracks(s.left, s.right, &steering);
                }
            }
            ModelKind::Wheels4 | ModelKind::Wheels8 => {
                let s = tracks_from_twist(v, w, &steering, cfg.track.belt_max_speed);
                self.last_targets.clear();
                let r = cfg.wheels.radius;
                for (joints, speed) in [(&self.handle.left_joints, s.left), (&self.handle.right_joints, s.right)] {
                    for &j in joints {
                        ctx.joints[j].motor_target_velocity = speed / r;
                        self.last_targets.push((j, speed / r));
                    }
                }
            }
        }
    }
}
