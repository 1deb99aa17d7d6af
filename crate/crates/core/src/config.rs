//! Declarative scenario description (JSON) and the built-in presets.

use serde::{Deserialize, Serialize};

use crate::control::{ControllerConfig, ControllerKind, ImpedanceParams};
use crate::error::{Error, Result};
use crate::kinodyn::model::Friction;
use crate::kinodyn::RobotModel;
use crate::sigproc::UdeFilterSpec;
use crate::world::{BaseSegment, BaseTrajectory, SensorSuite, WallModel, WrenchSensorSpec};

pub const SCHEMA_VERSION: u32 = 1;

/// Plant arm: a named preset or a full model, plus optional joint friction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<RobotModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub friction: Option<Friction>,
}

impl RobotSpec {
    pub fn preset(name: &str) -> Self {
        RobotSpec {
            preset: Some(name.to_string()),
            model: None,
            friction: None,
        }
    }

    pub fn build(&self) -> Result<RobotModel> {
        let model = match (&self.preset, &self.model) {
            (Some(name), None) => RobotModel::preset(name)
                .ok_or_else(|| Error::config("robot.preset", format!("unknown preset '{name}'")))?,
            (None, Some(m)) => m.clone(),
            _ => return Err(Error::config("robot", "give exactly one of `preset` or `model`")),
        };
        let model = match &self.friction {
            Some(f) => model
                .with_friction(f.viscous.clone(), f.coulomb.clone())
                .map_err(|e| Error::config("robot.friction", e.to_string()))?,
            None => model,
        };
        model.validate().map_err(|e| Error::config("robot", e.to_string()))?;
        Ok(model)
    }
}

/// Physics integration scheme.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Integrator {
    SemiImplicitEuler,
    #[default]
    Rk4,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClockConfig {
    pub physics_dt: f64,
    pub control_dt: f64,
    pub duration: f64,
    #[serde(default)]
    pub integrator: Integrator,
}

impl Default for ClockConfig {
    fn default() -> Self {
        ClockConfig {
            physics_dt: 1e-3,
            control_dt: 8e-3,
            duration: 10.0,
            integrator: Integrator::default(),
        }
    }
}

/// Desired pressing force [N] at a time; the schedule is piecewise linear and
/// a repeated time gives a step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForcePoint {
    pub time: f64,
    pub force: f64,
}

/// `center + amplitude·sin(ω(t − start))` on one translational axis, t ≥ start.
/// With `cycles` set the wave stops at the center after that many periods.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Wave {
    pub axis: usize,
    pub start: f64,
    pub amplitude: f64,
    pub angular_frequency: f64,
    #[serde(default)]
    pub cycles: Option<f64>,
}

impl Wave {
    pub fn end(&self) -> f64 {
        match self.cycles {
            Some(n) => self.start + n * std::f64::consts::TAU / self.angular_frequency,
            None => f64::INFINITY,
        }
    }

    /// Offset, velocity and acceleration along `axis` at time t.
    pub fn at(&self, t: f64) -> (f64, f64, f64) {
        if t < self.start || t >= self.end() {
            return (0.0, 0.0, 0.0);
        }
        let w = self.angular_frequency;
        let ph = w * (t - self.start);
        (self.amplitude * ph.sin(), self.amplitude * w * ph.cos(), -self.amplitude * w * w * ph.sin())
    }
}

/// Move back off the wall by `distance` over `duration` after the switch to
/// full motion, on a quintic profile with zero end velocity and acceleration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Retract {
    pub distance: f64,
    pub duration: f64,
}

impl Retract {
    /// Offset, velocity and acceleration τ seconds into the retreat, along
    /// the pressing direction (negative is away from the wall).
    pub fn at(&self, tau: f64) -> (f64, f64, f64) {
        let u = (tau / self.duration).clamp(0.0, 1.0);
        if tau <= 0.0 || u >= 1.0 {
            return (-self.distance * u, 0.0, 0.0);
        }
        let t = self.duration;
        let s = u * u * u * (10.0 - 15.0 * u + 6.0 * u * u);
        let ds = 30.0 * u * u * (1.0 - u) * (1.0 - u) / t;
        let dds = 60.0 * u * (1.0 - u) * (1.0 - 2.0 * u) / (t * t);
        (-self.distance * s, -self.distance * ds, -self.distance * dds)
    }
}

/// Wall-wiping protocol: press with a scheduled force while following the
/// base and a vertical wave, then return to full motion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WallProtocol {
    #[serde(default = "default_force_axis")]
    pub force_axis: usize,
    pub contact_start: f64,
    pub motion_switch: f64,
    pub force_schedule: Vec<ForcePoint>,
    #[serde(default)]
    pub follow_base: bool,
    #[serde(default)]
    pub wave: Option<Wave>,
    #[serde(default)]
    pub retract: Option<Retract>,
}

fn default_force_axis() -> usize {
    1
}

impl WallProtocol {
    /// Desired pressing magnitude at `t`.
    pub fn force_at(&self, t: f64) -> f64 {
        let s = &self.force_schedule;
        if s.is_empty() {
            return 0.0;
        }
        if t < s[0].time {
            return s[0].force;
        }
        let mut value = s[s.len() - 1].force;
        for w in s.windows(2) {
            if t >= w[0].time && t < w[1].time {
                let span = w[1].time - w[0].time;
                value = w[0].force + (w[1].force - w[0].force) * (t - w[0].time) / span;
                break;
            }
        }
        value
    }

    pub fn in_force_mode(&self, t: f64) -> bool {
        t >= self.contact_start && t < self.motion_switch
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Protocol {
    /// Hold the start pose in full motion mode.
    Hold,
    Wall(WallProtocol),
    /// Joint-space PD plus gravity compensation about fixed joint positions;
    /// bypasses the task-space controller.
    JointRegulation {
        joints: Vec<f64>,
        stiffness: f64,
        damping: f64,
    },
}

/// External wrench f_d on the end effector, in {i}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Disturbance {
    Pulse {
        start: f64,
        duration: f64,
        wrench: [f64; 6],
    },
    Sinusoid {
        amplitude: [f64; 6],
        angular_frequency: f64,
    },
}

impl Disturbance {
    pub fn at(&self, t: f64) -> [f64; 6] {
        match self {
            Disturbance::Pulse {
                start,
                duration,
                wrench,
            } => {
                if t >= *start && t < start + duration {
                    *wrench
                } else {
                    [0.0; 6]
                }
            }
            Disturbance::Sinusoid {
                amplitude,
                angular_frequency,
            } => amplitude.map(|a| a * (angular_frequency * t).sin()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsConfig {
    /// Length of the steady-state window at the end of a phase [s].
    pub sse_window: f64,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig { sse_window: 10.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    pub name: String,
    pub robot: RobotSpec,
    /// The controller's nominal model is the plant with inertias scaled by this.
    #[serde(default = "one")]
    pub model_mass_scale: f64,
    pub controller: ControllerConfig,
    #[serde(default)]
    pub clock: ClockConfig,
    pub base: BaseTrajectory,
    #[serde(default)]
    pub wall: Option<WallModel>,
    #[serde(default)]
    pub sensors: SensorSuite,
    pub protocol: Protocol,
    /// Start configuration, or the seed of the start-pose solve when
    /// `ee_start` is given.
    pub initial_joints: Vec<f64>,
    /// End-effector start position in {i}.
    #[serde(default)]
    pub ee_start: Option<[f64; 3]>,
    #[serde(default)]
    pub seed: u64,
    /// Half-width of the random start-position offset [m].
    #[serde(default)]
    pub initial_perturbation: f64,
    #[serde(default)]
    pub disturbance: Option<Disturbance>,
    #[serde(default)]
    pub metrics: MetricsConfig,
}

fn one() -> f64 {
    1.0
}

/// Torque limit sized for the UR5e-like preset.
pub const UR5E_TORQUE_LIMIT: [f64; 6] = [150.0, 150.0, 150.0, 28.0, 28.0, 28.0];
/// Seed configuration for start-pose solves on the 6-DOF presets.
pub const SEED_JOINTS: [f64; 6] = [1.2, -0.6, 1.2, -0.6, 1.57, 0.0];

pub const PRESETS: [&str; 6] = [
    "hold",
    "low-dynamic",
    "high-dynamic",
    "experiment",
    "coupling-validation",
    "friction-hold",
];

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn with_controller(mut self, kind: ControllerKind) -> Self {
        self.controller.kind = kind;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Built-in scenario by name.
    pub fn preset(name: &str, kind: ControllerKind) -> Option<Self> {
        let cfg = match name {
            "hold" => hold(kind),
            "low-dynamic" => wall_scenario(name, kind, low_dynamic_base()),
            "high-dynamic" => wall_scenario(name, kind, BaseTrajectory {
                initial_position: BASE_START,
                ..BaseTrajectory::high_dynamic(3.0, 3.0)
            }),
            "experiment" => experiment(kind),
            "coupling-validation" => coupling_validation(),
            "friction-hold" => friction_hold(kind),
            _ => return None,
        };
        Some(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::config(
                "schema_version",
                format!("unsupported version {} (expected {SCHEMA_VERSION})", self.schema_version),
            ));
        }
        let model = self.robot.build()?;
        let n = model.dof();
        if !(self.model_mass_scale > 0.0) {
            return Err(Error::config("model_mass_scale", "must be > 0"));
        }
        self.controller.validate(n)?;
        let c = &self.clock;
        if !(c.physics_dt > 0.0) {
            return Err(Error::config("clock.physics_dt", "must be > 0"));
        }
        if !(c.control_dt > 0.0) {
            return Err(Error::config("clock.control_dt", "must be > 0"));
        }
        let ratio = c.control_dt / c.physics_dt;
        if (ratio - ratio.round()).abs() > 1e-9 || ratio.round() < 1.0 {
            return Err(Error::config("clock.control_dt", "must be an integer multiple of physics_dt"));
        }
        if !(c.duration > 0.0) {
            return Err(Error::config("clock.duration", "must be > 0"));
        }
        self.base.validate()?;
        if let Some(w) = &self.wall {
            w.validate()?;
        }
        self.sensors.validate(c.physics_dt)?;
        if self.initial_joints.len() != n {
            return Err(Error::config(
                "initial_joints",
                format!("expected {n} entries, got {}", self.initial_joints.len()),
            ));
        }
        if !(self.initial_perturbation >= 0.0) {
            return Err(Error::config("initial_perturbation", "must be >= 0"));
        }
        if !(self.metrics.sse_window > 0.0) {
            return Err(Error::config("metrics.sse_window", "must be > 0"));
        }
        match &self.protocol {
            Protocol::Hold => {}
            Protocol::Wall(p) => {
                if p.force_axis >= 3 {
                    return Err(Error::config("protocol.force_axis", "must be a translational axis (0..3)"));
                }
                if !(p.contact_start >= 0.0 && p.motion_switch >= p.contact_start) {
                    return Err(Error::config(
                        "protocol.motion_switch",
                        "need 0 <= contact_start <= motion_switch",
                    ));
                }
                if p.force_schedule.windows(2).any(|w| w[1].time < w[0].time) {
                    return Err(Error::config("protocol.force_schedule", "times must be non-decreasing"));
                }
                if p.force_schedule.iter().any(|f| !f.force.is_finite() || !f.time.is_finite()) {
                    return Err(Error::config("protocol.force_schedule", "entries must be finite"));
                }
                if let Some(w) = &p.wave {
                    if w.axis >= 3 || w.axis == p.force_axis {
                        return Err(Error::config(
                            "protocol.wave.axis",
                            "must be a translational axis other than the force axis",
                        ));
                    }
                    if !(w.angular_frequency > 0.0) || !w.amplitude.is_finite() {
                        return Err(Error::config("protocol.wave", "needs a finite amplitude and positive frequency"));
                    }
                    if w.cycles.is_some_and(|c| !(c > 0.0)) {
                        return Err(Error::config("protocol.wave.cycles", "must be positive"));
                    }
                }
                if let Some(r) = &p.retract {
                    if !(r.duration > 0.0) || !(r.distance >= 0.0) {
                        return Err(Error::config(
                            "protocol.retract",
                            "needs a positive duration and a non-negative distance",
                        ));
                    }
                }
                if self.wall.is_none() {
                    return Err(Error::config("wall", "the wall protocol needs a wall"));
                }
            }
            Protocol::JointRegulation {
                joints,
                stiffness,
                damping,
            } => {
                if joints.len() != n {
                    return Err(Error::config(
                        "protocol.joints",
                        format!("expected {n} entries, got {}", joints.len()),
                    ));
                }
                if !(*stiffness > 0.0 && *damping >= 0.0) {
                    return Err(Error::config("protocol", "need stiffness > 0 and damping >= 0"));
                }
            }
        }
        Ok(())
    }
}

const BASE_START: [f64; 3] = [0.0, 0.3, 0.0];
const EE_START: [f64; 3] = [0.2, 0.8, 0.8];
const WALL: f64 = 0.8;

fn low_dynamic_base() -> BaseTrajectory {
    BaseTrajectory {
        initial_position: BASE_START,
        initial_yaw: 0.0,
        segments: vec![BaseSegment::ConstantVelocity {
            speed: 0.2,
            start_time: 3.0,
            ramp_time: 3.0,
        }],
    }
}

fn paper_controller(kind: ControllerKind) -> ControllerConfig {
    ControllerConfig {
        torque_limit: UR5E_TORQUE_LIMIT.to_vec(),
        ..ControllerConfig::paper(kind)
    }
}

fn ur5e_with_friction() -> RobotSpec {
    RobotSpec {
        friction: Some(Friction {
            viscous: vec![0.5; 6],
            coulomb: vec![0.75, 0.75, 0.75, 0.25, 0.25, 0.25],
        }),
        ..RobotSpec::preset("ur5e-like")
    }
}

fn hold(kind: ControllerKind) -> ScenarioConfig {
    ScenarioConfig {
        schema_version: SCHEMA_VERSION,
        name: "hold".into(),
        robot: RobotSpec::preset("ur5e-like"),
        model_mass_scale: 1.0,
        controller: paper_controller(kind),
        clock: ClockConfig {
            duration: 5.0,
            ..ClockConfig::default()
        },
        base: BaseTrajectory {
            initial_position: BASE_START,
            ..BaseTrajectory::hold()
        },
        wall: None,
        sensors: SensorSuite::default(),
        protocol: Protocol::Hold,
        initial_joints: SEED_JOINTS.to_vec(),
        ee_start: Some(EE_START),
        seed: 0,
        initial_perturbation: 0.0,
        disturbance: None,
        metrics: MetricsConfig::default(),
    }
}

/// Base held, joint friction on, plant heavier than the nominal model, 5 mm
/// start offsets to settle from.
fn friction_hold(kind: ControllerKind) -> ScenarioConfig {
    ScenarioConfig {
        name: "friction-hold".into(),
        robot: ur5e_with_friction(),
        model_mass_scale: 1.0,
        clock: ClockConfig {
            duration: 30.0,
            ..ClockConfig::default()
        },
        initial_perturbation: 0.005,
        ..hold(kind)
    }
}

fn wall_scenario(name: &str, kind: ControllerKind, base: BaseTrajectory) -> ScenarioConfig {
    ScenarioConfig {
        schema_version: SCHEMA_VERSION,
        name: name.into(),
        robot: ur5e_with_friction(),
        model_mass_scale: 1.0,
        controller: paper_controller(kind),
        clock: ClockConfig {
            duration: 70.0,
            ..ClockConfig::default()
        },
        base,
        wall: Some(WallModel::compliant(WALL)),
        sensors: SensorSuite {
            force_torque: WrenchSensorSpec {
                noise_std: 0.05,
                bias: 0.0,
                rate_hz: 1000.0,
            },
            ..SensorSuite::default()
        },
        protocol: Protocol::Wall(WallProtocol {
            force_axis: 1,
            contact_start: 1.0,
            motion_switch: 55.0,
            force_schedule: vec![
                ForcePoint { time: 1.0, force: 0.0 },
                ForcePoint { time: 2.0, force: 5.0 },
                ForcePoint { time: 35.0, force: 5.0 },
                ForcePoint { time: 36.0, force: 10.0 },
            ],
            follow_base: true,
            wave: Some(Wave {
                axis: 2,
                start: 20.0,
                amplitude: 0.1,
                angular_frequency: 0.125 * std::f64::consts::PI,
                cycles: Some(2.0),
            }),
            retract: Some(Retract {
                distance: 0.01,
                duration: 2.0,
            }),
        }),
        initial_joints: SEED_JOINTS.to_vec(),
        ee_start: Some(EE_START),
        seed: 0,
        initial_perturbation: 0.005,
        disturbance: None,
        metrics: MetricsConfig::default(),
    }
}

/// Torque-limited light arm, experiment gains and cutoffs, stiff wall, 5 N
/// ramp over 10 to 12 s, then the base moves at 0.16 m/s.
fn experiment(kind: ControllerKind) -> ScenarioConfig {
    let mut cfg = wall_scenario("experiment", kind, BaseTrajectory {
        initial_position: [0.0, 0.45, 0.0],
        initial_yaw: 0.0,
        segments: vec![BaseSegment::ConstantVelocity {
            speed: 0.16,
            start_time: 12.0,
            ramp_time: 1.0,
        }],
    });
    cfg.robot = RobotSpec {
        friction: Some(Friction {
            viscous: vec![0.05; 6],
            coulomb: vec![0.2, 0.2, 0.1, 0.05, 0.05, 0.05],
        }),
        ..RobotSpec::preset("light-arm")
    };
    cfg.controller = ControllerConfig {
        impedance: ImpedanceParams::experiment(),
        filters: UdeFilterSpec::experiment(),
        ..ControllerConfig::paper(kind)
    };
    cfg.wall = Some(WallModel::rigid(WALL));
    cfg.ee_start = Some([0.15, WALL, 0.75]);
    cfg.clock.duration = 30.0;
    cfg.protocol = Protocol::Wall(WallProtocol {
        force_axis: 1,
        contact_start: 10.0,
        motion_switch: 30.0,
        force_schedule: vec![
            ForcePoint { time: 10.0, force: 0.0 },
            ForcePoint { time: 12.0, force: 5.0 },
        ],
        follow_base: true,
        wave: None,
        retract: None,
    });
    cfg
}

fn coupling_validation() -> ScenarioConfig {
    ScenarioConfig {
        name: "coupling-validation".into(),
        clock: ClockConfig {
            duration: 20.0,
            ..ClockConfig::default()
        },
        base: BaseTrajectory::high_dynamic(0.0, 1.0),
        protocol: Protocol::JointRegulation {
            joints: vec![1.0, 0.14, -1.45, 4.41, -1.35, 0.0],
            stiffness: 400.0,
            damping: 40.0,
        },
        initial_joints: vec![1.0, 0.14, -1.45, 4.41, -1.35, 0.0],
        ee_start: None,
        ..hold(ControllerKind::C1)
    }
}
