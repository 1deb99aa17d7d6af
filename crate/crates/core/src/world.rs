//! Environment and exogenous signals: wall contact, joint friction, base
//! trajectories and sensors.

use nalgebra::{DVector, Rotation3, Vector3, Vector6};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinodyn::{BaseMotion, BaseState, Frame, RobotModel, Wrench};

/// Below this tangential speed the friction direction is smoothed [m/s].
pub const TANGENTIAL_SMOOTHING: f64 = 1e-3;
/// Velocity scale of the tanh Coulomb model [rad/s].
pub const COULOMB_SMOOTHING: f64 = 0.01;

/// Planar wall `y = position`, occupying y > position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WallModel {
    pub position: f64,
    pub stiffness: f64,
    pub damping: f64,
    #[serde(default)]
    pub friction: f64,
}

impl WallModel {
    pub fn rigid(position: f64) -> Self {
        WallModel {
            position,
            stiffness: 5.0e4,
            damping: 100.0,
            friction: 0.1,
        }
    }

    pub fn compliant(position: f64) -> Self {
        WallModel {
            position,
            stiffness: 2.0e3,
            damping: 50.0,
            friction: 0.1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.stiffness > 0.0) {
            return Err(Error::config("wall.stiffness", "must be > 0"));
        }
        if !(self.damping >= 0.0) {
            return Err(Error::config("wall.damping", "must be >= 0"));
        }
        if !(self.friction >= 0.0) {
            return Err(Error::config("wall.friction", "must be >= 0"));
        }
        if !self.position.is_finite() {
            return Err(Error::config("wall.position", "must be finite"));
        }
        Ok(())
    }

    pub fn penetration(&self, position: &Vector3<f64>) -> f64 {
        position.y - self.position
    }
}

/// Wrench the wall exerts on the end effector, in {i}.
///
/// Normal: clipped Kelvin–Voigt, `N = max(0, k·δ + b·δ̇)` for δ > 0, acting
/// along −y. Tangential: `−μ N v_t/√(|v_t|² + ε²)`.
pub fn contact_wrench(wall: &WallModel, position: &Vector3<f64>, velocity: &Vector3<f64>) -> Wrench {
    let pen = wall.penetration(position);
    if pen <= 0.0 {
        return Wrench::zero(Frame::Inertial);
    }
    let normal = (wall.stiffness * pen + wall.damping * velocity.y).max(0.0);
    let vt = Vector3::new(velocity.x, 0.0, velocity.z);
    let dir = vt / (vt.norm_squared() + TANGENTIAL_SMOOTHING * TANGENTIAL_SMOOTHING).sqrt();
    let force = Vector3::new(0.0, -normal, 0.0) - dir * (wall.friction * normal);
    Wrench {
        force,
        torque: Vector3::zeros(),
        frame: Frame::Inertial,
    }
}

/// −(viscous·q̇ + coulomb·tanh(q̇/0.01)) per joint.
pub fn joint_friction(model: &RobotModel, qd: &DVector<f64>) -> DVector<f64> {
    let f = &model.friction;
    DVector::from_fn(qd.len(), |i, _| {
        -(f.viscous[i] * qd[i] + f.coulomb[i] * (qd[i] / COULOMB_SMOOTHING).tanh())
    })
}

/// ∂friction/∂q̇ (diagonal, non-positive).
pub fn joint_friction_slope(model: &RobotModel, qd: &DVector<f64>) -> DVector<f64> {
    let f = &model.friction;
    DVector::from_fn(qd.len(), |i, _| {
        let sech = 1.0 / (qd[i] / COULOMB_SMOOTHING).cosh();
        -(f.viscous[i] + f.coulomb[i] * sech * sech / COULOMB_SMOOTHING)
    })
}

/// Smooth onset envelope: 0 before `start`, raised-cosine over `ramp`, then 1.
/// Returns (value, first derivative, second derivative).
fn envelope(t: f64, start: f64, ramp: f64) -> (f64, f64, f64) {
    if t <= start {
        return (0.0, 0.0, 0.0);
    }
    if ramp <= 0.0 || t >= start + ramp {
        return (1.0, 0.0, 0.0);
    }
    let k = std::f64::consts::PI / ramp;
    let x = k * (t - start);
    (0.5 * (1.0 - x.cos()), 0.5 * k * x.sin(), 0.5 * k * k * x.cos())
}

/// One additive component of a base trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BaseSegment {
    Hold,
    /// Forward motion along the inertial x axis.
    ConstantVelocity {
        speed: f64,
        #[serde(default)]
        start_time: f64,
        #[serde(default)]
        ramp_time: f64,
    },
    /// `A sin(Ω(t − t₀) + φ) − A sin φ` on the inertial y axis.
    SinusoidalLateral {
        amplitude: f64,
        angular_frequency: f64,
        #[serde(default)]
        phase: f64,
        #[serde(default)]
        start_time: f64,
        #[serde(default)]
        ramp_time: f64,
    },
    /// Same profile on yaw [rad].
    SinusoidalYaw {
        amplitude: f64,
        angular_frequency: f64,
        #[serde(default)]
        phase: f64,
        #[serde(default)]
        start_time: f64,
        #[serde(default)]
        ramp_time: f64,
    },
}

/// (position, velocity, acceleration) of a scalar channel.
type Channel = (f64, f64, f64);

fn sinusoid(t: f64, a: f64, w: f64, phase: f64, start: f64, ramp: f64) -> Channel {
    if t <= start {
        return (0.0, 0.0, 0.0);
    }
    let tau = t - start;
    let s = a * ((w * tau + phase).sin() - phase.sin());
    let sd = a * w * (w * tau + phase).cos();
    let sdd = -a * w * w * (w * tau + phase).sin();
    let (e, ed, edd) = envelope(t, start, ramp);
    (e * s, ed * s + e * sd, edd * s + 2.0 * ed * sd + e * sdd)
}

fn ramped_velocity(t: f64, speed: f64, start: f64, ramp: f64) -> Channel {
    if t <= start {
        return (0.0, 0.0, 0.0);
    }
    if ramp <= 0.0 {
        return (speed * (t - start), speed, 0.0);
    }
    let tau = t - start;
    if tau >= ramp {
        return (speed * (0.5 * ramp + tau - ramp), speed, 0.0);
    }
    let k = std::f64::consts::PI / ramp;
    let pos = speed * (0.5 * tau - (k * tau).sin() / (2.0 * k));
    let (e, ed, _) = envelope(t, start, ramp);
    (pos, speed * e, speed * ed)
}

impl BaseSegment {
    /// (x, y, yaw) channels.
    fn evaluate(&self, t: f64) -> [Channel; 3] {
        let zero = (0.0, 0.0, 0.0);
        match *self {
            BaseSegment::Hold => [zero; 3],
            BaseSegment::ConstantVelocity {
                speed,
                start_time,
                ramp_time,
            } => [ramped_velocity(t, speed, start_time, ramp_time), zero, zero],
            BaseSegment::SinusoidalLateral {
                amplitude,
                angular_frequency,
                phase,
                start_time,
                ramp_time,
            } => [
                zero,
                sinusoid(t, amplitude, angular_frequency, phase, start_time, ramp_time),
                zero,
            ],
            BaseSegment::SinusoidalYaw {
                amplitude,
                angular_frequency,
                phase,
                start_time,
                ramp_time,
            } => [
                zero,
                zero,
                sinusoid(t, amplitude, angular_frequency, phase, start_time, ramp_time),
            ],
        }
    }
}

/// Prescribed base motion: initial planar pose plus superposed segments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseTrajectory {
    #[serde(default)]
    pub initial_position: [f64; 3],
    #[serde(default)]
    pub initial_yaw: f64,
    #[serde(default)]
    pub segments: Vec<BaseSegment>,
}

impl BaseTrajectory {
    pub fn hold() -> Self {
        BaseTrajectory {
            initial_position: [0.0; 3],
            initial_yaw: 0.0,
            segments: vec![BaseSegment::Hold],
        }
    }

    pub fn constant_velocity(speed: f64, start_time: f64) -> Self {
        BaseTrajectory {
            segments: vec![BaseSegment::ConstantVelocity {
                speed,
                start_time,
                ramp_time: 0.0,
            }],
            ..BaseTrajectory::hold()
        }
    }

    /// 0.2 m/s forward with a 0.05 m, 3 rad/s lateral sinusoid.
    pub fn high_dynamic(start_time: f64, ramp_time: f64) -> Self {
        BaseTrajectory {
            segments: vec![
                BaseSegment::ConstantVelocity {
                    speed: 0.2,
                    start_time,
                    ramp_time,
                },
                BaseSegment::SinusoidalLateral {
                    amplitude: 0.05,
                    angular_frequency: 3.0,
                    phase: 0.0,
                    start_time,
                    ramp_time,
                },
            ],
            ..BaseTrajectory::hold()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (i, s) in self.segments.iter().enumerate() {
            let bad = match *s {
                BaseSegment::Hold => false,
                BaseSegment::ConstantVelocity {
                    speed,
                    start_time,
                    ramp_time,
                } => !speed.is_finite() || start_time < 0.0 || ramp_time < 0.0,
                BaseSegment::SinusoidalLateral {
                    amplitude,
                    angular_frequency,
                    start_time,
                    ramp_time,
                    ..
                }
                | BaseSegment::SinusoidalYaw {
                    amplitude,
                    angular_frequency,
                    start_time,
                    ramp_time,
                    ..
                } => {
                    !amplitude.is_finite()
                        || !(angular_frequency >= 0.0)
                        || start_time < 0.0
                        || ramp_time < 0.0
                }
            };
            if bad {
                return Err(Error::config(
                    format!("base_trajectory.segments[{i}]"),
                    "parameters must be finite, times and frequencies non-negative",
                ));
            }
        }
        Ok(())
    }

    /// Analytic pose, velocity and acceleration at time `t ≥ 0`.
    pub fn base_state_at(&self, t: f64) -> BaseMotion {
        let mut ch = [(0.0, 0.0, 0.0); 3];
        for s in &self.segments {
            for (acc, v) in ch.iter_mut().zip(s.evaluate(t)) {
                acc.0 += v.0;
                acc.1 += v.1;
                acc.2 += v.2;
            }
        }
        let [x, y, yaw] = ch;
        let p0 = Vector3::from(self.initial_position);
        BaseMotion {
            state: BaseState {
                position: p0 + Vector3::new(x.0, y.0, 0.0),
                rotation: Rotation3::from_euler_angles(0.0, 0.0, self.initial_yaw + yaw.0),
                linear_velocity: Vector3::new(x.1, y.1, 0.0),
                angular_velocity: Vector3::new(0.0, 0.0, yaw.1),
            },
            linear_acceleration: Vector3::new(x.2, y.2, 0.0),
            angular_acceleration: Vector3::new(0.0, 0.0, yaw.2),
        }
    }
}

/// Free-function form of [`BaseTrajectory::base_state_at`].
pub fn base_state_at(traj: &BaseTrajectory, t: f64) -> BaseMotion {
    traj.base_state_at(t)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WrenchSensorSpec {
    #[serde(default)]
    pub noise_std: f64,
    #[serde(default)]
    pub bias: f64,
    /// Sample rate [Hz]; must divide the physics rate.
    pub rate_hz: f64,
}

impl WrenchSensorSpec {
    pub fn ideal(rate_hz: f64) -> Self {
        WrenchSensorSpec {
            noise_std: 0.0,
            bias: 0.0,
            rate_hz,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorSuite {
    pub force_torque: WrenchSensorSpec,
    pub interface: WrenchSensorSpec,
    /// Encoder quantization [rad]; 0 for none.
    #[serde(default)]
    pub encoder_quantization: f64,
}

impl Default for SensorSuite {
    fn default() -> Self {
        SensorSuite {
            force_torque: WrenchSensorSpec::ideal(1000.0),
            interface: WrenchSensorSpec::ideal(1000.0),
            encoder_quantization: 0.0,
        }
    }
}

impl SensorSuite {
    pub fn validate(&self, physics_dt: f64) -> Result<()> {
        for (name, s) in [("force_torque", &self.force_torque), ("interface", &self.interface)] {
            if !(s.noise_std >= 0.0) {
                return Err(Error::config(format!("sensors.{name}.noise_std"), "must be >= 0"));
            }
            if !(s.rate_hz > 0.0) {
                return Err(Error::config(format!("sensors.{name}.rate_hz"), "must be > 0"));
            }
            let ratio = 1.0 / (physics_dt * s.rate_hz);
            if (ratio - ratio.round()).abs() > 1e-9 || ratio.round() < 1.0 {
                return Err(Error::config(
                    format!("sensors.{name}.rate_hz"),
                    "must divide the physics rate",
                ));
            }
        }
        if !(self.encoder_quantization >= 0.0) {
            return Err(Error::config("sensors.encoder_quantization", "must be >= 0"));
        }
        Ok(())
    }
}

/// A sampled 6-channel wrench sensor with additive Gaussian noise, constant
/// bias and zero-order hold between samples.
#[derive(Debug, Clone)]
pub struct WrenchSensor {
    spec: WrenchSensorSpec,
    rng: ChaCha8Rng,
    period_ticks: u64,
    held: Vector6<f64>,
}

impl WrenchSensor {
    pub fn new(spec: WrenchSensorSpec, physics_dt: f64, seed: u64) -> Self {
        let period_ticks = (1.0 / (physics_dt * spec.rate_hz)).round().max(1.0) as u64;
        WrenchSensor {
            spec,
            rng: ChaCha8Rng::seed_from_u64(seed),
            period_ticks,
            held: Vector6::zeros(),
        }
    }

    /// Reading at physics tick `tick` for true value `truth`.
    pub fn sense(&mut self, tick: u64, truth: &Vector6<f64>) -> Vector6<f64> {
        if tick % self.period_ticks == 0 {
            self.held = if self.spec.noise_std > 0.0 {
                let normal = Normal::new(0.0, self.spec.noise_std).expect("validated std");
                Vector6::from_fn(|i, _| truth[i] + self.spec.bias + normal.sample(&mut self.rng))
            } else {
                truth.add_scalar(self.spec.bias)
            };
        }
        self.held
    }
}

/// Encoder reading.
pub fn quantize(q: &DVector<f64>, step: f64) -> DVector<f64> {
    if step > 0.0 {
        q.map(|v| (v / step).round() * step)
    } else {
        q.clone()
    }
}
