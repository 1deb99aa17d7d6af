//! Fixed-step closed-loop simulation of plant, controller and world.

use std::io::Write;

use nalgebra::{DMatrix, DVector, Vector3, Vector6};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{Integrator, Protocol, ScenarioConfig, WallProtocol};
use crate::control::{
    AxisMode, ControlInputs, ControlTarget, Controller, StabilityMonitor, relative_to_base,
};
use crate::error::{Error, Result};
use crate::kinodyn::dynamics::joint_space_matrices_with_base;
use crate::kinodyn::kinematics::jacobian_time_derivative;
use crate::kinodyn::{
    augmented_jacobian, coupling_velocity_rate, coupling_wrench, ee_velocity, forward_kinematics,
    jacobian, task_space_matrices, BaseMotion, BaseState, Frame, JointState, Pose, RobotModel,
    TaskState, Wrench,
};
use crate::world::{contact_wrench, joint_friction, joint_friction_slope, quantize, WallModel, WrenchSensor};

pub const RECORD_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimClock {
    pub physics_dt: f64,
    pub control_dt: f64,
    pub duration: f64,
    #[serde(skip)]
    pub tick: u64,
}

impl SimClock {
    pub fn new(physics_dt: f64, control_dt: f64, duration: f64) -> Result<Self> {
        if !(physics_dt > 0.0 && control_dt > 0.0) {
            return Err(Error::config("clock", "steps must be > 0"));
        }
        let ratio = control_dt / physics_dt;
        if (ratio - ratio.round()).abs() > 1e-9 || ratio.round() < 1.0 {
            return Err(Error::config("clock.control_dt", "must be an integer multiple of physics_dt"));
        }
        Ok(SimClock {
            physics_dt,
            control_dt,
            duration,
            tick: 0,
        })
    }

    pub fn ticks_per_control(&self) -> u64 {
        (self.control_dt / self.physics_dt).round() as u64
    }

    pub fn control_ticks(&self) -> u64 {
        (self.duration / self.control_dt + 1e-9).floor() as u64
    }

    pub fn time(&self) -> f64 {
        self.tick as f64 * self.physics_dt
    }

    pub fn is_control_tick(&self) -> bool {
        self.tick % self.ticks_per_control() == 0
    }
}

/// Result of one physics step.
#[derive(Debug, Clone)]
pub struct PlantStep {
    pub joints: JointState,
    /// q̈ used for the update.
    pub qdd: DVector<f64>,
    /// Contact wrench at the pre-step state, in {i}.
    pub f_e: Wrench,
    /// Friction torque actually applied (implicit in q̇).
    pub friction: DVector<f64>,
}

/// Environment seen by the plant during one step.
#[derive(Debug, Clone, Copy)]
pub struct PlantWorld<'a> {
    pub base: &'a BaseState,
    pub wall: Option<&'a WallModel>,
    /// Exogenous wrench f_d on the end effector, in {i}.
    pub disturbance: Vector6<f64>,
}

/// M_q⁻¹(τ + Ĵᵀ(f_e + f_d) − C_q q̇ − G_q), the frictionless acceleration.
fn smooth_acceleration(
    model: &RobotModel,
    joints: &JointState,
    tau: &DVector<f64>,
    world: &PlantWorld<'_>,
) -> Result<(DVector<f64>, Wrench, DMatrix<f64>)> {
    let js = joint_space_matrices_with_base(model, joints, &world.base.rotation);
    let jhat = augmented_jacobian(&jacobian(model, joints), world.base);
    let f_e = match world.wall {
        Some(wall) => {
            let pose = forward_kinematics(model, joints, world.base);
            let xd = ee_velocity(model, joints, world.base);
            contact_wrench(wall, &pose.position, &Vector3::new(xd[0], xd[1], xd[2]))
        }
        None => Wrench::zero(Frame::Inertial),
    };
    let ext = f_e.to_vector() + world.disturbance;
    let rhs = tau + jhat.transpose() * ext - &js.coriolis * &joints.qd - &js.gravity;
    let qdd = js
        .mass
        .clone()
        .cholesky()
        .ok_or_else(|| Error::InvalidModel("mass matrix lost positive definiteness".into()))?
        .solve(&rhs);
    Ok((qdd, f_e, js.mass))
}

/// Velocity change Δ from friction over one step, implicit in the linearized
/// friction: (M − dt·∂F/∂q̇) Δ = dt·F(q̇).
fn friction_correction(model: &RobotModel, mass: &DMatrix<f64>, qd: &DVector<f64>, dt: f64) -> Result<(DVector<f64>, DVector<f64>)> {
    let fric = joint_friction(model, qd);
    let slope = joint_friction_slope(model, qd);
    let mut lhs = mass.clone();
    for i in 0..lhs.nrows() {
        lhs[(i, i)] -= dt * slope[i];
    }
    let delta = lhs
        .cholesky()
        .ok_or_else(|| Error::InvalidModel("mass matrix lost positive definiteness".into()))?
        .solve(&(&fric * dt));
    let applied = fric + slope.component_mul(&delta);
    Ok((delta, applied))
}

/// One physics step of M_q q̈ = τ + Ĵᵀ(f_e + f_d) − C_q q̇ − G_q + F(q̇) with
/// the base held at `world.base`.
pub fn integrate_step(model: &RobotModel, joints: &JointState, tau: &DVector<f64>, world: &PlantWorld<'_>, dt: f64) -> Result<PlantStep> {
    integrate_step_with(Integrator::default(), model, joints, tau, world, dt)
}

/// Either scheme treats friction implicitly, so the steep tanh Coulomb model
/// stays stable at millisecond steps. RK4 covers the remaining dynamics and
/// friction is applied as a split correction after it.
pub fn integrate_step_with(
    integrator: Integrator,
    model: &RobotModel,
    joints: &JointState,
    tau: &DVector<f64>,
    world: &PlantWorld<'_>,
    dt: f64,
) -> Result<PlantStep> {
    let (a1, f_e, mass) = smooth_acceleration(model, joints, tau, world)?;
    let (q, qd, qdd, friction) = match integrator {
        Integrator::SemiImplicitEuler => {
            let (delta, applied) = friction_correction(model, &mass, &joints.qd, dt)?;
            let qdd = a1 + &delta / dt;
            let qd = &joints.qd + &qdd * dt;
            let q = &joints.q + &qd * dt;
            (q, qd, qdd, applied)
        }
        Integrator::Rk4 => {
            let stage = |dq: &DVector<f64>, dv: &DVector<f64>| -> Result<DVector<f64>> {
                let s = JointState {
                    q: &joints.q + dq,
                    qd: &joints.qd + dv,
                };
                Ok(smooth_acceleration(model, &s, tau, world)?.0)
            };
            let v1 = joints.qd.clone();
            let a2 = stage(&(&v1 * (0.5 * dt)), &(&a1 * (0.5 * dt)))?;
            let v2 = &joints.qd + &a1 * (0.5 * dt);
            let a3 = stage(&(&v2 * (0.5 * dt)), &(&a2 * (0.5 * dt)))?;
            let v3 = &joints.qd + &a2 * (0.5 * dt);
            let a4 = stage(&(&v3 * dt), &(&a3 * dt))?;
            let v4 = &joints.qd + &a3 * dt;
            let q = &joints.q + (&v1 + &v2 * 2.0 + &v3 * 2.0 + &v4) * (dt / 6.0);
            let qd = &joints.qd + (&a1 + &a2 * 2.0 + &a3 * 2.0 + &a4) * (dt / 6.0);
            let (delta, applied) = friction_correction(model, &mass, &qd, dt)?;
            let q = q + &delta * dt;
            let qd = qd + &delta;
            (q, qd, a1 + &delta / dt, applied)
        }
    };
    let next = JointState { q, qd };
    if !next.is_finite() {
        return Err(Error::InvalidModel("non-finite plant state".into()));
    }
    Ok(PlantStep {
        joints: next,
        qdd,
        f_e,
        friction,
    })
}

/// Damped least-squares position solve for the end effector.
pub fn solve_position(model: &RobotModel, base: &BaseState, seed: &[f64], target: &Vector3<f64>) -> Result<DVector<f64>> {
    let mut q = DVector::from_column_slice(seed);
    for _ in 0..500 {
        let joints = JointState {
            q: q.clone(),
            qd: DVector::zeros(q.len()),
        };
        let err = target - forward_kinematics(model, &joints, base).position;
        if err.norm() < 1e-12 {
            return Ok(q);
        }
        let jv = base.rotation.matrix() * jacobian(model, &joints).rows(0, 3);
        let jjt = &jv * jv.transpose() + nalgebra::Matrix3::identity() * 1e-4;
        let step = jv.transpose() * jjt.try_inverse().expect("damped 3x3 is invertible") * err;
        q += step;
    }
    Err(Error::config("ee_start", "start position is not reachable from initial_joints"))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "lowercase")]
pub enum RunStatus {
    Ok,
    Failed { tick: u64, reason: String },
}

impl RunStatus {
    pub fn is_ok(&self) -> bool {
        *self == RunStatus::Ok
    }
}

/// One row per control tick; columns named by [`RunRecord::columns`].
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub status: RunStatus,
    pub seed: u64,
    pub saturation_events: u64,
    pub nonconformant: bool,
    pub worst_margin: f64,
}

fn record_columns(n: usize) -> Vec<String> {
    let mut c = vec!["t".to_string()];
    let six = |p: &'static str| (0..6).map(move |i| format!("{p}{i}"));
    c.extend((0..n).map(|i| format!("q{i}")));
    c.extend((0..n).map(|i| format!("qd{i}")));
    c.extend(six("x"));
    c.extend(six("xdes"));
    c.extend(six("xdot"));
    c.extend(six("e"));
    c.extend(["eta_x", "eta_y", "eta_yaw", "etadot_x", "etadot_y", "etadot_yaw"].map(String::from));
    c.extend(six("fe"));
    c.extend(six("fe_meas"));
    c.extend(six("fed"));
    c.extend(six("ef"));
    c.extend(six("fcmd"));
    c.extend((0..n).map(|i| format!("tau{i}")));
    c.extend(six("mu"));
    c.extend(six("iface"));
    c.extend(["V", "margin", "saturated", "force_mode"].map(String::from));
    c
}

impl RunRecord {
    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::UnknownChannel(name.to_string()))
    }

    pub fn channel(&self, name: &str) -> Result<Vec<f64>> {
        let i = self.column_index(name)?;
        Ok(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn times(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r[0]).collect()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# mobile-ude run record v{RECORD_VERSION}")?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| format!("{v:e}")))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }
}

/// Desired trajectory generator for a scenario.
#[derive(Debug, Clone)]
pub struct TargetPlan {
    pub start: Pose,
    pub base_x0: f64,
    pub protocol: Protocol,
}

impl TargetPlan {
    pub fn target_at(&self, t: f64, base: &BaseMotion) -> ControlTarget {
        let mut target = ControlTarget::hold(self.start);
        if let Protocol::Wall(p) = &self.protocol {
            self.apply_wall(p, t, base, &mut target);
        }
        target
    }

    fn apply_wall(&self, p: &WallProtocol, t: f64, base: &BaseMotion, target: &mut ControlTarget) {
        if p.follow_base {
            target.pose.position.x += base.state.position.x - self.base_x0;
            target.velocity[0] = base.state.linear_velocity.x;
            target.acceleration[0] = base.linear_acceleration.x;
        }
        if let Some(w) = &p.wave {
            let (x, v, a) = w.at(t);
            target.pose.position[w.axis] += x;
            target.velocity[w.axis] = v;
            target.acceleration[w.axis] = a;
        }
        if let Some(r) = &p.retract {
            let (x, v, a) = r.at(t - p.motion_switch);
            target.pose.position[p.force_axis] += x;
            target.velocity[p.force_axis] += v;
            target.acceleration[p.force_axis] += a;
        }
        if p.in_force_mode(t) {
            target.modes[p.force_axis] = AxisMode::Force;
            target.force[p.force_axis] = -p.force_at(t);
        }
    }
}

/// Plant, controller and world assembled from a validated config.
pub struct Scenario {
    pub config: ScenarioConfig,
    pub plant: RobotModel,
    pub nominal: RobotModel,
    pub clock: SimClock,
    pub initial: JointState,
    pub plan: TargetPlan,
}

impl Scenario {
    pub fn new(config: &ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let plant = config.robot.build()?;
        let nominal = plant.scaled_inertia(config.model_mass_scale);
        let c = &config.clock;
        let clock = SimClock::new(c.physics_dt, c.control_dt, c.duration)?;
        let base0 = config.base.base_state_at(0.0).state;

        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let (q0, start) = match config.ee_start {
            Some(p) => {
                let nominal_p = Vector3::from(p);
                let q = solve_position(&plant, &base0, &config.initial_joints, &nominal_p)?;
                let start = forward_kinematics(&plant, &JointState::at_rest(q.as_slice()), &base0);
                let a = config.initial_perturbation;
                let q0 = if a > 0.0 {
                    let mut offset = Vector3::new(rng.gen_range(-a..=a), rng.gen_range(-a..=a), rng.gen_range(-a..=a));
                    if let Protocol::Wall(w) = &config.protocol {
                        // never start inside the wall
                        offset[w.force_axis] = -offset[w.force_axis].abs();
                    }
                    solve_position(&plant, &base0, q.as_slice(), &(nominal_p + offset))?
                } else {
                    q
                };
                (q0, start)
            }
            None => {
                let q = DVector::from_column_slice(&config.initial_joints);
                let start = forward_kinematics(&plant, &JointState::at_rest(q.as_slice()), &base0);
                (q, start)
            }
        };
        Ok(Scenario {
            config: config.clone(),
            initial: JointState {
                qd: DVector::zeros(q0.len()),
                q: q0,
            },
            plan: TargetPlan {
                start,
                base_x0: base0.position.x,
                protocol: config.protocol.clone(),
            },
            plant,
            nominal,
            clock,
        })
    }
}

/// Interface-sensor reconstruction: the part of the task-space balance that
/// actuation, contact and disturbance do not explain,
/// M₀ẍ + C₀ẋ + G₀ − Ĵ⁻ᵀ(τ + τ_friction) − f_e − f_d, with the exact inverse of Ĵ.
fn interface_wrench(
    model: &RobotModel,
    joints: &JointState,
    motion: &BaseMotion,
    step: &PlantStep,
    tau: &DVector<f64>,
    disturbance: &Vector6<f64>,
) -> Vector6<f64> {
    let base = &motion.state;
    let js = joint_space_matrices_with_base(model, joints, &base.rotation);
    let jhat = augmented_jacobian(&jacobian(model, joints), base);
    let jdot = jacobian_time_derivative(model, joints, base);
    let m = task_space_matrices(&js.mass, &js.coriolis, &js.gravity, &jhat, &jdot, 0.0);
    let xdot = ee_velocity(model, joints, base);
    let xddot = motion.acceleration()
        + &jhat * &step.qdd
        + &jdot * &joints.qd
        + coupling_velocity_rate(motion, joints, model);
    let xddot = Vector6::from_column_slice(xddot.as_slice());
    let actuation = m.jacobian_pinv.transpose() * (tau + &step.friction);
    let actuation = Vector6::from_column_slice(actuation.as_slice());
    m.mass * xddot + m.coriolis * xdot + m.gravity - actuation - step.f_e.to_vector() - disturbance
}

/// Model prediction μ_c = M₀(η̈+ḋ) + C₀(η̇+d) for the plant model.
fn predicted_coupling(model: &RobotModel, joints: &JointState, motion: &BaseMotion, damping: f64) -> Vector6<f64> {
    let ts = TaskState::compute(model, joints, &motion.state, damping);
    let d_rate = coupling_velocity_rate(motion, joints, model);
    coupling_wrench(
        &ts.matrices.mass,
        &ts.matrices.coriolis,
        &motion.state,
        &ts.coupling_velocity,
        &d_rate,
        &motion.acceleration(),
    )
    .to_vector()
}

fn sensor_seed(seed: u64, stream: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(stream)
}

/// Closed-loop run of a scenario.
pub fn run_scenario(config: &ScenarioConfig) -> Result<RunRecord> {
    let sc = Scenario::new(config)?;
    run(&sc)
}

pub fn run(sc: &Scenario) -> Result<RunRecord> {
    let cfg = &sc.config;
    let n = sc.plant.dof();
    let dt = sc.clock.physics_dt;
    let per = sc.clock.ticks_per_control();
    let mut controller = Controller::new(cfg.controller.clone(), sc.nominal.clone(), sc.clock.control_dt)?;
    let mut monitor = StabilityMonitor::default();
    let mut ft = WrenchSensor::new(cfg.sensors.force_torque, dt, sensor_seed(cfg.seed, 1));
    let mut iface_sensor = WrenchSensor::new(cfg.sensors.interface, dt, sensor_seed(cfg.seed, 2));

    let mut joints = sc.initial.clone();
    let mut rows = Vec::with_capacity(sc.clock.control_ticks() as usize + 1);
    let mut status = RunStatus::Ok;
    let mut saturation_events = 0;
    let mut fe_meas = Vector6::zeros();
    let mut fe_true = Wrench::zero(Frame::Inertial);

    'outer: for k in 0..=sc.clock.control_ticks() {
        let tick0 = k * per;
        let t = tick0 as f64 * dt;
        let motion = cfg.base.base_state_at(t);
        let base = motion.state;
        let target = sc.plan.target_at(t, &motion);
        if k == 0 {
            // contact at the start state, before the first physics step
            if let Some(w) = &cfg.wall {
                let pose = forward_kinematics(&sc.plant, &joints, &base);
                let v = ee_velocity(&sc.plant, &joints, &base);
                fe_true = contact_wrench(w, &pose.position, &Vector3::new(v[0], v[1], v[2]));
            }
            fe_meas = ft.sense(0, &fe_true.to_vector());
        }
        let measured = JointState {
            q: quantize(&joints.q, cfg.sensors.encoder_quantization),
            qd: joints.qd.clone(),
        };
        let fe_wrench = Wrench::from_vector(&fe_meas, Frame::Inertial);

        let (tau, out) = match &cfg.protocol {
            Protocol::JointRegulation {
                joints: q_ref,
                stiffness,
                damping,
            } => {
                let js = joint_space_matrices_with_base(&sc.nominal, &measured, &base.rotation);
                let tau = DVector::from_fn(n, |i, _| {
                    js.gravity[i] - stiffness * (measured.q[i] - q_ref[i]) - damping * measured.qd[i]
                });
                (tau, None)
            }
            _ => {
                let tracked = if cfg.controller.kind.sees_base_motion() {
                    target.clone()
                } else {
                    relative_to_base(&target, &motion)
                };
                let out = controller.step(&ControlInputs {
                    joints: &measured,
                    base: &base,
                    target: &tracked,
                    f_e: &fe_wrench,
                })?;
                (out.tau.clone(), Some(out))
            }
        };
        if let Some(o) = &out {
            if o.saturated {
                saturation_events += 1;
            }
            if o.failed {
                status = RunStatus::Failed {
                    tick: tick0,
                    reason: "non-finite control wrench".into(),
                };
            }
        }
        let diag = out.as_ref().map(|o| {
            monitor.update(&o.task_mass, &o.errors, &target, &cfg.controller.impedance, &o.estimate)
        });

        let mut row_state = None;
        for j in 0..per {
            let tick = tick0 + j;
            let tp = tick as f64 * dt;
            let m = if j == 0 { motion } else { cfg.base.base_state_at(tp) };
            let dist = cfg.disturbance.as_ref().map(|d| Vector6::from(d.at(tp))).unwrap_or_else(Vector6::zeros);
            let world = PlantWorld {
                base: &m.state,
                wall: cfg.wall.as_ref(),
                disturbance: dist,
            };
            let step = match integrate_step_with(cfg.clock.integrator, &sc.plant, &joints, &tau, &world, dt) {
                Ok(s) => s,
                Err(e) => {
                    if status.is_ok() {
                        status = RunStatus::Failed {
                            tick,
                            reason: e.to_string(),
                        };
                    }
                    break 'outer;
                }
            };
            fe_true = step.f_e;
            fe_meas = ft.sense(tick, &fe_true.to_vector());
            if j == 0 {
                let mu = predicted_coupling(&sc.plant, &joints, &m, cfg.controller.pinv_damping);
                let iface = interface_wrench(&sc.plant, &joints, &m, &step, &tau, &dist);
                row_state = Some((joints.clone(), step.f_e, mu, iface_sensor.sense(tick, &iface)));
            }
            joints = step.joints;
        }
        if k == sc.clock.control_ticks() && row_state.is_none() {
            break;
        }
        let (js0, fe0, mu, iface) = row_state.expect("at least one physics step per control tick");

        let pose = forward_kinematics(&sc.plant, &js0, &base);
        let xdot = ee_velocity(&sc.plant, &js0, &base);
        let e = pose.error_from(&target.pose);
        let fed = target.force;
        let fe0v = fe0.to_vector();
        let ef = Vector6::from_fn(|i, _| match target.modes[i] {
            AxisMode::Force => fe0v[i] - fed[i],
            AxisMode::Motion => 0.0,
        });
        let [_, _, yaw] = base.euler_zyx();
        let twist = base.twist();
        let mut row = Vec::with_capacity(64 + 3 * n);
        row.push(t);
        row.extend(js0.q.iter());
        row.extend(js0.qd.iter());
        row.extend(pose.to_coordinates().iter());
        row.extend(target.pose.to_coordinates().iter());
        row.extend(xdot.iter());
        row.extend(e.iter());
        row.extend([base.position.x, base.position.y, yaw, twist[0], twist[1], twist[5]]);
        row.extend(fe0v.iter());
        row.extend(fe_wrench.to_vector().iter());
        row.extend(fed.iter());
        row.extend(ef.iter());
        row.extend(out.as_ref().map(|o| o.wrench).unwrap_or_else(Vector6::zeros).iter());
        row.extend(tau.iter());
        row.extend(mu.iter());
        row.extend(iface.iter());
        let (v, margin) = diag.map(|d| (d.lyapunov, d.margin)).unwrap_or((0.0, 0.0));
        row.extend([
            v,
            margin,
            out.as_ref().map(|o| o.saturated as u8 as f64).unwrap_or(0.0),
            target.any_force_axis() as u8 as f64,
        ]);
        rows.push(row);
        if !status.is_ok() {
            break;
        }
    }

    Ok(RunRecord {
        columns: record_columns(n),
        rows,
        status,
        seed: cfg.seed,
        saturation_events,
        nonconformant: monitor.is_nonconformant(),
        worst_margin: if monitor.worst_margin().is_finite() {
            monitor.worst_margin()
        } else {
            0.0
        },
    })
}

/// Paired series from a coupling-validation run.
#[derive(Debug, Clone)]
pub struct CouplingSeries {
    pub time: Vec<f64>,
    pub predicted: Vec<Vector6<f64>>,
    pub measured: Vec<Vector6<f64>>,
}

impl CouplingSeries {
    pub fn from_record(record: &RunRecord) -> Result<Self> {
        let mu: Vec<usize> = (0..6).map(|i| record.column_index(&format!("mu{i}"))).collect::<Result<_>>()?;
        let fi: Vec<usize> = (0..6).map(|i| record.column_index(&format!("iface{i}"))).collect::<Result<_>>()?;
        Ok(CouplingSeries {
            time: record.times(),
            predicted: record.rows.iter().map(|r| Vector6::from_fn(|i, _| r[mu[i]])).collect(),
            measured: record.rows.iter().map(|r| Vector6::from_fn(|i, _| r[fi[i]])).collect(),
        })
    }

    /// Per-axis (RMSE, MAE, peak |predicted|).
    pub fn discrepancy(&self) -> [(f64, f64, f64); 6] {
        let n = self.time.len().max(1) as f64;
        let mut out = [(0.0, 0.0, 0.0); 6];
        for (p, m) in self.predicted.iter().zip(&self.measured) {
            for i in 0..6 {
                let d = p[i] - m[i];
                out[i].0 += d * d;
                out[i].1 += d.abs();
                out[i].2 = f64::max(out[i].2, p[i].abs());
            }
        }
        out.map(|(s, a, pk)| ((s / n).sqrt(), a / n, pk))
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        header.extend((0..6).map(|i| format!("mu{i}")));
        header.extend((0..6).map(|i| format!("iface{i}")));
        w.write_record(&header)?;
        for (k, t) in self.time.iter().enumerate() {
            let mut row = vec![format!("{t:e}")];
            row.extend(self.predicted[k].iter().map(|v| format!("{v:e}")));
            row.extend(self.measured[k].iter().map(|v| format!("{v:e}")));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Runs a joint-regulation scenario and pairs μ_c with the interface wrench.
pub fn coupling_validation_run(config: &ScenarioConfig) -> Result<(RunRecord, CouplingSeries)> {
    if !matches!(config.protocol, Protocol::JointRegulation { .. }) {
        return Err(Error::config("protocol", "coupling validation needs the joint-regulation protocol"));
    }
    let record = run_scenario(config)?;
    let series = CouplingSeries::from_record(&record)?;
    Ok((record, series))
}
