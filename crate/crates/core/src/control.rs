//! Hybrid motion/force impedance control: the plain impedance law and the
//! UDE-based controllers, mapped to joint torques through Ĵᵀ.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DVector, Matrix6, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinodyn::{BaseMotion, BaseState, Frame, JointState, Pose, RobotModel, TaskState, Wrench};
use crate::sigproc::{CompositeOperators, FilterBank, UdeFilterSpec};

pub const DEFAULT_TORQUE_LIMIT: [f64; 6] = [6.0, 6.0, 3.0, 2.0, 2.0, 2.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AxisMode {
    Motion,
    Force,
}

/// Diagonal impedance gains. The target inertia is M₀ itself.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImpedanceParams {
    /// C_d
    pub damping: [f64; 6],
    /// K_d
    pub stiffness: [f64; 6],
    /// K_f,d
    pub force_gain: [f64; 6],
}

impl ImpedanceParams {
    pub fn paper() -> Self {
        ImpedanceParams {
            damping: [2.0, 2.0, 2.0, 1.0, 1.0, 1.0],
            stiffness: [200.0, 200.0, 200.0, 20.0, 20.0, 20.0],
            force_gain: [0.0, 5.0, 0.0, 0.0, 0.0, 0.0],
        }
    }

    pub fn experiment() -> Self {
        ImpedanceParams {
            damping: [10.0, 10.0, 10.0, 1.0, 1.0, 1.0],
            stiffness: [25.0, 25.0, 25.0, 2.5, 2.5, 2.5],
            force_gain: [0.0, 1.0, 0.0, 0.0, 0.0, 0.0],
        }
    }

    pub fn validate(&self) -> Result<()> {
        for i in 0..6 {
            if !(self.damping[i] >= 0.0) {
                return Err(Error::config(format!("impedance.damping[{i}]"), "must be >= 0"));
            }
            if !(self.stiffness[i] > 0.0) {
                return Err(Error::config(format!("impedance.stiffness[{i}]"), "must be > 0"));
            }
            if !(self.force_gain[i] >= 0.0) {
                return Err(Error::config(format!("impedance.force_gain[{i}]"), "must be >= 0"));
            }
        }
        Ok(())
    }

    /// K_f,d with rows of motion axes zeroed.
    pub fn force_gain_for(&self, modes: &[AxisMode; 6]) -> Vector6<f64> {
        Vector6::from_fn(|i, _| match modes[i] {
            AxisMode::Force => self.force_gain[i],
            AxisMode::Motion => 0.0,
        })
    }
}

/// Desired motion/force trajectory sample, all in {i}.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlTarget {
    pub pose: Pose,
    pub velocity: Vector6<f64>,
    pub acceleration: Vector6<f64>,
    /// f_e,d: desired wrench exerted by the environment on the end effector.
    pub force: Vector6<f64>,
    pub modes: [AxisMode; 6],
}

impl ControlTarget {
    /// Hold a pose in full motion mode.
    pub fn hold(pose: Pose) -> Self {
        ControlTarget {
            pose,
            velocity: Vector6::zeros(),
            acceleration: Vector6::zeros(),
            force: Vector6::zeros(),
            modes: [AxisMode::Motion; 6],
        }
    }

    pub fn any_force_axis(&self) -> bool {
        self.modes.contains(&AxisMode::Force)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ControllerKind {
    /// Extended UDE with explicit coupling compensation.
    C1,
    /// UDE on the coupling-integrated model.
    C2,
    /// UDE on a fixed-base model.
    C3,
    /// Impedance control with feedback linearization, no estimator.
    C4,
}

impl ControllerKind {
    pub const ALL: [ControllerKind; 4] = [
        ControllerKind::C1,
        ControllerKind::C2,
        ControllerKind::C3,
        ControllerKind::C4,
    ];

    pub fn uses_ude(self) -> bool {
        self != ControllerKind::C4
    }

    pub fn compensates_coupling(self) -> bool {
        self == ControllerKind::C1
    }

    pub fn sees_base_motion(self) -> bool {
        self != ControllerKind::C3
    }

    pub fn description(self) -> &'static str {
        match self {
            ControllerKind::C1 => "extended UDE + coupling model",
            ControllerKind::C2 => "UDE + coupling model",
            ControllerKind::C3 => "UDE, fixed-base model",
            ControllerKind::C4 => "impedance control",
        }
    }
}

impl fmt::Display for ControllerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for ControllerKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "C1" => Ok(ControllerKind::C1),
            "C2" => Ok(ControllerKind::C2),
            "C3" => Ok(ControllerKind::C3),
            "C4" => Ok(ControllerKind::C4),
            _ => Err(Error::config("controller", format!("unknown controller '{s}' (expected C1..C4)"))),
        }
    }
}

/// (e, ė, e_f).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImpedanceErrors {
    pub e: Vector6<f64>,
    pub ed: Vector6<f64>,
    pub ef: Vector6<f64>,
}

/// e = x − x_d (rotation-log orientation part), ė = ẋ − ẋ_d, e_f = f_e − f_e,d
/// on force axes and zero elsewhere.
pub fn impedance_error(state: &TaskState, target: &ControlTarget, f_e: &Wrench) -> Result<ImpedanceErrors> {
    f_e.expect_frame(Frame::Inertial)?;
    let fe = f_e.to_vector();
    Ok(ImpedanceErrors {
        e: state.pose.error_from(&target.pose),
        ed: state.velocity - target.velocity,
        ef: Vector6::from_fn(|i, _| match target.modes[i] {
            AxisMode::Force => fe[i] - target.force[i],
            AxisMode::Motion => 0.0,
        }),
    })
}

/// G_f1 and sG_f1 banks of the coupling feedforward.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingFilters {
    pub coupling: FilterBank,
    pub coupling_derivative: FilterBank,
}

impl CouplingFilters {
    pub fn new(spec: &UdeFilterSpec, sample_period: f64) -> Result<Self> {
        let f = crate::sigproc::UdeFilters::new(spec, sample_period)?;
        Ok(CouplingFilters {
            coupling: f.coupling,
            coupling_derivative: f.coupling_derivative,
        })
    }
}

/// f_c = −sG_f1∗M₀(η̇+d) − G_f1∗C₀(η̇+d) + C₀ẋ_d + G₀ − f_e.
///
/// The inertial term is M₀ times the filtered derivative of η̇+d, an estimate
/// of G_f1∗M₀(η̈+ḋ); differentiating the product M₀(η̇+d) would add a
/// spurious Ṁ₀(η̇+d). Without `filters` the coupling terms are omitted. Only
/// the base twist is read, never its acceleration.
pub fn feedforward_fc(
    state: &TaskState,
    base: &BaseState,
    target: &ControlTarget,
    f_e: &Wrench,
    filters: Option<&mut CouplingFilters>,
) -> Vector6<f64> {
    let m = &state.matrices;
    let mut fc = m.coriolis * target.velocity + m.gravity - f_e.to_vector();
    if let Some(f) = filters {
        let w = base.twist() + state.coupling_velocity;
        fc -= m.mass * f.coupling_derivative.step(&w);
        fc -= f.coupling.step(&(m.coriolis * w));
    }
    fc
}

/// The target as tracked by a controller that treats the base as fixed: the
/// same pose, with velocity and acceleration taken relative to the moving base.
pub fn relative_to_base(target: &ControlTarget, base: &BaseMotion) -> ControlTarget {
    let b = &base.state;
    let (w, alpha) = (b.angular_velocity, base.angular_acceleration);
    let r = target.pose.position - b.position;
    let v_d = target.velocity.fixed_rows::<3>(0).into_owned();
    let a_d = target.acceleration.fixed_rows::<3>(0).into_owned();
    let r_dot = v_d - b.linear_velocity;
    let v = r_dot - w.cross(&r);
    let a = a_d - base.linear_acceleration - alpha.cross(&r) - w.cross(&r_dot);
    let mut out = target.clone();
    for i in 0..3 {
        out.velocity[i] = v[i];
        out.velocity[i + 3] -= w[i];
        out.acceleration[i] = a[i];
        out.acceleration[i + 3] -= alpha[i];
    }
    out
}

/// v = M₀ẍ_d − C_dė − K_de + K_f,d e_f.
pub fn impedance_input(
    mass: &Matrix6<f64>,
    target: &ControlTarget,
    err: &ImpedanceErrors,
    params: &ImpedanceParams,
) -> Vector6<f64> {
    let kf = params.force_gain_for(&target.modes);
    mass * target.acceleration
        - Vector6::from(params.damping).component_mul(&err.ed)
        - Vector6::from(params.stiffness).component_mul(&err.e)
        + kf.component_mul(&err.ef)
}

/// f_u = 1/(1−G_f2)∗v − sG_f2/(1−G_f2)∗M₀ẋ, advancing the operators one step.
/// Returns (f_u, v).
pub fn feedback_fu(
    state: &TaskState,
    target: &ControlTarget,
    err: &ImpedanceErrors,
    params: &ImpedanceParams,
    ops: &mut CompositeOperators,
    hold: &[bool; 6],
) -> (Vector6<f64>, Vector6<f64>) {
    let v = impedance_input(&state.matrices.mass, target, err, params);
    let w = state.matrices.mass * state.velocity;
    (ops.step(&v, &w, hold), v)
}

/// Everything the controller is allowed to observe at a control tick.
#[derive(Debug, Clone, Copy)]
pub struct ControlInputs<'a> {
    pub joints: &'a JointState,
    /// Base pose and twist; accelerations are not part of the interface.
    pub base: &'a BaseState,
    pub target: &'a ControlTarget,
    /// Measured contact wrench in {i}.
    pub f_e: &'a Wrench,
}

#[derive(Debug, Clone)]
pub struct ControlOutput {
    pub tau: DVector<f64>,
    /// Commanded task-space wrench f = f_c + f_u.
    pub wrench: Vector6<f64>,
    pub feedforward: Vector6<f64>,
    pub feedback: Vector6<f64>,
    /// Lumped-uncertainty estimate û = v − f_u (zero for C4).
    pub estimate: Vector6<f64>,
    pub errors: ImpedanceErrors,
    pub task_mass: Matrix6<f64>,
    pub saturated: bool,
    pub near_singular: bool,
    /// Non-finite value somewhere in the chain; τ was zeroed.
    pub failed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerConfig {
    pub kind: ControllerKind,
    pub impedance: ImpedanceParams,
    pub filters: UdeFilterSpec,
    pub torque_limit: Vec<f64>,
    #[serde(default = "default_damping")]
    pub pinv_damping: f64,
    #[serde(default = "default_true")]
    pub anti_windup: bool,
}

fn default_damping() -> f64 {
    crate::kinodyn::task::DEFAULT_DAMPING
}

fn default_true() -> bool {
    true
}

impl ControllerConfig {
    pub fn paper(kind: ControllerKind) -> Self {
        ControllerConfig {
            kind,
            impedance: ImpedanceParams::paper(),
            filters: UdeFilterSpec::paper(),
            torque_limit: DEFAULT_TORQUE_LIMIT.to_vec(),
            pinv_damping: default_damping(),
            anti_windup: true,
        }
    }

    pub fn validate(&self, dof: usize) -> Result<()> {
        self.impedance.validate()?;
        self.filters
            .validate()
            .map_err(|e| Error::config("controller.filters", e.to_string()))?;
        if self.torque_limit.len() != dof {
            return Err(Error::config(
                "controller.torque_limit",
                format!("expected {dof} entries, got {}", self.torque_limit.len()),
            ));
        }
        if self.torque_limit.iter().any(|t| !(*t > 0.0)) {
            return Err(Error::config("controller.torque_limit", "entries must be > 0"));
        }
        if !(self.pinv_damping >= 0.0) {
            return Err(Error::config("controller.pinv_damping", "must be >= 0"));
        }
        Ok(())
    }
}

/// One controller instance with its filter states.
#[derive(Debug, Clone)]
pub struct Controller {
    pub config: ControllerConfig,
    /// Nominal model the controller believes in.
    pub model: RobotModel,
    coupling: Option<CouplingFilters>,
    ops: CompositeOperators,
    saturated_last: bool,
}

impl Controller {
    pub fn new(config: ControllerConfig, model: RobotModel, sample_period: f64) -> Result<Self> {
        config.validate(model.dof())?;
        let coupling = if config.kind.compensates_coupling() {
            Some(CouplingFilters::new(&config.filters, sample_period)?)
        } else {
            None
        };
        let ops = CompositeOperators::from_transfer_functions(&config.filters.lowpass(), sample_period)?;
        Ok(Controller {
            config,
            model,
            coupling,
            ops,
            saturated_last: false,
        })
    }

    pub fn kind(&self) -> ControllerKind {
        self.config.kind
    }

    pub fn integral_states(&self) -> Vector6<f64> {
        self.ops.integral_states()
    }

    /// Task state as this controller perceives it.
    pub fn task_state(&self, joints: &JointState, base: &BaseState) -> TaskState {
        if self.config.kind.sees_base_motion() {
            TaskState::compute(&self.model, joints, base, self.config.pinv_damping)
        } else {
            TaskState::compute_fixed_base(&self.model, joints, base, self.config.pinv_damping)
        }
    }

    /// One control tick: f = f_c + f_u (or the plain impedance law), τ = Ĵᵀf,
    /// clamped to the torque limit.
    pub fn step(&mut self, inputs: &ControlInputs<'_>) -> Result<ControlOutput> {
        let state = self.task_state(inputs.joints, inputs.base);
        let errors = impedance_error(&state, inputs.target, inputs.f_e)?;
        let params = self.config.impedance;
        let kind = self.config.kind;

        let (fc, fu, estimate) = if kind.uses_ude() {
            let fc = feedforward_fc(&state, inputs.base, inputs.target, inputs.f_e, self.coupling.as_mut());
            let hold = [self.config.anti_windup && self.saturated_last; 6];
            let (fu, v) = feedback_fu(&state, inputs.target, &errors, &params, &mut self.ops, &hold);
            (fc, fu, v - fu)
        } else {
            let fc = feedforward_fc(&state, inputs.base, inputs.target, inputs.f_e, None);
            let v = impedance_input(&state.matrices.mass, inputs.target, &errors, &params);
            (fc, v, Vector6::zeros())
        };
        let wrench = fc + fu;
        let raw = state.jacobian.transpose() * wrench;

        let failed = !raw.iter().all(|t| t.is_finite());
        let mut saturated = false;
        let tau = if failed {
            DVector::zeros(raw.len())
        } else {
            DVector::from_fn(raw.len(), |i, _| {
                let lim = self.config.torque_limit[i];
                if raw[i].abs() > lim {
                    saturated = true;
                }
                raw[i].clamp(-lim, lim)
            })
        };
        self.saturated_last = saturated;

        Ok(ControlOutput {
            tau,
            wrench,
            feedforward: fc,
            feedback: fu,
            estimate,
            errors,
            task_mass: state.matrices.mass,
            saturated,
            near_singular: state.matrices.near_singular,
            failed,
        })
    }
}

/// Per-step stability diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StabilityDiagnostics {
    /// δ_u ≈ |ėᵀû|/(ėᵀė + ε).
    pub delta_u: f64,
    /// min_i (C_d,i − δ_u).
    pub damping_margin: f64,
    pub damping_positive: bool,
    /// V = ½ėᵀM₀ė + ½eᵀK_de.
    pub lyapunov: f64,
    /// V(0) + ∫ėᵀK_f,d e_f dt.
    pub budget: f64,
    /// budget − V.
    pub margin: f64,
    pub nonconformant: bool,
}

/// Running check of the dissipation inequality V(t) ≤ V(0) + ∫ėᵀK_f,d e_f dt.
#[derive(Debug, Clone)]
pub struct StabilityMonitor {
    pub tolerance: f64,
    pub max_consecutive: usize,
    v0: Option<f64>,
    supplied: f64,
    /// Held force-port input K_f,d e_f and the error it acted from.
    last_drive: Vector6<f64>,
    last_e: Vector6<f64>,
    consecutive: usize,
    nonconformant: bool,
    worst_margin: f64,
}

impl Default for StabilityMonitor {
    fn default() -> Self {
        StabilityMonitor::new(1e-3, 5)
    }
}

impl StabilityMonitor {
    pub fn new(tolerance: f64, max_consecutive: usize) -> Self {
        StabilityMonitor {
            tolerance,
            max_consecutive,
            v0: None,
            supplied: 0.0,
            last_drive: Vector6::zeros(),
            last_e: Vector6::zeros(),
            consecutive: 0,
            nonconformant: false,
            worst_margin: f64::INFINITY,
        }
    }

    pub fn worst_margin(&self) -> f64 {
        self.worst_margin
    }

    pub fn is_nonconformant(&self) -> bool {
        self.nonconformant
    }

    pub fn update(
        &mut self,
        mass: &Matrix6<f64>,
        err: &ImpedanceErrors,
        target: &ControlTarget,
        params: &ImpedanceParams,
        estimate: &Vector6<f64>,
    ) -> StabilityDiagnostics {
        let kd = Vector6::from(params.stiffness);
        let kf = params.force_gain_for(&target.modes);
        let v = 0.5 * err.ed.dot(&(mass * err.ed)) + 0.5 * err.e.dot(&kd.component_mul(&err.e));
        // the force term is held over each control period, so the supplied
        // work is the held input times the displacement it drove
        let drive = kf.component_mul(&err.ef);
        match self.v0 {
            None => self.v0 = Some(v),
            Some(_) => self.supplied += self.last_drive.dot(&(err.e - self.last_e)),
        }
        self.last_drive = drive;
        self.last_e = err.e;
        let budget = self.v0.unwrap_or(v) + self.supplied;
        let margin = budget - v;
        self.worst_margin = self.worst_margin.min(margin);
        if margin < -self.tolerance {
            self.consecutive += 1;
            if self.consecutive > self.max_consecutive {
                self.nonconformant = true;
            }
        } else {
            self.consecutive = 0;
        }
        let delta_u = err.ed.dot(estimate).abs() / (err.ed.norm_squared() + 1e-9);
        let damping_margin = params.damping.iter().fold(f64::INFINITY, |a, c| a.min(c - delta_u));
        StabilityDiagnostics {
            delta_u,
            damping_margin,
            damping_positive: damping_margin > 0.0,
            lyapunov: v,
            budget,
            margin,
            nonconformant: self.nonconformant,
        }
    }
}
