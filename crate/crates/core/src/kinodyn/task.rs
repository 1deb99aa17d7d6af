//! Coupling-integrated task-space model.

use nalgebra::{DMatrix, DVector, Matrix6, Vector6};

use super::dynamics::{joint_space_matrices_with_base, JointSpaceMatrices};
use super::kinematics::{
    augmented_jacobian, coupling_velocity_term, damped_pseudoinverse, forward_kinematics, jacobian,
    jacobian_time_derivative, Pose,
};
use super::model::{BaseState, Frame, JointState, RobotModel, Wrench};

/// Default damping of the task-space pseudo-inverse.
pub const DEFAULT_DAMPING: f64 = 0.01;
/// Smallest singular value of Ĵ below which the configuration is flagged.
pub const SINGULARITY_THRESHOLD: f64 = 1e-3;

#[derive(Debug, Clone)]
pub struct TaskMatrices {
    pub mass: Matrix6<f64>,
    pub coriolis: Matrix6<f64>,
    pub gravity: Vector6<f64>,
    /// Ĵ†, n×6.
    pub jacobian_pinv: DMatrix<f64>,
    pub min_singular_value: f64,
    pub near_singular: bool,
}

fn to_m6(m: &DMatrix<f64>) -> Matrix6<f64> {
    Matrix6::from_fn(|r, c| m[(r, c)])
}

/// M = Ĵ†ᵀM_qĴ†, C = Ĵ†ᵀC_qĴ† − Ĵ†ᵀM_qĴ†Ĵ̇Ĵ†, G = Ĵ†ᵀG_q.
pub fn task_space_matrices(
    mq: &DMatrix<f64>,
    cq: &DMatrix<f64>,
    gq: &DVector<f64>,
    jhat: &DMatrix<f64>,
    jhat_dot: &DMatrix<f64>,
    damping: f64,
) -> TaskMatrices {
    let inv = damped_pseudoinverse(jhat, damping);
    let jp = &inv.inverse;
    let jpt = jp.transpose();
    let mass = &jpt * mq * jp;
    let coriolis = &jpt * cq * jp - &mass * jhat_dot * jp;
    let gravity = &jpt * gq;
    TaskMatrices {
        mass: to_m6(&mass),
        coriolis: to_m6(&coriolis),
        gravity: Vector6::from_column_slice(gravity.as_slice()),
        jacobian_pinv: inv.inverse.clone(),
        min_singular_value: inv.min_singular_value,
        near_singular: inv.min_singular_value < SINGULARITY_THRESHOLD,
    }
}

/// μ_c = M₀(η̈ + ḋ) + C₀(η̇ + d).
pub fn coupling_wrench(
    mass: &Matrix6<f64>,
    coriolis: &Matrix6<f64>,
    base: &BaseState,
    d: &Vector6<f64>,
    d_rate: &Vector6<f64>,
    base_accel: &Vector6<f64>,
) -> Wrench {
    let v = mass * (base_accel + d_rate) + coriolis * (base.twist() + d);
    Wrench::from_vector(&v, Frame::Inertial)
}

/// Everything the task-space controller needs at one instant.
#[derive(Debug, Clone)]
pub struct TaskState {
    pub pose: Pose,
    /// ẋ = [ṗ_x; ω_ee] in {i}.
    pub velocity: Vector6<f64>,
    pub jacobian: DMatrix<f64>,
    pub jacobian_dot: DMatrix<f64>,
    pub matrices: TaskMatrices,
    /// d.
    pub coupling_velocity: Vector6<f64>,
    pub joint: JointSpaceMatrices,
}

impl TaskState {
    /// Builds the full coupling-integrated state for (q, q̇) on a base.
    pub fn compute(model: &RobotModel, joints: &JointState, base: &BaseState, damping: f64) -> Self {
        let js = joint_space_matrices_with_base(model, joints, &base.rotation);
        let jhat = augmented_jacobian(&jacobian(model, joints), base);
        let jhat_dot = jacobian_time_derivative(model, joints, base);
        let matrices = task_space_matrices(&js.mass, &js.coriolis, &js.gravity, &jhat, &jhat_dot, damping);
        let d = coupling_velocity_term(base, joints, model);
        let velocity = base.twist() + &jhat * &joints.qd + d;
        TaskState {
            pose: forward_kinematics(model, joints, base),
            velocity: Vector6::from_column_slice(velocity.as_slice()),
            jacobian: jhat,
            jacobian_dot: jhat_dot,
            matrices,
            coupling_velocity: d,
            joint: js,
        }
    }

    /// Same as [`TaskState::compute`] with the base treated as momentarily
    /// fixed: its pose is used but its velocity is dropped from ẋ, d and Ĵ̇.
    pub fn compute_fixed_base(model: &RobotModel, joints: &JointState, base: &BaseState, damping: f64) -> Self {
        let frozen = BaseState {
            linear_velocity: nalgebra::Vector3::zeros(),
            angular_velocity: nalgebra::Vector3::zeros(),
            ..*base
        };
        TaskState::compute(model, joints, &frozen, damping)
    }
}
