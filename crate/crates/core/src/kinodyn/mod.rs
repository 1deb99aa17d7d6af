//! Rigid-body kinematics and dynamics of an arm on a moving base.

pub mod dynamics;
pub mod kinematics;
pub mod model;
pub mod task;

pub use dynamics::{joint_space_matrices, joint_space_matrices_with_base, JointSpaceMatrices};
pub use kinematics::{
    augmented_jacobian, coupling_velocity_rate, coupling_velocity_term, damped_pseudoinverse,
    ee_velocity, forward_kinematics, jacobian, jacobian_time_derivative, Pose,
};
pub use model::{BaseMotion, BaseState, Frame, JointState, Link, MountTransform, RobotModel, Wrench};
pub use task::{coupling_wrench, task_space_matrices, TaskMatrices, TaskState};
