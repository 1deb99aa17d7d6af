//! Joint-space dynamics: M_q by the composite-rigid-body method, G_q from the
//! potential-energy gradient and C_q from the Christoffel symbols of M_q.

use nalgebra::{DMatrix, DVector, Matrix3, Matrix6, Rotation3, Vector3, Vector6};

use super::kinematics::{chain_frames, ChainFrames};
use super::model::{JointState, RobotModel};

#[derive(Debug, Clone)]
pub struct JointSpaceMatrices {
    pub mass: DMatrix<f64>,
    pub coriolis: DMatrix<f64>,
    pub gravity: DVector<f64>,
}

fn world_inertia(model: &RobotModel, frames: &ChainFrames, l: usize) -> Matrix3<f64> {
    let r = frames.link_rotations[l].matrix();
    r * model.links[l].inertia_mat() * r.transpose()
}

/// Spatial inertia of link `l` about the {b} origin, motion ordering [ω; v_O].
fn spatial_inertia(model: &RobotModel, frames: &ChainFrames, l: usize) -> Matrix6<f64> {
    let m = model.links[l].mass;
    let c = frames.coms[l].cross_matrix();
    let mut out = Matrix6::zeros();
    out.fixed_view_mut::<3, 3>(0, 0)
        .copy_from(&(world_inertia(model, frames, l) + c * c.transpose() * m));
    out.fixed_view_mut::<3, 3>(0, 3).copy_from(&(c * m));
    out.fixed_view_mut::<3, 3>(3, 0).copy_from(&(c.transpose() * m));
    out.fixed_view_mut::<3, 3>(3, 3).copy_from(&(Matrix3::identity() * m));
    out
}

fn motion_axis(frames: &ChainFrames, i: usize) -> Vector6<f64> {
    let z = frames.joint_axes[i];
    let v = frames.joint_positions[i].cross(&z);
    Vector6::new(z.x, z.y, z.z, v.x, v.y, v.z)
}

/// Joint-space inertia matrix via composite rigid bodies.
pub fn mass_matrix(model: &RobotModel, q: &DVector<f64>) -> DMatrix<f64> {
    let frames = chain_frames(model, q);
    mass_matrix_from_frames(model, &frames)
}

fn mass_matrix_from_frames(model: &RobotModel, frames: &ChainFrames) -> DMatrix<f64> {
    let n = model.dof();
    let mut composite = vec![Matrix6::zeros(); n];
    let mut acc = Matrix6::zeros();
    for l in (0..n).rev() {
        acc += spatial_inertia(model, frames, l);
        composite[l] = acc;
    }
    let axes: Vec<Vector6<f64>> = (0..n).map(|i| motion_axis(frames, i)).collect();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = axes[i].dot(&(composite[j] * axes[j]));
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
        m[(i, i)] += model.links[i].armature;
    }
    m
}

/// G_q = ∂U/∂q for gravity `g_base` expressed in {b}.
pub fn gravity_torques(model: &RobotModel, q: &DVector<f64>, g_base: &Vector3<f64>) -> DVector<f64> {
    let frames = chain_frames(model, q);
    gravity_from_frames(model, &frames, g_base)
}

fn gravity_from_frames(model: &RobotModel, frames: &ChainFrames, g: &Vector3<f64>) -> DVector<f64> {
    let n = model.dof();
    DVector::from_fn(n, |i, _| {
        let z = frames.joint_axes[i];
        let p = frames.joint_positions[i];
        -(i..n)
            .map(|l| model.links[l].mass * g.dot(&z.cross(&(frames.coms[l] - p))))
            .sum::<f64>()
    })
}

/// ∂M_q/∂q_k for every k.
pub fn mass_matrix_partials(model: &RobotModel, q: &DVector<f64>) -> Vec<DMatrix<f64>> {
    let frames = chain_frames(model, q);
    mass_partials_from_frames(model, &frames)
}

fn mass_partials_from_frames(model: &RobotModel, f: &ChainFrames) -> Vec<DMatrix<f64>> {
    let n = model.dof();
    let mut out = vec![DMatrix::zeros(n, n); n];
    let z = &f.joint_axes;
    let p = &f.joint_positions;
    for l in 0..n {
        let m = model.links[l].mass;
        let c = f.coms[l];
        let iw = world_inertia(model, f, l);
        // Jacobians of link l (columns beyond l are zero).
        let jv: Vec<Vector3<f64>> = (0..=l).map(|i| z[i].cross(&(c - p[i]))).collect();
        for k in 0..=l {
            let zk = z[k];
            let djv: Vec<Vector3<f64>> = (0..=l)
                .map(|i| {
                    if k < i {
                        zk.cross(&jv[i])
                    } else {
                        z[i].cross(&zk.cross(&(c - p[k])))
                    }
                })
                .collect();
            let djw: Vec<Vector3<f64>> = (0..=l)
                .map(|i| if k < i { zk.cross(&z[i]) } else { Vector3::zeros() })
                .collect();
            let zx = zk.cross_matrix();
            let di = zx * iw - iw * zx;
            let dk = &mut out[k];
            for i in 0..=l {
                for j in 0..=l {
                    let trans = m * (djv[i].dot(&jv[j]) + jv[i].dot(&djv[j]));
                    let rot = djw[i].dot(&(iw * z[j]))
                        + z[i].dot(&(di * z[j]))
                        + z[i].dot(&(iw * djw[j]));
                    dk[(i, j)] += trans + rot;
                }
            }
        }
    }
    out
}

/// C_q(q, q̇) from Christoffel symbols of the first kind.
pub fn coriolis_matrix(partials: &[DMatrix<f64>], qd: &DVector<f64>) -> DMatrix<f64> {
    let n = qd.len();
    let mut c = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let mut s = 0.0;
            for k in 0..n {
                s += 0.5 * (partials[k][(i, j)] + partials[j][(i, k)] - partials[i][(j, k)]) * qd[k];
            }
            c[(i, j)] = s;
        }
    }
    c
}

/// (M_q, C_q, G_q) with the base upright (gravity as given in the model).
pub fn joint_space_matrices(model: &RobotModel, joints: &JointState) -> JointSpaceMatrices {
    joint_space_matrices_with_base(model, joints, &Rotation3::identity())
}

/// (M_q, C_q, G_q) with gravity rotated into the base frame by R^i_b.
pub fn joint_space_matrices_with_base(
    model: &RobotModel,
    joints: &JointState,
    base_rotation: &Rotation3<f64>,
) -> JointSpaceMatrices {
    let frames = chain_frames(model, &joints.q);
    let g_base = base_rotation.inverse() * model.gravity_vec();
    let partials = mass_partials_from_frames(model, &frames);
    JointSpaceMatrices {
        mass: mass_matrix_from_frames(model, &frames),
        coriolis: coriolis_matrix(&partials, &joints.qd),
        gravity: gravity_from_frames(model, &frames, &g_base),
    }
}

/// Gravitational potential energy, for energy-balance checks.
pub fn potential_energy(model: &RobotModel, q: &DVector<f64>, g_base: &Vector3<f64>) -> f64 {
    let frames = chain_frames(model, q);
    -(0..model.dof())
        .map(|l| model.links[l].mass * g_base.dot(&frames.coms[l]))
        .sum::<f64>()
}

pub fn kinetic_energy(model: &RobotModel, joints: &JointState) -> f64 {
    let m = mass_matrix(model, &joints.q);
    0.5 * joints.qd.dot(&(m * &joints.qd))
}
