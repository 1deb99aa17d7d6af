//! Forward kinematics, Jacobians and the base-coupling velocity terms.
//!
//! Twists and wrenches are stacked translational part first: `[v; ω]`.

use nalgebra::{DMatrix, DVector, Matrix3, Rotation3, Vector3, Vector6};

use super::model::{BaseMotion, BaseState, JointState, RobotModel};

/// Positions and orientations along the chain, all expressed in {b}.
#[derive(Debug, Clone)]
pub struct ChainFrames {
    /// Joint origins p_i.
    pub joint_positions: Vec<Vector3<f64>>,
    /// Joint axes z_i.
    pub joint_axes: Vec<Vector3<f64>>,
    /// Orientation of each link frame (after its joint rotation).
    pub link_rotations: Vec<Rotation3<f64>>,
    /// Centers of mass.
    pub coms: Vec<Vector3<f64>>,
    pub ee_position: Vector3<f64>,
    pub ee_rotation: Rotation3<f64>,
}

pub fn chain_frames(model: &RobotModel, q: &DVector<f64>) -> ChainFrames {
    let n = model.dof();
    assert_eq!(q.len(), n, "joint vector length must match the model");
    let mount = model.mount();
    let mut rot = mount.rotation.to_rotation_matrix();
    let mut origin = mount.translation.vector;
    let mut frames = ChainFrames {
        joint_positions: Vec::with_capacity(n),
        joint_axes: Vec::with_capacity(n),
        link_rotations: Vec::with_capacity(n),
        coms: Vec::with_capacity(n),
        ee_position: Vector3::zeros(),
        ee_rotation: Rotation3::identity(),
    };
    for (link, &qi) in model.links.iter().zip(q.iter()) {
        let axis_local = link.axis_vec();
        let axis = rot * axis_local;
        rot *= Rotation3::from_axis_angle(&nalgebra::Unit::new_unchecked(axis_local), qi);
        frames.joint_positions.push(origin);
        frames.joint_axes.push(axis);
        frames.link_rotations.push(rot);
        frames.coms.push(origin + rot * link.com_vec());
        origin += rot * link.offset_vec();
    }
    frames.ee_position = origin;
    frames.ee_rotation = rot;
    frames
}

/// End-effector pose in {i}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub position: Vector3<f64>,
    pub rotation: Rotation3<f64>,
}

impl Pose {
    /// Position plus Z-Y-X Euler angles (yaw, pitch, roll), for logging.
    pub fn to_coordinates(&self) -> Vector6<f64> {
        let (roll, pitch, yaw) = self.rotation.euler_angles();
        Vector6::new(
            self.position.x,
            self.position.y,
            self.position.z,
            yaw,
            pitch,
            roll,
        )
    }

    /// Pose error `self ⊖ target`: position difference and the rotation-log of
    /// R_self R_targetᵀ, both in {i}.
    pub fn error_from(&self, target: &Pose) -> Vector6<f64> {
        let dp = self.position - target.position;
        let dr = rotation_log(&(self.rotation * target.rotation.inverse()));
        Vector6::new(dp.x, dp.y, dp.z, dr.x, dr.y, dr.z)
    }
}

/// Rotation vector θ·axis of `r`, with the angle from atan2 so it stays
/// accurate (and finite) for angles near zero.
pub fn rotation_log(r: &Rotation3<f64>) -> Vector3<f64> {
    let m = r.matrix();
    let s = 0.5 * Vector3::new(m[(2, 1)] - m[(1, 2)], m[(0, 2)] - m[(2, 0)], m[(1, 0)] - m[(0, 1)]);
    let c = 0.5 * (m.trace() - 1.0);
    let sn = s.norm();
    if sn < 1e-9 && c < 0.0 {
        // θ ≈ π: the antisymmetric part vanishes, recover the axis from R + I.
        return r.scaled_axis();
    }
    if sn == 0.0 {
        return Vector3::zeros();
    }
    s * (sn.atan2(c) / sn)
}

/// Position of the end effector relative to the base, in {b}: P^b_{ee/b}.
pub fn ee_in_base(model: &RobotModel, q: &DVector<f64>) -> (Vector3<f64>, Rotation3<f64>) {
    let f = chain_frames(model, q);
    (f.ee_position, f.ee_rotation)
}

/// p_x = p_η + R^i_b P^b_{ee/b}, R^i_ee = R^i_b R^b_ee.
pub fn forward_kinematics(model: &RobotModel, joints: &JointState, base: &BaseState) -> Pose {
    let (p, r) = ee_in_base(model, &joints.q);
    Pose {
        position: base.position + base.rotation * p,
        rotation: base.rotation * r,
    }
}

fn jacobian_from_frames(frames: &ChainFrames) -> DMatrix<f64> {
    let n = frames.joint_axes.len();
    let mut jac = DMatrix::zeros(6, n);
    for i in 0..n {
        let z = frames.joint_axes[i];
        let v = z.cross(&(frames.ee_position - frames.joint_positions[i]));
        jac.fixed_view_mut::<3, 1>(0, i).copy_from(&v);
        jac.fixed_view_mut::<3, 1>(3, i).copy_from(&z);
    }
    jac
}

/// Geometric Jacobian J(q) of the tool point, expressed in {b}.
pub fn jacobian(model: &RobotModel, joints: &JointState) -> DMatrix<f64> {
    jacobian_from_frames(&chain_frames(model, &joints.q))
}

/// Jacobian of an arbitrary point `point` (in {b}) rigidly attached to link
/// `link`: translational block only, 3×n, zero beyond `link`.
pub fn point_jacobian(frames: &ChainFrames, link: usize, point: &Vector3<f64>) -> DMatrix<f64> {
    let n = frames.joint_axes.len();
    let mut jac = DMatrix::zeros(3, n);
    for i in 0..=link {
        let v = frames.joint_axes[i].cross(&(point - frames.joint_positions[i]));
        jac.fixed_view_mut::<3, 1>(0, i).copy_from(&v);
    }
    jac
}

/// ∂J/∂q_k for every k, analytic for a revolute chain.
pub fn jacobian_partials(model: &RobotModel, q: &DVector<f64>) -> Vec<DMatrix<f64>> {
    let f = chain_frames(model, q);
    let n = model.dof();
    let pe = f.ee_position;
    (0..n)
        .map(|k| {
            let zk = f.joint_axes[k];
            let mut d = DMatrix::zeros(6, n);
            for i in 0..n {
                let zi = f.joint_axes[i];
                let ri = pe - f.joint_positions[i];
                let (dv, dw) = if k < i {
                    (zk.cross(&zi.cross(&ri)), zk.cross(&zi))
                } else {
                    (zi.cross(&zk.cross(&(pe - f.joint_positions[k]))), Vector3::zeros())
                };
                d.fixed_view_mut::<3, 1>(0, i).copy_from(&dv);
                d.fixed_view_mut::<3, 1>(3, i).copy_from(&dw);
            }
            d
        })
        .collect()
}

fn block_rotate(r: &Matrix3<f64>, m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(6, m.ncols());
    let top = r * m.rows(0, 3);
    let bottom = r * m.rows(3, 3);
    out.rows_mut(0, 3).copy_from(&top);
    out.rows_mut(3, 3).copy_from(&bottom);
    out
}

/// Ĵ = blockdiag(R^i_b, R^i_b) J.
pub fn augmented_jacobian(jac: &DMatrix<f64>, base: &BaseState) -> DMatrix<f64> {
    block_rotate(base.rotation.matrix(), jac)
}

/// d = [ω^i_{b/i} × P^i_{ee/b}; 0].
pub fn coupling_velocity_term(base: &BaseState, joints: &JointState, model: &RobotModel) -> Vector6<f64> {
    let (p_b, _) = ee_in_base(model, &joints.q);
    let lever = base.rotation * p_b;
    let v = base.angular_velocity.cross(&lever);
    Vector6::new(v.x, v.y, v.z, 0.0, 0.0, 0.0)
}

/// ḋ = [ω̇ × P + ω × Ṗ; 0] with Ṗ = ω × P + R J_v q̇. Needs the true base
/// angular acceleration, so this is a plant-side quantity.
pub fn coupling_velocity_rate(motion: &BaseMotion, joints: &JointState, model: &RobotModel) -> Vector6<f64> {
    let base = &motion.state;
    let f = chain_frames(model, &joints.q);
    let jac = jacobian_from_frames(&f);
    let lever = base.rotation * f.ee_position;
    let rel_vel = base.rotation * (jac.rows(0, 3) * &joints.qd);
    let w = base.angular_velocity;
    let lever_rate = w.cross(&lever) + rel_vel;
    let v = motion.angular_acceleration.cross(&lever) + w.cross(&lever_rate);
    Vector6::new(v.x, v.y, v.z, 0.0, 0.0, 0.0)
}

/// ẋ = η̇ + Ĵ q̇ + d.
pub fn ee_velocity(model: &RobotModel, joints: &JointState, base: &BaseState) -> Vector6<f64> {
    let jhat = augmented_jacobian(&jacobian(model, joints), base);
    base.twist() + jhat * &joints.qd + coupling_velocity_term(base, joints, model)
}

/// J̇(q, q̇) = Σ_k ∂J/∂q_k q̇_k, in {b}.
pub fn jacobian_rate(model: &RobotModel, joints: &JointState) -> DMatrix<f64> {
    let n = model.dof();
    let mut jd = DMatrix::zeros(6, n);
    for (k, dk) in jacobian_partials(model, &joints.q).iter().enumerate() {
        jd += dk * joints.qd[k];
    }
    jd
}

/// d/dt Ĵ = blockdiag([ω]×R, [ω]×R) J + blockdiag(R, R) J̇.
pub fn jacobian_time_derivative(model: &RobotModel, joints: &JointState, base: &BaseState) -> DMatrix<f64> {
    let jac = jacobian(model, joints);
    let r = base.rotation.matrix();
    let wr = base.angular_velocity.cross_matrix() * r;
    block_rotate(&wr, &jac) + block_rotate(r, &jacobian_rate(model, joints))
}

/// Result of a damped least-squares inversion.
#[derive(Debug, Clone)]
pub struct DampedInverse {
    pub inverse: DMatrix<f64>,
    pub min_singular_value: f64,
}

/// Ĵ† = Ĵᵀ(ĴĴᵀ + λ²I)⁻¹, evaluated through the SVD so that λ = 0 yields the
/// Moore–Penrose pseudo-inverse even when Ĵ is rank deficient.
pub fn damped_pseudoinverse(jac: &DMatrix<f64>, damping: f64) -> DampedInverse {
    assert!(damping >= 0.0, "damping must be non-negative");
    let (rows, cols) = jac.shape();
    let svd = jac.clone().svd(true, true);
    let u = svd.u.as_ref().expect("u requested");
    let vt = svd.v_t.as_ref().expect("v_t requested");
    let lam2 = damping * damping;
    let smax = svd.singular_values.max();
    let tol = f64::EPSILON * rows.max(cols) as f64 * smax;
    let mut inverse = DMatrix::zeros(cols, rows);
    for (k, &s) in svd.singular_values.iter().enumerate() {
        let g = if lam2 == 0.0 {
            if s > tol {
                1.0 / s
            } else {
                0.0
            }
        } else {
            s / (s * s + lam2)
        };
        if g != 0.0 {
            inverse += vt.row(k).transpose() * u.column(k).transpose() * g;
        }
    }
    // Singular values of a wide/tall matrix: min over the reported set, which
    // has min(rows, cols) entries; a 6×n arm with n < 6 is rank-limited.
    let min_singular_value = if rows > cols {
        0.0
    } else {
        svd.singular_values.min()
    };
    DampedInverse {
        inverse,
        min_singular_value,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn planar2() -> RobotModel {
        RobotModel::planar(&[0.5, 0.5], &[1.0, 1.0]).unwrap()
    }

    #[test]
    fn straight_planar_chain() {
        let m = planar2();
        let p = forward_kinematics(&m, &JointState::at_rest(&[0.0, 0.0]), &BaseState::identity());
        assert_relative_eq!(p.position, Vector3::new(1.0, 0.0, 0.0), epsilon = 1e-15);
    }

    #[test]
    fn base_translation_is_additive() {
        let m = planar2();
        let j = JointState::at_rest(&[0.3, -0.7]);
        let p0 = forward_kinematics(&m, &j, &BaseState::identity());
        let p1 = forward_kinematics(&m, &j, &BaseState::at(Vector3::new(1.0, 2.0, 0.0), 0.0));
        assert_relative_eq!(p1.position - p0.position, Vector3::new(1.0, 2.0, 0.0), epsilon = 1e-15);
    }

    #[test]
    fn planar_jacobian_closed_form() {
        let m = planar2();
        let jac = jacobian(&m, &JointState::at_rest(&[0.0, 0.0]));
        assert_relative_eq!(jac[(1, 0)], 1.0, epsilon = 1e-15);
        assert_relative_eq!(jac[(1, 1)], 0.5, epsilon = 1e-15);
        assert_relative_eq!(jac[(0, 0)], 0.0, epsilon = 1e-15);
        assert_relative_eq!(jac[(5, 0)], 1.0);
        assert_relative_eq!(jac[(5, 1)], 1.0);
    }

    #[test]
    fn identity_base_leaves_jacobian_unchanged() {
        let m = RobotModel::ur5e_like();
        let j = JointState::at_rest(&[0.1, -0.5, 1.0, 0.2, 0.3, -0.4]);
        let jac = jacobian(&m, &j);
        assert_eq!(augmented_jacobian(&jac, &BaseState::identity()), jac);
    }

    #[test]
    fn yaw_rotates_translational_columns() {
        let m = planar2();
        let jac = jacobian(&m, &JointState::at_rest(&[0.0, 0.0]));
        let base = BaseState::at(Vector3::zeros(), std::f64::consts::FRAC_PI_2);
        let jhat = augmented_jacobian(&jac, &base);
        // (0, 1, 0) rotated 90° about z is (-1, 0, 0).
        assert_relative_eq!(jhat[(0, 0)], -1.0, epsilon = 1e-15);
        assert_relative_eq!(jhat[(1, 0)], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn coupling_term_cross_product() {
        let m = planar2();
        let j = JointState::at_rest(&[0.0, 0.0]);
        let still = BaseState::identity();
        assert_eq!(coupling_velocity_term(&still, &j, &m), Vector6::zeros());
        let spinning = still.with_velocity(Vector3::zeros(), Vector3::new(0.0, 0.0, 1.0));
        // lever arm is (1, 0, 0) for the straight chain
        let d = coupling_velocity_term(&spinning, &j, &m);
        assert_relative_eq!(d, Vector6::new(0.0, 1.0, 0.0, 0.0, 0.0, 0.0), epsilon = 1e-15);
    }

    #[test]
    fn stationary_system_has_zero_jacobian_rate() {
        let m = RobotModel::ur5e_like();
        let j = JointState::at_rest(&[0.1, -0.5, 1.0, 0.2, 0.3, -0.4]);
        let jd = jacobian_time_derivative(&m, &j, &BaseState::at(Vector3::new(1.0, 0.0, 0.0), 0.4));
        assert_eq!(jd.abs().max(), 0.0);
    }

    #[test]
    fn orthogonal_matrix_pseudoinverse_is_transpose() {
        let r = Rotation3::from_euler_angles(0.3, -0.2, 1.1);
        let mut m = DMatrix::zeros(6, 6);
        m.view_mut((0, 0), (3, 3)).copy_from(r.matrix());
        m.view_mut((3, 3), (3, 3)).copy_from(r.matrix());
        let inv = damped_pseudoinverse(&m, 0.0).inverse;
        assert_relative_eq!(inv, m.transpose(), epsilon = 1e-12);
    }

    #[test]
    fn damped_inverse_is_bounded_at_singularity() {
        let mut m = DMatrix::zeros(6, 6);
        m[(0, 0)] = 1.0;
        m[(1, 1)] = 1e-14;
        let lambda = 0.01;
        let inv = damped_pseudoinverse(&m, lambda);
        assert!(inv.inverse.iter().all(|v| v.is_finite()));
        // σ/(σ²+λ²) ≤ 1/(2λ)
        assert!(inv.inverse.norm() <= 1.0 / (2.0 * lambda) * 6.0_f64.sqrt());
        assert!(inv.min_singular_value < 1e-3);
    }
}
