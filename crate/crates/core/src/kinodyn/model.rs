//! Robot, base and wrench data types.

use nalgebra::{Isometry3, Matrix3, Rotation3, Translation3, UnitQuaternion, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One revolute link of a serial chain.
///
/// The joint rotates about `axis`, expressed in the frame the joint is attached
/// to. `offset` is the vector from this joint to the next joint (or to the tool
/// point for the last link), expressed in the link's own frame. The center of
/// mass and the rotary inertia about it are expressed in the link frame too.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub offset: [f64; 3],
    pub axis: [f64; 3],
    pub mass: f64,
    pub com: [f64; 3],
    pub inertia: [[f64; 3]; 3],
    /// Reflected rotor inertia on this joint [kg·m²].
    #[serde(default)]
    pub armature: f64,
}

impl Link {
    pub fn length(&self) -> f64 {
        Vector3::from(self.offset).norm()
    }

    pub fn offset_vec(&self) -> Vector3<f64> {
        Vector3::from(self.offset)
    }

    pub fn axis_vec(&self) -> Vector3<f64> {
        Vector3::from(self.axis)
    }

    pub fn com_vec(&self) -> Vector3<f64> {
        Vector3::from(self.com)
    }

    pub fn inertia_mat(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|r, c| self.inertia[r][c])
    }

    pub fn with_armature(mut self, armature: f64) -> Self {
        self.armature = armature;
        self
    }

    /// Link modelled as a uniform solid rod of radius `radius` along `offset`.
    /// Links with zero offset become solid spheres of the same radius.
    pub fn rod(offset: [f64; 3], axis: [f64; 3], mass: f64, radius: f64) -> Self {
        let o = Vector3::from(offset);
        let len = o.norm();
        let com = o * 0.5;
        let inertia = if len < 1e-9 {
            Matrix3::identity() * (0.4 * mass * radius * radius)
        } else {
            let u = o / len;
            let axial = 0.5 * mass * radius * radius;
            let transverse = mass * (3.0 * radius * radius + len * len) / 12.0;
            Matrix3::identity() * transverse + u * u.transpose() * (axial - transverse)
        };
        Link {
            offset,
            axis,
            mass,
            com: [com.x, com.y, com.z],
            inertia: [
                [inertia[(0, 0)], inertia[(0, 1)], inertia[(0, 2)]],
                [inertia[(1, 0)], inertia[(1, 1)], inertia[(1, 2)]],
                [inertia[(2, 0)], inertia[(2, 1)], inertia[(2, 2)]],
            ],
            armature: 0.0,
        }
    }
}

/// Fixed transform from the base frame {b} to the arm root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MountTransform {
    pub translation: [f64; 3],
    /// Z-Y-X Euler angles (yaw, pitch, roll) [rad].
    #[serde(default)]
    pub rotation_zyx: [f64; 3],
}

impl Default for MountTransform {
    fn default() -> Self {
        MountTransform {
            translation: [0.0; 3],
            rotation_zyx: [0.0; 3],
        }
    }
}

impl MountTransform {
    pub fn isometry(&self) -> Isometry3<f64> {
        let [yaw, pitch, roll] = self.rotation_zyx;
        Isometry3::from_parts(
            Translation3::from(Vector3::from(self.translation)),
            UnitQuaternion::from_euler_angles(roll, pitch, yaw),
        )
    }
}

/// Per-joint friction parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Friction {
    /// Viscous coefficients [N·m·s/rad].
    pub viscous: Vec<f64>,
    /// Coulomb levels [N·m].
    pub coulomb: Vec<f64>,
}

impl Friction {
    pub fn zero(n: usize) -> Self {
        Friction {
            viscous: vec![0.0; n],
            coulomb: vec![0.0; n],
        }
    }
}

/// Kinematic and inertial description of an n-DOF revolute serial arm and
/// its mount on the mobile base.
///
/// JSON document keys: `links[]`, `mount_transform`, `gravity`, `friction`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotModel {
    pub links: Vec<Link>,
    #[serde(default)]
    pub mount_transform: MountTransform,
    /// Gravity vector in the inertial frame [m/s²].
    pub gravity: [f64; 3],
    pub friction: Friction,
}

impl RobotModel {
    pub fn new(links: Vec<Link>, mount: MountTransform, gravity: [f64; 3]) -> Result<Self> {
        let n = links.len();
        let m = RobotModel {
            links,
            mount_transform: mount,
            gravity,
            friction: Friction::zero(n),
        };
        m.validate()?;
        Ok(m)
    }

    pub fn dof(&self) -> usize {
        self.links.len()
    }

    pub fn gravity_vec(&self) -> Vector3<f64> {
        Vector3::from(self.gravity)
    }

    pub fn mount(&self) -> Isometry3<f64> {
        self.mount_transform.isometry()
    }

    pub fn with_friction(mut self, viscous: Vec<f64>, coulomb: Vec<f64>) -> Result<Self> {
        self.friction = Friction { viscous, coulomb };
        self.validate()?;
        Ok(self)
    }

    pub fn with_gravity(mut self, gravity: [f64; 3]) -> Self {
        self.gravity = gravity;
        self
    }

    /// Copy of the model with every link mass and inertia scaled by `factor`.
    pub fn scaled_inertia(&self, factor: f64) -> Self {
        let mut m = self.clone();
        for l in &mut m.links {
            l.mass *= factor;
            l.armature *= factor;
            for row in &mut l.inertia {
                for v in row.iter_mut() {
                    *v *= factor;
                }
            }
        }
        m
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.links.len();
        if n < 2 {
            return Err(Error::InvalidModel(format!("need at least 2 links, got {n}")));
        }
        for (i, l) in self.links.iter().enumerate() {
            if !(l.mass > 0.0) || !l.mass.is_finite() {
                return Err(Error::InvalidModel(format!("link {i}: mass must be > 0")));
            }
            let axis = l.axis_vec();
            if (axis.norm() - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidModel(format!("link {i}: joint axis must be unit norm")));
            }
            let inertia = l.inertia_mat();
            if (inertia - inertia.transpose()).abs().max() > 1e-12 {
                return Err(Error::InvalidModel(format!("link {i}: inertia not symmetric")));
            }
            if inertia.cholesky().is_none() {
                return Err(Error::InvalidModel(format!(
                    "link {i}: inertia not positive definite"
                )));
            }
            if !(l.armature >= 0.0) || !l.armature.is_finite() {
                return Err(Error::InvalidModel(format!("link {i}: armature must be finite and >= 0")));
            }
            if l.offset.iter().chain(l.com.iter()).any(|v| !v.is_finite()) {
                return Err(Error::InvalidModel(format!("link {i}: non-finite geometry")));
            }
        }
        let f = &self.friction;
        if f.viscous.len() != n || f.coulomb.len() != n {
            return Err(Error::InvalidModel(format!(
                "friction vectors must have {n} entries"
            )));
        }
        if f.viscous.iter().chain(f.coulomb.iter()).any(|v| *v < 0.0 || !v.is_finite()) {
            return Err(Error::InvalidModel("friction parameters must be finite and >= 0".into()));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: RobotModel = serde_json::from_str(text)?;
        m.validate()?;
        Ok(m)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Planar arm with all joints about z and links along x, uniform rods.
    pub fn planar(lengths: &[f64], masses: &[f64]) -> Result<Self> {
        let links = lengths
            .iter()
            .zip(masses)
            .map(|(&l, &m)| Link::rod([l, 0.0, 0.0], [0.0, 0.0, 1.0], m, 0.02))
            .collect();
        RobotModel::new(links, MountTransform::default(), [0.0, -9.81, 0.0])
    }

    /// Desk-scale 6-DOF arm with UR5e-like link lengths and masses, primitive
    /// rod inertias and 0.1 kg·m² rotor inertia per joint, mounted 0.45 m
    /// above the base origin.
    pub fn ur5e_like() -> Self {
        let z = [0.0, 0.0, 1.0];
        let y = [0.0, 1.0, 0.0];
        let links = vec![
            Link::rod([0.0, 0.0, 0.1625], z, 3.7, 0.06),
            Link::rod([0.425, 0.0, 0.0], y, 8.4, 0.05),
            Link::rod([0.3922, 0.0, 0.0], y, 2.33, 0.04),
            Link::rod([0.0, 0.1333, 0.0], y, 1.22, 0.035),
            Link::rod([0.0, 0.0, -0.0997], z, 1.22, 0.035),
            // flange plus wiping tool
            Link::rod([0.0, 0.0996 + 0.08, 0.0], y, 1.6, 0.1),
        ]
        .into_iter()
        .map(|l| l.with_armature(0.1))
        .collect();
        RobotModel::new(
            links,
            MountTransform {
                translation: [0.0, 0.0, 0.45],
                rotation_zyx: [0.0; 3],
            },
            [0.0, 0.0, -9.81],
        )
        .expect("built-in model is valid")
    }

    /// Smaller 6-DOF arm of the same topology whose gravity load fits within
    /// a few N·m, for torque-limited configurations.
    pub fn light_arm() -> Self {
        let z = [0.0, 0.0, 1.0];
        let y = [0.0, 1.0, 0.0];
        let links = vec![
            Link::rod([0.0, 0.0, 0.15], z, 1.0, 0.04),
            Link::rod([0.25, 0.0, 0.0], y, 0.8, 0.03),
            Link::rod([0.22, 0.0, 0.0], y, 0.5, 0.025),
            Link::rod([0.0, 0.08, 0.0], y, 0.25, 0.02),
            Link::rod([0.0, 0.0, -0.08], z, 0.25, 0.02),
            Link::rod([0.0, 0.1, 0.0], y, 0.15, 0.02),
        ];
        RobotModel::new(
            links,
            MountTransform {
                translation: [0.0, 0.0, 0.45],
                rotation_zyx: [0.0; 3],
            },
            [0.0, 0.0, -9.81],
        )
        .expect("built-in model is valid")
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "ur5e-like" => Some(RobotModel::ur5e_like()),
            "light-arm" => Some(RobotModel::light_arm()),
            _ => None,
        }
    }
}

/// Joint positions [rad] and rates [rad/s].
#[derive(Debug, Clone, PartialEq)]
pub struct JointState {
    pub q: nalgebra::DVector<f64>,
    pub qd: nalgebra::DVector<f64>,
}

impl JointState {
    pub fn new(q: &[f64], qd: &[f64]) -> Self {
        JointState {
            q: nalgebra::DVector::from_column_slice(q),
            qd: nalgebra::DVector::from_column_slice(qd),
        }
    }

    pub fn at_rest(q: &[f64]) -> Self {
        JointState::new(q, &vec![0.0; q.len()])
    }

    pub fn is_finite(&self) -> bool {
        self.q.iter().chain(self.qd.iter()).all(|v| v.is_finite())
    }
}

/// Pose and velocity of the mobile base in the inertial frame {i}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaseState {
    pub position: Vector3<f64>,
    /// R^i_b.
    pub rotation: Rotation3<f64>,
    pub linear_velocity: Vector3<f64>,
    /// ω^i_{b/i}.
    pub angular_velocity: Vector3<f64>,
}

impl Default for BaseState {
    fn default() -> Self {
        BaseState::identity()
    }
}

impl BaseState {
    pub fn identity() -> Self {
        BaseState {
            position: Vector3::zeros(),
            rotation: Rotation3::identity(),
            linear_velocity: Vector3::zeros(),
            angular_velocity: Vector3::zeros(),
        }
    }

    pub fn at(position: Vector3<f64>, yaw: f64) -> Self {
        BaseState {
            position,
            rotation: Rotation3::from_euler_angles(0.0, 0.0, yaw),
            ..BaseState::identity()
        }
    }

    /// η̇ = [ṗ_η; ω].
    pub fn twist(&self) -> Vector6<f64> {
        let mut v = Vector6::zeros();
        v.fixed_rows_mut::<3>(0).copy_from(&self.linear_velocity);
        v.fixed_rows_mut::<3>(3).copy_from(&self.angular_velocity);
        v
    }

    /// (yaw, pitch, roll) for I/O.
    pub fn euler_zyx(&self) -> [f64; 3] {
        let (roll, pitch, yaw) = self.rotation.euler_angles();
        [yaw, pitch, roll]
    }

    pub fn orthonormality_error(&self) -> f64 {
        let r = self.rotation.matrix();
        (r.transpose() * r - Matrix3::identity()).norm()
    }

    pub fn with_velocity(mut self, linear: Vector3<f64>, angular: Vector3<f64>) -> Self {
        self.linear_velocity = linear;
        self.angular_velocity = angular;
        self
    }
}

/// Base state plus the true accelerations, available only on the plant side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaseMotion {
    pub state: BaseState,
    pub linear_acceleration: Vector3<f64>,
    pub angular_acceleration: Vector3<f64>,
}

impl BaseMotion {
    pub fn stationary(state: BaseState) -> Self {
        BaseMotion {
            state,
            linear_acceleration: Vector3::zeros(),
            angular_acceleration: Vector3::zeros(),
        }
    }

    /// η̈ = [p̈_η; ω̇].
    pub fn acceleration(&self) -> Vector6<f64> {
        let mut v = Vector6::zeros();
        v.fixed_rows_mut::<3>(0).copy_from(&self.linear_acceleration);
        v.fixed_rows_mut::<3>(3).copy_from(&self.angular_acceleration);
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Frame {
    Inertial,
    Body,
    EndEffector,
}

/// Force [N] and torque [N·m] with the frame they are expressed in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wrench {
    pub force: Vector3<f64>,
    pub torque: Vector3<f64>,
    pub frame: Frame,
}

impl Wrench {
    pub fn zero(frame: Frame) -> Self {
        Wrench {
            force: Vector3::zeros(),
            torque: Vector3::zeros(),
            frame,
        }
    }

    pub fn from_vector(v: &Vector6<f64>, frame: Frame) -> Self {
        Wrench {
            force: v.fixed_rows::<3>(0).into_owned(),
            torque: v.fixed_rows::<3>(3).into_owned(),
            frame,
        }
    }

    pub fn to_vector(&self) -> Vector6<f64> {
        let mut v = Vector6::zeros();
        v.fixed_rows_mut::<3>(0).copy_from(&self.force);
        v.fixed_rows_mut::<3>(3).copy_from(&self.torque);
        v
    }

    pub fn is_finite(&self) -> bool {
        self.force.iter().chain(self.torque.iter()).all(|v| v.is_finite())
    }

    pub fn expect_frame(&self, frame: Frame) -> Result<()> {
        if self.frame == frame {
            Ok(())
        } else {
            Err(Error::FrameMismatch {
                expected: frame,
                got: self.frame,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_degenerate_models() {
        let l = Link::rod([0.5, 0.0, 0.0], [0.0, 0.0, 1.0], 1.0, 0.02);
        assert!(RobotModel::new(vec![l.clone()], MountTransform::default(), [0.0; 3]).is_err());

        let mut bad = l.clone();
        bad.mass = 0.0;
        assert!(RobotModel::new(vec![l.clone(), bad], MountTransform::default(), [0.0; 3]).is_err());

        let mut bad = l.clone();
        bad.axis = [0.0, 0.0, 2.0];
        assert!(RobotModel::new(vec![l.clone(), bad], MountTransform::default(), [0.0; 3]).is_err());

        let mut bad = l.clone();
        bad.inertia[0][1] = 1.0;
        assert!(RobotModel::new(vec![l.clone(), bad], MountTransform::default(), [0.0; 3]).is_err());
    }

    #[test]
    fn json_round_trip() {
        let m = RobotModel::ur5e_like()
            .with_friction(vec![0.1; 6], vec![0.5; 6])
            .unwrap();
        let back = RobotModel::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn json_rejects_bad_friction_length() {
        let mut m = RobotModel::ur5e_like();
        m.friction.viscous.pop();
        let text = serde_json::to_string(&m).unwrap();
        assert!(RobotModel::from_json(&text).is_err());
    }

    #[test]
    fn wrench_frame_check() {
        let w = Wrench::zero(Frame::Inertial);
        assert!(w.expect_frame(Frame::Inertial).is_ok());
        assert!(w.expect_frame(Frame::Body).is_err());
    }
}
