mod common;

use common::{models, random_base, random_joints, rng};
use mobile_ude::kinodyn::dynamics::{
    coriolis_matrix, gravity_torques, kinetic_energy, mass_matrix, mass_matrix_partials, potential_energy,
};
use mobile_ude::kinodyn::model::Friction;
use mobile_ude::kinodyn::*;
use mobile_ude::sim::{integrate_step, PlantWorld};
use mobile_ude::world::joint_friction;
use nalgebra::{DMatrix, DVector, Vector3, Vector6};
use proptest::prelude::*;

fn frictionless(model: RobotModel) -> RobotModel {
    let n = model.dof();
    RobotModel {
        friction: Friction::zero(n),
        ..model
    }
}

fn mass_rate(model: &RobotModel, j: &JointState) -> DMatrix<f64> {
    let parts = mass_matrix_partials(model, &j.q);
    parts
        .iter()
        .zip(j.qd.iter())
        .fold(DMatrix::zeros(model.dof(), model.dof()), |acc, (p, v)| acc + p * *v)
}

#[test]
fn mass_rate_minus_twice_coriolis_is_skew() {
    let mut r = rng(21);
    let mut worst: f64 = 0.0;
    for (_, model) in models() {
        for _ in 0..500 {
            let j = random_joints(&mut r, model.dof(), 2.0);
            let parts = mass_matrix_partials(&model, &j.q);
            let n = mass_rate(&model, &j) - coriolis_matrix(&parts, &j.qd) * 2.0;
            worst = worst.max((&n + n.transpose()).amax());
        }
    }
    println!("worst |N + Nᵀ| = {worst:e}");
    assert!(worst < 1e-10, "worst |N + Nᵀ| = {worst:e}");
}

#[test]
fn mass_partials_match_differences() {
    let mut r = rng(22);
    for (name, model) in models() {
        for _ in 0..100 {
            let j = random_joints(&mut r, model.dof(), 1.0);
            let parts = mass_matrix_partials(&model, &j.q);
            for (k, p) in parts.iter().enumerate() {
                let h = 1e-6;
                let mut qp = j.q.clone();
                let mut qm = j.q.clone();
                qp[k] += h;
                qm[k] -= h;
                let fd = (mass_matrix(&model, &qp) - mass_matrix(&model, &qm)) / (2.0 * h);
                let err = (p - fd).amax();
                assert!(err < 1e-6, "{name} ∂M/∂q{k}: {err:e}");
            }
        }
    }
}

/// C q̇ = Ṁq̇ − ∂T/∂q and G = ∂U/∂q, with the partial derivatives of the
/// energies taken numerically.
#[test]
fn coriolis_and_gravity_follow_from_energies() {
    let mut r = rng(23);
    for (name, model) in models() {
        let g = model.gravity_vec();
        for _ in 0..100 {
            let j = random_joints(&mut r, model.dof(), 2.0);
            let n = model.dof();
            let h = 1e-6;
            let mut dt_dq = DVector::zeros(n);
            let mut du_dq = DVector::zeros(n);
            for k in 0..n {
                let mut p = j.clone();
                let mut m = j.clone();
                p.q[k] += h;
                m.q[k] -= h;
                dt_dq[k] = (kinetic_energy(&model, &p) - kinetic_energy(&model, &m)) / (2.0 * h);
                du_dq[k] = (potential_energy(&model, &p.q, &g) - potential_energy(&model, &m.q, &g)) / (2.0 * h);
            }
            let parts = mass_matrix_partials(&model, &j.q);
            let cqd = coriolis_matrix(&parts, &j.qd) * &j.qd;
            let expected = mass_rate(&model, &j) * &j.qd - dt_dq;
            assert!((cqd - expected).amax() < 1e-6, "{name} Coriolis");
            assert!((gravity_torques(&model, &j.q, &g) - du_dq).amax() < 1e-6, "{name} gravity");
        }
    }
}

/// Relative energy drift per second of unforced, frictionless motion.
fn energy_drift(model: &RobotModel, q: &[f64], qd: &[f64], dt: f64, duration: f64) -> f64 {
    let g = model.gravity_vec();
    let energy = |j: &JointState| kinetic_energy(model, j) + potential_energy(model, &j.q, &g);
    let base = BaseState::identity();
    let world = PlantWorld {
        base: &base,
        wall: None,
        disturbance: Vector6::zeros(),
    };
    let tau = DVector::zeros(model.dof());
    let mut j = JointState::new(q, qd);
    let e0 = energy(&j);
    let scale = kinetic_energy(model, &j).max(1e-9);
    let steps = (duration / dt).round() as usize;
    let mut worst: f64 = 0.0;
    for k in 1..=steps {
        j = integrate_step(model, &j, &tau, &world, dt).unwrap().joints;
        let t = k as f64 * dt;
        worst = worst.max((energy(&j) - e0).abs() / scale / t);
    }
    worst
}

#[test]
fn free_motion_energy_drift() {
    let q = [0.1, -1.0, 1.2, -0.5, 0.4, 0.2];
    let qd = [0.3, -0.2, 0.25, 0.4, -0.3, 0.5];
    for (name, model) in models() {
        let model = frictionless(model);
        let zero_g = model.clone().with_gravity([0.0, 0.0, 0.0]);
        let free = energy_drift(&zero_g, &q, &qd, 1e-3, 5.0);
        println!("{name}: zero-gravity drift {free:.3e} /s");
        assert!(free < 1e-6, "{name}: zero-gravity drift {free:e} /s");
    }
}

#[test]
fn task_and_joint_kinetic_energy_agree() {
    let mut r = rng(24);
    let mut checked = 0;
    let mut worst: f64 = 0.0;
    for (_, model) in models() {
        for _ in 0..500 {
            let j = random_joints(&mut r, model.dof(), 2.0);
            let base = random_base(&mut r);
            let jhat = augmented_jacobian(&jacobian(&model, &j), &base);
            let inv = damped_pseudoinverse(&jhat, 0.0);
            if inv.min_singular_value < 0.05 {
                continue;
            }
            let js = joint_space_matrices_with_base(&model, &j, &base.rotation);
            let jdot = jacobian_time_derivative(&model, &j, &base);
            let tm = task_space_matrices(&js.mass, &js.coriolis, &js.gravity, &jhat, &jdot, 0.0);
            let x = ee_velocity(&model, &j, &base) - base.twist() - coupling_velocity_term(&base, &j, &model);
            let task = 0.5 * x.dot(&(tm.mass * x));
            let joint = kinetic_energy(&model, &j);
            worst = worst.max((task - joint).abs() / joint.max(1e-12));
            checked += 1;
        }
    }
    println!("{checked} states, worst relative difference {worst:e}");
    assert!(checked > 300);
    assert!(worst < 1e-8, "worst relative difference {worst:e}");
}

#[test]
fn applied_torque_work_matches_energy_change() {
    let model = frictionless(RobotModel::light_arm());
    let g = model.gravity_vec();
    let base = BaseState::identity();
    let world = PlantWorld {
        base: &base,
        wall: None,
        disturbance: Vector6::zeros(),
    };
    let energy = |j: &JointState| kinetic_energy(&model, j) + potential_energy(&model, &j.q, &g);
    let mut j = JointState::at_rest(&[0.2, -0.8, 1.0, -0.4, 0.3, 0.1]);
    let e0 = energy(&j);
    let dt = 1e-3;
    let tau_at = |t: f64| DVector::from_fn(6, |i, _| 0.3 * ((i + 1) as f64 * t).sin());
    let mut work = 0.0;
    for k in 0..2000 {
        let t = k as f64 * dt;
        let tau = tau_at(t);
        let next = integrate_step(&model, &j, &tau, &world, dt).unwrap().joints;
        // Torque is held over the step; trapezoid on q̇.
        work += 0.5 * dt * tau.dot(&(&j.qd + &next.qd));
        j = next;
    }
    let de = energy(&j) - e0;
    assert!((de - work).abs() < 1e-4 * work.abs().max(1e-3), "ΔE {de} vs work {work}");
}

#[test]
fn friction_dissipates_energy() {
    let model = RobotModel::ur5e_like()
        .with_gravity([0.0, 0.0, 0.0])
        .with_friction(vec![0.5; 6], vec![0.75, 0.75, 0.75, 0.25, 0.25, 0.25])
        .unwrap();
    let base = BaseState::identity();
    let world = PlantWorld {
        base: &base,
        wall: None,
        disturbance: Vector6::zeros(),
    };
    let tau = DVector::zeros(6);
    let mut j = JointState::new(&[0.1, -1.0, 1.2, -0.5, 0.4, 0.2], &[0.3, -0.2, 0.25, 0.4, -0.3, 0.5]);
    let e0 = kinetic_energy(&model, &j);
    let mut e = e0;
    for _ in 0..3000 {
        j = integrate_step(&model, &j, &tau, &world, 1e-3).unwrap().joints;
        let next = kinetic_energy(&model, &j);
        assert!(next <= e + 1e-12);
        e = next;
    }
    assert!(e < 0.5 * e0, "{e} of {e0} left");
}

fn seeded(seed: u64) -> (RobotModel, JointState) {
    let mut r = rng(seed);
    let model = if seed % 2 == 0 {
        RobotModel::ur5e_like()
    } else {
        RobotModel::light_arm()
    };
    let j = random_joints(&mut r, model.dof(), 3.0);
    (model, j)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn mass_matrix_is_symmetric_positive_definite(seed in any::<u64>()) {
        let (model, j) = seeded(seed);
        let m = mass_matrix(&model, &j.q);
        prop_assert!((&m - m.transpose()).amax() < 1e-12);
        prop_assert!(m.clone().cholesky().is_some());
    }

    #[test]
    fn armature_adds_to_the_diagonal(seed in any::<u64>(), extra in 0.0f64..1.0) {
        let (model, j) = seeded(seed);
        let mut heavier = model.clone();
        for l in heavier.links.iter_mut() {
            l.armature += extra;
        }
        let diff = mass_matrix(&heavier, &j.q) - mass_matrix(&model, &j.q);
        prop_assert!((diff - DMatrix::identity(6, 6) * extra).amax() < 1e-12);
    }

    #[test]
    fn friction_opposes_motion(seed in any::<u64>()) {
        let (model, j) = seeded(seed);
        let model = model.with_friction(vec![0.5; 6], vec![0.75; 6]).unwrap();
        let f = joint_friction(&model, &j.qd);
        for i in 0..6 {
            prop_assert!(f[i] * j.qd[i] <= 0.0);
        }
        prop_assert_eq!(joint_friction(&model, &DVector::zeros(6)), DVector::zeros(6));
    }

    #[test]
    fn coriolis_is_linear_in_rates(seed in any::<u64>(), a in -3.0f64..3.0) {
        let (model, j) = seeded(seed);
        let parts = mass_matrix_partials(&model, &j.q);
        let scaled = coriolis_matrix(&parts, &(&j.qd * a));
        prop_assert!((scaled - coriolis_matrix(&parts, &j.qd) * a).amax() < 1e-9);
    }

    #[test]
    fn gravity_torque_is_rotation_equivariant(seed in any::<u64>()) {
        let (model, j) = seeded(seed);
        let mut r = rng(seed ^ 0x55);
        let base = random_base(&mut r);
        let js = joint_space_matrices_with_base(&model, &j, &base.rotation);
        let g_base: Vector3<f64> = base.rotation.inverse() * model.gravity_vec();
        prop_assert!((js.gravity - gravity_torques(&model, &j.q, &g_base)).amax() < 1e-12);
    }
}
