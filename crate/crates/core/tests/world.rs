mod common;

use common::rot_diff;
use mobile_ude::world::*;
use nalgebra::{Vector3, Vector6};
use proptest::prelude::*;

fn trajectories() -> Vec<BaseTrajectory> {
    vec![
        BaseTrajectory::high_dynamic(3.0, 1.0),
        BaseTrajectory::high_dynamic(0.0, 0.0),
        BaseTrajectory::constant_velocity(0.3, 1.0),
        BaseTrajectory {
            initial_position: [0.5, -0.2, 0.0],
            initial_yaw: 0.4,
            segments: vec![
                BaseSegment::SinusoidalYaw {
                    amplitude: 0.3,
                    angular_frequency: 1.5,
                    phase: 0.7,
                    start_time: 0.5,
                    ramp_time: 2.0,
                },
                BaseSegment::ConstantVelocity {
                    speed: -0.1,
                    start_time: 1.0,
                    ramp_time: 0.5,
                },
            ],
        },
    ]
}

#[test]
fn base_rates_match_differences() {
    let h = 1e-5;
    for (i, traj) in trajectories().iter().enumerate() {
        for k in 1..400 {
            let t = 0.0237 * k as f64;
            let (a, b, m) = (traj.base_state_at(t + h), traj.base_state_at(t - h), traj.base_state_at(t));
            let v = (a.state.position - b.state.position) / (2.0 * h);
            assert!((v - m.state.linear_velocity).amax() < 1e-6, "trajectory {i} t={t}: velocity");
            let acc = (a.state.linear_velocity - b.state.linear_velocity) / (2.0 * h);
            assert!((acc - m.linear_acceleration).amax() < 1e-5, "trajectory {i} t={t}: acceleration");
            let w = rot_diff(&a.state.rotation, &b.state.rotation) / (2.0 * h);
            assert!((w - m.state.angular_velocity).amax() < 1e-6, "trajectory {i} t={t}: yaw rate");
            let alpha = (a.state.angular_velocity - b.state.angular_velocity) / (2.0 * h);
            assert!((alpha - m.angular_acceleration).amax() < 1e-5, "trajectory {i} t={t}: yaw acceleration");
        }
    }
}

#[test]
fn base_is_still_before_start_and_planar_after() {
    let traj = BaseTrajectory::high_dynamic(3.0, 1.0);
    let still = traj.base_state_at(2.9);
    assert_eq!(still.state.twist(), Vector6::zeros());
    assert_eq!(still.state.position, Vector3::zeros());
    for k in 0..100 {
        let m = traj.base_state_at(3.0 + 0.3 * k as f64);
        assert_eq!(m.state.position.z, 0.0);
        assert!(m.state.orthonormality_error() < 1e-12);
    }
    let cruise = traj.base_state_at(20.0);
    assert!((cruise.state.linear_velocity.x - 0.2).abs() < 1e-12);
}

/// A point mass driven into the wall along +y leaves it with less kinetic
/// energy than it arrived with.
#[test]
fn wall_bounce_loses_energy() {
    for wall in [WallModel::rigid(0.0), WallModel::compliant(0.0)] {
        let m = 2.0;
        let (mut y, mut v) = (-0.01, 0.5);
        let e_in = 0.5 * m * v * v;
        let dt = 1e-6;
        let mut touched = false;
        for _ in 0..2_000_000 {
            let f = contact_wrench(&wall, &Vector3::new(0.0, y, 0.0), &Vector3::new(0.0, v, 0.0)).force.y;
            assert!(f <= 0.0);
            v += f / m * dt;
            y += v * dt;
            touched |= y > 0.0;
            if touched && y < -0.005 {
                break;
            }
        }
        assert!(touched && v < 0.0);
        let e_out = 0.5 * m * v * v;
        assert!(e_out < e_in, "{e_out} vs {e_in}");
    }
}

proptest! {
    #[test]
    fn contact_never_pulls(y in -0.05f64..0.05, vx in -1.0f64..1.0, vy in -2.0f64..2.0, vz in -1.0f64..1.0) {
        for wall in [WallModel::rigid(0.0), WallModel::compliant(0.0)] {
            let w = contact_wrench(&wall, &Vector3::new(0.3, y, 0.2), &Vector3::new(vx, vy, vz));
            prop_assert!(w.force.y <= 0.0);
            prop_assert_eq!(w.torque, Vector3::zeros());
            if y <= 0.0 {
                prop_assert_eq!(w.force, Vector3::zeros());
            }
            // Tangential friction opposes sliding and is bounded by μN.
            let normal = -w.force.y;
            let ft = Vector3::new(w.force.x, 0.0, w.force.z);
            prop_assert!(ft.dot(&Vector3::new(vx, 0.0, vz)) <= 0.0);
            prop_assert!(ft.norm() <= wall.friction * normal * (1.0 + 1e-12));
        }
    }

    #[test]
    fn ideal_sensor_is_identity(seed in any::<u64>(), vals in proptest::array::uniform6(-100.0f64..100.0)) {
        let mut s = WrenchSensor::new(WrenchSensorSpec::ideal(1000.0), 1e-3, seed);
        let truth = Vector6::from(vals);
        prop_assert_eq!(s.sense(0, &truth), truth);
        prop_assert_eq!(s.sense(1, &(truth * 2.0)), truth * 2.0);
    }

    #[test]
    fn slower_sensor_holds_between_samples(seed in any::<u64>(), vals in proptest::array::uniform6(-10.0f64..10.0)) {
        let mut s = WrenchSensor::new(WrenchSensorSpec::ideal(250.0), 1e-3, seed);
        let truth = Vector6::from(vals);
        prop_assert_eq!(s.sense(0, &truth), truth);
        for tick in 1..4 {
            prop_assert_eq!(s.sense(tick, &Vector6::zeros()), truth);
        }
        prop_assert_eq!(s.sense(4, &Vector6::zeros()), Vector6::zeros());
    }

    #[test]
    fn noisy_sensor_is_seed_deterministic(seed in any::<u64>()) {
        let spec = WrenchSensorSpec { noise_std: 0.5, bias: 0.1, rate_hz: 1000.0 };
        let (mut a, mut b) = (WrenchSensor::new(spec, 1e-3, seed), WrenchSensor::new(spec, 1e-3, seed));
        for tick in 0..50 {
            let t = Vector6::repeat(tick as f64);
            prop_assert_eq!(a.sense(tick, &t), b.sense(tick, &t));
        }
    }
}
