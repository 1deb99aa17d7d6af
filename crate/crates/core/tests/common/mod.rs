#![allow(dead_code)]

use mobile_ude::kinodyn::kinematics::rotation_log;
use mobile_ude::kinodyn::{BaseMotion, BaseState, JointState, RobotModel};
use mobile_ude::sigproc::*;
use nalgebra::{Rotation3, Vector3, Vector6};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn models() -> Vec<(&'static str, RobotModel)> {
    vec![
        ("ur5e-like", RobotModel::ur5e_like()),
        ("light-arm", RobotModel::light_arm()),
    ]
}

pub fn random_joints(r: &mut ChaCha8Rng, n: usize, speed: f64) -> JointState {
    let q: Vec<f64> = (0..n).map(|_| r.gen_range(-3.0..3.0)).collect();
    let qd: Vec<f64> = (0..n).map(|_| r.gen_range(-speed..speed)).collect();
    JointState::new(&q, &qd)
}

pub fn random_base(r: &mut ChaCha8Rng) -> BaseState {
    let rot = Rotation3::from_euler_angles(r.gen_range(-0.3..0.3), r.gen_range(-0.3..0.3), r.gen_range(-3.0..3.0));
    BaseState {
        position: Vector3::new(r.gen_range(-2.0..2.0), r.gen_range(-2.0..2.0), r.gen_range(-0.1..0.1)),
        rotation: rot,
        linear_velocity: Vector3::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0), r.gen_range(-0.2..0.2)),
        angular_velocity: Vector3::new(r.gen_range(-0.5..0.5), r.gen_range(-0.5..0.5), r.gen_range(-2.0..2.0)),
    }
}

/// Rotation-log difference log(R_a R_bᵀ).
pub fn rot_diff(a: &Rotation3<f64>, b: &Rotation3<f64>) -> Vector3<f64> {
    rotation_log(&(a * b.inverse()))
}

/// Analytic moving-base trajectory: position p(t) and R(t) = Rz(ψ(t)) Ry(θ(t)).
#[derive(Clone, Copy)]
pub struct AnalyticBase {
    pub forward: f64,
    pub lateral: (f64, f64),
    pub yaw: (f64, f64),
    pub pitch: (f64, f64),
}

impl AnalyticBase {
    pub fn presets() -> [AnalyticBase; 3] {
        [
            AnalyticBase { forward: 0.2, lateral: (0.15, 2.0), yaw: (0.0, 0.0), pitch: (0.0, 0.0) },
            AnalyticBase { forward: 0.3, lateral: (0.0, 0.0), yaw: (0.8, 1.5), pitch: (0.0, 0.0) },
            AnalyticBase { forward: 0.1, lateral: (0.05, 3.0), yaw: (0.5, 2.5), pitch: (0.1, 1.7) },
        ]
    }

    fn angles(&self, t: f64) -> [(f64, f64, f64); 2] {
        let s = |(a, w): (f64, f64)| (a * (w * t).sin(), a * w * (w * t).cos(), -a * w * w * (w * t).sin());
        [s(self.yaw), s(self.pitch)]
    }

    pub fn motion(&self, t: f64) -> BaseMotion {
        let (la, lw) = self.lateral;
        let position = Vector3::new(self.forward * t, la * (lw * t).sin(), 0.0);
        let velocity = Vector3::new(self.forward, la * lw * (lw * t).cos(), 0.0);
        let accel = Vector3::new(0.0, -la * lw * lw * (lw * t).sin(), 0.0);
        let [(psi, psid, psidd), (th, thd, thdd)] = self.angles(t);
        let rz = Rotation3::from_axis_angle(&Vector3::z_axis(), psi);
        let rotation = rz * Rotation3::from_axis_angle(&Vector3::y_axis(), th);
        let ey = rz * Vector3::y();
        let ez = Vector3::z();
        let omega = ez * psid + ey * thd;
        // d/dt(Rz e_y) = ψ̇ e_z × (Rz e_y)
        let alpha = ez * psidd + ey * thdd + (ez * psid).cross(&ey) * thd;
        BaseMotion {
            state: BaseState {
                position,
                rotation,
                linear_velocity: velocity,
                angular_velocity: omega,
            },
            linear_acceleration: accel,
            angular_acceleration: alpha,
        }
    }
}

/// Joint trajectory q(t) = q₀ + a sin(ωt + φ) per joint.
pub fn joint_path(t: f64) -> (JointState, Vec<f64>) {
    let q0 = [0.3, -1.1, 1.3, -0.6, 0.5, 0.2];
    let amp = [0.4, 0.3, 0.35, 0.5, 0.4, 0.6];
    let w = [0.7, 1.1, 1.3, 1.7, 2.3, 2.9];
    let ph = [0.0, 0.5, 1.0, 1.5, 2.0, 2.5];
    let q: Vec<f64> = (0..6).map(|i| q0[i] + amp[i] * (w[i] * t + ph[i]).sin()).collect();
    let qd: Vec<f64> = (0..6).map(|i| amp[i] * w[i] * (w[i] * t + ph[i]).cos()).collect();
    let qdd: Vec<f64> = (0..6).map(|i| -amp[i] * w[i] * w[i] * (w[i] * t + ph[i]).sin()).collect();
    (JointState::new(&q, &qd), qdd)
}

/// Observer-form state space of num/den (ascending coefficients), integrated
/// with RK4 at `h` while the input is interpolated linearly between samples
/// spaced `ts` apart (zero before the first one). Returns y at each sample.
pub fn rk4_oracle(num: &[f64], den: &[f64], u: &[f64], ts: f64, h: f64) -> Vec<f64> {
    let n = den.len() - 1;
    let an = den[n];
    let a: Vec<f64> = den.iter().map(|c| c / an).collect();
    let mut b = vec![0.0; n + 1];
    for (i, c) in num.iter().enumerate() {
        b[i] = c / an;
    }
    let d = b[n];
    // y = z₀ + d·u, ż_i = z_{i+1} − a_{n−1−i}·y + b_{n−1−i}·u, z_n ≡ 0.
    let deriv = |z: &[f64], u: f64| -> Vec<f64> {
        let y = z[0] + d * u;
        (0..n)
            .map(|i| {
                let next = if i + 1 < n { z[i + 1] } else { 0.0 };
                next - a[n - 1 - i] * y + b[n - 1 - i] * u
            })
            .collect()
    };
    let input = |t: f64| -> f64 {
        if t < -ts {
            return 0.0;
        }
        let k = (t / ts).floor();
        let i = k as i64;
        let get = |j: i64| if j < 0 { 0.0 } else { u[(j as usize).min(u.len() - 1)] };
        let frac = t / ts - k;
        get(i) * (1.0 - frac) + get(i + 1) * frac
    };
    let sub = (ts / h).round() as usize;
    let h = ts / sub as f64;
    let mut z = vec![0.0; n];
    let mut t = -ts;
    let mut out = Vec::with_capacity(u.len());
    for k in 0..u.len() {
        for _ in 0..sub {
            let add = |z: &[f64], k: &[f64], s: f64| z.iter().zip(k).map(|(a, b)| a + s * b).collect::<Vec<_>>();
            let k1 = deriv(&z, input(t));
            let k2 = deriv(&add(&z, &k1, 0.5 * h), input(t + 0.5 * h));
            let k3 = deriv(&add(&z, &k2, 0.5 * h), input(t + 0.5 * h));
            let k4 = deriv(&add(&z, &k3, h), input(t + h));
            for i in 0..n {
                z[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            t += h;
        }
        out.push(z[0] + d * u[k]);
    }
    out
}

pub fn signal(seed: u64, n: usize, ts: f64, scale: f64) -> Vec<Vector6<f64>> {
    let mut r = rng(seed);
    let phase: Vec<f64> = (0..6).map(|_| r.gen_range(0.0..6.0)).collect();
    (0..n)
        .map(|k| {
            let t = k as f64 * ts;
            Vector6::from_fn(|i, _| scale * ((1.3 + 0.4 * i as f64) * t + phase[i]).sin() + 0.1 * scale * r.gen_range(-1.0..1.0))
        })
        .collect()
}

/// Tustin ω/(s+ω): y_k = a y_{k−1} + b (u_k + u_{k−1}).
struct Lp {
    a: f64,
    b: f64,
    y: f64,
    u: f64,
}

/// Tustin ωs/(s+ω): y_k = a y_{k−1} + c (u_k − u_{k−1}).
struct Hp {
    a: f64,
    c: f64,
    y: f64,
    u: f64,
}

impl Lp {
    fn new(w: f64, ts: f64) -> Self {
        Lp {
            a: (2.0 - w * ts) / (2.0 + w * ts),
            b: w * ts / (2.0 + w * ts),
            y: 0.0,
            u: 0.0,
        }
    }
    fn peek(&self, u: f64) -> f64 {
        self.a * self.y + self.b * (u + self.u)
    }
    fn commit(&mut self, u: f64) {
        self.y = self.peek(u);
        self.u = u;
    }
}

impl Hp {
    fn new(w: f64, ts: f64) -> Self {
        Hp {
            a: (2.0 - w * ts) / (2.0 + w * ts),
            c: 2.0 * w / (2.0 + w * ts),
            y: 0.0,
            u: 0.0,
        }
    }
    fn step(&mut self, u: f64) -> f64 {
        self.y = self.a * self.y + self.c * (u - self.u);
        self.u = u;
        self.y
    }
}

/// f_u = v − û with û = G_f2∗(M₀ẍ − f_u), where G_f2∗M₀ẍ is taken as the
/// filtered derivative sG_f2∗(M₀ẋ). The loop in f_u is closed by fixed-point
/// iteration from the previous step's f_u. Returns the largest difference
/// from the explicit operator form over `n` steps of random inputs.
pub fn fixed_point_vs_explicit(cutoffs: [f64; 6], ts: f64, n: usize) -> f64 {
    let mut ops = ude_composite_operators(&cutoffs, ts).unwrap();
    let mut lp: Vec<Lp> = cutoffs.iter().map(|&w| Lp::new(w, ts)).collect();
    let mut hp: Vec<Hp> = cutoffs.iter().map(|&w| Hp::new(w, ts)).collect();
    let v = signal(4, n, ts, 20.0);
    let mw = signal(5, n, ts, 2.0);
    let mut fu = Vector6::<f64>::zeros();
    let mut worst: f64 = 0.0;
    for k in 0..n {
        let explicit = ops.step(&v[k], &mw[k], &[false; 6]);
        for i in 0..6 {
            let accel = hp[i].step(mw[k][i]);
            let mut f = fu[i];
            for _ in 0..200 {
                let next = v[k][i] - (accel - lp[i].peek(f));
                let done = (next - f).abs() < 1e-13 * (1.0 + next.abs());
                f = next;
                if done {
                    break;
                }
            }
            lp[i].commit(f);
            fu[i] = f;
        }
        worst = worst.max((explicit - fu).amax());
    }
    worst
}

/// Simplified composite operators against a direct realization of the
/// rational forms (s+ω)/s and sω/s; largest per-step difference.
pub fn composite_vs_rational(cutoffs: [f64; 6], ts: f64, n: usize) -> f64 {
    let mut simple = ude_composite_operators(&cutoffs, ts).unwrap();
    let mut rational = CompositeOperators {
        axes: cutoffs
            .iter()
            .map(|&w| {
                let (int, prop) = TransferFunction::first_order_lowpass(w).unwrap().ude_operators().unwrap();
                CompositeOperator::Rational {
                    integral: discretize(&int, ts).unwrap(),
                    proportional: discretize(&prop, ts).unwrap(),
                }
            })
            .collect(),
    };
    let v = signal(1, n, ts, 5.0);
    let w = signal(2, n, ts, 3.0);
    (0..n)
        .map(|k| (simple.step(&v[k], &w[k], &[false; 6]) - rational.step(&v[k], &w[k], &[false; 6])).amax())
        .fold(0.0, f64::max)
}

/// Largest step-response difference between the Tustin filter at `ts` and
/// the 1 kHz RK4 oracle.
pub fn step_error(tf: &TransferFunction, ts: f64, duration: f64) -> f64 {
    let u = vec![1.0; (duration / ts).round() as usize];
    let oracle = rk4_oracle(&tf.num, &tf.den, &u, ts, 1e-3);
    let mut f = discretize(tf, ts).unwrap();
    oracle.iter().zip(&u).map(|(a, &x)| (a - f.step(x)).abs()).fold(0.0, f64::max)
}
