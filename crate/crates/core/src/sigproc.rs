//! Continuous transfer functions, their Tustin discretization, and the UDE
//! filter operators.

use nalgebra::{Complex, DMatrix, DVector, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rational transfer function in s; coefficients in ascending powers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferFunction {
    pub num: Vec<f64>,
    pub den: Vec<f64>,
}

fn trim(mut p: Vec<f64>) -> Vec<f64> {
    while p.len() > 1 && *p.last().unwrap() == 0.0 {
        p.pop();
    }
    p
}

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn poly_add(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len().max(b.len())];
    for (i, x) in a.iter().enumerate() {
        out[i] += x;
    }
    for (i, x) in b.iter().enumerate() {
        out[i] += x;
    }
    out
}

impl TransferFunction {
    pub fn new(num: Vec<f64>, den: Vec<f64>) -> Result<Self> {
        let tf = TransferFunction {
            num: trim(num),
            den: trim(den),
        };
        tf.validate()?;
        Ok(tf)
    }

    pub fn gain(k: f64) -> Self {
        TransferFunction {
            num: vec![k],
            den: vec![1.0],
        }
    }

    /// ω/(s + ω).
    pub fn first_order_lowpass(cutoff: f64) -> Result<Self> {
        if !(cutoff > 0.0) {
            return Err(Error::InvalidTransferFunction(format!(
                "cutoff must be > 0, got {cutoff}"
            )));
        }
        TransferFunction::new(vec![cutoff], vec![cutoff, 1.0])
    }

    pub fn order(&self) -> usize {
        self.den.len() - 1
    }

    pub fn validate(&self) -> Result<()> {
        if self.den.is_empty() || self.num.is_empty() {
            return Err(Error::InvalidTransferFunction("empty polynomial".into()));
        }
        if *self.den.last().unwrap() == 0.0 {
            return Err(Error::InvalidTransferFunction(
                "denominator leading coefficient is zero".into(),
            ));
        }
        if self.num.len() > self.den.len() {
            return Err(Error::InvalidTransferFunction(format!(
                "improper: numerator degree {} exceeds denominator degree {}",
                self.num.len() - 1,
                self.den.len() - 1
            )));
        }
        if self.num.iter().chain(self.den.iter()).any(|c| !c.is_finite()) {
            return Err(Error::InvalidTransferFunction("non-finite coefficient".into()));
        }
        Ok(())
    }

    pub fn eval(&self, s: Complex<f64>) -> Complex<f64> {
        let horner = |p: &[f64]| p.iter().rev().fold(Complex::new(0.0, 0.0), |acc, &c| acc * s + c);
        horner(&self.num) / horner(&self.den)
    }

    pub fn frequency_response(&self, omega: f64) -> Complex<f64> {
        self.eval(Complex::new(0.0, omega))
    }

    pub fn dc_gain(&self) -> f64 {
        self.num[0] / self.den[0]
    }

    /// Multiplies by s (must stay proper).
    pub fn times_s(&self) -> Result<Self> {
        let mut num = vec![0.0];
        num.extend_from_slice(&self.num);
        TransferFunction::new(num, self.den.clone())
    }

    /// 1/(1 − G) and sG/(1 − G) as explicit rational functions, cancelling a
    /// common factor of s when G has unit DC gain.
    pub fn ude_operators(&self) -> Result<(TransferFunction, TransferFunction)> {
        let neg_num: Vec<f64> = self.num.iter().map(|c| -c).collect();
        let mut one_minus = poly_add(&self.den, &neg_num);
        let integral = TransferFunction::new(self.den.clone(), one_minus.clone())?;
        let mut s_num = poly_mul(&[0.0, 1.0], &self.num);
        if one_minus[0].abs() < 1e-12 * self.den[0].abs() {
            one_minus.remove(0);
            s_num.remove(0);
        }
        let prop = TransferFunction::new(s_num, one_minus)?;
        Ok((integral, prop))
    }
}

/// Discrete SISO filter in controllable canonical form.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: DVector<f64>,
    pub d: f64,
    pub state: DVector<f64>,
    pub sample_period: f64,
}

/// Tustin (bilinear) discretization.
pub fn discretize(tf: &TransferFunction, sample_period: f64) -> Result<FilterState> {
    tf.validate()?;
    if !(sample_period > 0.0) {
        return Err(Error::InvalidTransferFunction(format!(
            "sample period must be > 0, got {sample_period}"
        )));
    }
    let n = tf.order();
    let k = 2.0 / sample_period;
    // Polynomials in z⁻¹, ascending.
    let mut num_z = vec![0.0; n + 1];
    let mut den_z = vec![0.0; n + 1];
    for power in 0..=n {
        let mut term = vec![k.powi(power as i32)];
        for _ in 0..power {
            term = poly_mul(&term, &[1.0, -1.0]);
        }
        for _ in power..n {
            term = poly_mul(&term, &[1.0, 1.0]);
        }
        let a = tf.den.get(power).copied().unwrap_or(0.0);
        let b = tf.num.get(power).copied().unwrap_or(0.0);
        for (i, t) in term.iter().enumerate() {
            den_z[i] += a * t;
            num_z[i] += b * t;
        }
    }
    let a0 = den_z[0];
    let bz: Vec<f64> = num_z.iter().map(|v| v / a0).collect();
    let az: Vec<f64> = den_z.iter().map(|v| v / a0).collect();
    let mut a = DMatrix::zeros(n, n);
    let mut b = DVector::zeros(n);
    let mut c = DVector::zeros(n);
    if n > 0 {
        for j in 0..n {
            a[(0, j)] = -az[j + 1];
            c[j] = bz[j + 1] - az[j + 1] * bz[0];
        }
        for i in 1..n {
            a[(i, i - 1)] = 1.0;
        }
        b[0] = 1.0;
    }
    Ok(FilterState {
        a,
        b,
        c,
        d: bz[0],
        state: DVector::zeros(n),
        sample_period,
    })
}

impl FilterState {
    /// Output for input `u` without advancing the state.
    pub fn output(&self, u: f64) -> f64 {
        self.c.dot(&self.state) + self.d * u
    }

    /// Part of the output that does not depend on the current input.
    pub fn free_response(&self) -> f64 {
        self.c.dot(&self.state)
    }

    pub fn step(&mut self, u: f64) -> f64 {
        let y = self.output(u);
        if !self.state.is_empty() {
            self.state = &self.a * &self.state + &self.b * u;
        }
        y
    }

    pub fn reset(&mut self) {
        self.state.fill(0.0);
    }

    /// H(e^{jωT}).
    pub fn frequency_response(&self, omega: f64) -> Complex<f64> {
        let n = self.state.len();
        if n == 0 {
            return Complex::new(self.d, 0.0);
        }
        let z = Complex::from_polar(1.0, omega * self.sample_period);
        let lhs = DMatrix::<Complex<f64>>::identity(n, n) * z - self.a.map(|v| Complex::new(v, 0.0));
        let b = self.b.map(|v| Complex::new(v, 0.0));
        match lhs.lu().solve(&b) {
            Some(x) => x.iter().zip(self.c.iter()).map(|(x, c)| x * *c).sum::<Complex<f64>>() + self.d,
            None => Complex::new(f64::INFINITY, 0.0),
        }
    }

    pub fn dc_gain(&self) -> f64 {
        let n = self.state.len();
        if n == 0 {
            return self.d;
        }
        let lhs = DMatrix::identity(n, n) - &self.a;
        match lhs.lu().solve(&self.b) {
            Some(x) => self.c.dot(&x) + self.d,
            None => f64::INFINITY,
        }
    }
}

/// Continuous-time response of `tf` to the samples `u` (period `dt`) joined
/// by straight lines, starting from rest with zero input before the first
/// sample. RK4 with `substeps` steps per sample.
pub fn continuous_response(tf: &TransferFunction, u: &[f64], dt: f64, substeps: usize) -> Result<Vec<f64>> {
    tf.validate()?;
    let n = tf.order();
    let lead = tf.den[n];
    let a: Vec<f64> = tf.den.iter().map(|c| c / lead).collect();
    let b: Vec<f64> = (0..=n).map(|i| tf.num.get(i).copied().unwrap_or(0.0) / lead).collect();
    let d = b[n];
    let c: Vec<f64> = (0..n).map(|i| b[i] - a[i] * d).collect();
    // x' = companion(a) x + e_n u, y = c·x + d u.
    let deriv = |x: &[f64], u: f64| -> Vec<f64> {
        let mut dx: Vec<f64> = (0..n).map(|i| if i + 1 < n { x[i + 1] } else { 0.0 }).collect();
        if n > 0 {
            dx[n - 1] = u - (0..n).map(|i| a[i] * x[i]).sum::<f64>();
        }
        dx
    };
    let h = dt / substeps.max(1) as f64;
    let mut x = vec![0.0; n];
    let mut prev = 0.0;
    let mut out = Vec::with_capacity(u.len());
    for &uk in u {
        for j in 0..substeps.max(1) {
            let lerp = |tau: f64| prev + (uk - prev) * tau / dt;
            let t0 = j as f64 * h;
            let (u0, um, u1) = (lerp(t0), lerp(t0 + 0.5 * h), lerp(t0 + h));
            let k1 = deriv(&x, u0);
            let x2: Vec<f64> = (0..n).map(|i| x[i] + 0.5 * h * k1[i]).collect();
            let k2 = deriv(&x2, um);
            let x3: Vec<f64> = (0..n).map(|i| x[i] + 0.5 * h * k2[i]).collect();
            let k3 = deriv(&x3, um);
            let x4: Vec<f64> = (0..n).map(|i| x[i] + h * k3[i]).collect();
            let k4 = deriv(&x4, u1);
            for i in 0..n {
                x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        prev = uk;
        out.push((0..n).map(|i| c[i] * x[i]).sum::<f64>() + d * uk);
    }
    Ok(out)
}

/// One scalar section per task axis.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterBank {
    pub sections: Vec<FilterState>,
}

impl FilterBank {
    pub fn new(tfs: &[TransferFunction], sample_period: f64) -> Result<Self> {
        if tfs.len() != 6 {
            return Err(Error::InvalidTransferFunction(format!(
                "filter bank needs 6 sections, got {}",
                tfs.len()
            )));
        }
        let sections = tfs
            .iter()
            .map(|tf| discretize(tf, sample_period))
            .collect::<Result<Vec<_>>>()?;
        Ok(FilterBank { sections })
    }

    pub fn uniform(tf: &TransferFunction, sample_period: f64) -> Result<Self> {
        FilterBank::new(&vec![tf.clone(); 6], sample_period)
    }

    pub fn step(&mut self, u: &Vector6<f64>) -> Vector6<f64> {
        Vector6::from_fn(|i, _| self.sections[i].step(u[i]))
    }

    pub fn output(&self, u: &Vector6<f64>) -> Vector6<f64> {
        Vector6::from_fn(|i, _| self.sections[i].output(u[i]))
    }

    pub fn feedthrough(&self) -> Vector6<f64> {
        Vector6::from_fn(|i, _| self.sections[i].d)
    }

    pub fn free_response(&self) -> Vector6<f64> {
        Vector6::from_fn(|i, _| self.sections[i].free_response())
    }

    pub fn reset(&mut self) {
        self.sections.iter_mut().for_each(FilterState::reset);
    }
}

/// The G_f1 / sG_f1 / G_f2 sets used by the extended UDE.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UdeFilterSpec {
    /// G_f1, one per axis.
    pub coupling: Vec<TransferFunction>,
    /// G_f2 cutoffs ω_c per axis [rad/s].
    pub cutoffs: [f64; 6],
}

pub const PAPER_CUTOFFS: [f64; 6] = [6.0, 6.0, 6.0, 3.0, 3.0, 3.0];

/// Printed coupling filter 108 s / (s² + 8.485 s + 36). Band-pass with zero
/// DC gain, so it does not estimate a slowly varying coupling wrench.
pub fn printed_coupling_filter() -> TransferFunction {
    TransferFunction {
        num: vec![0.0, 108.0],
        den: vec![36.0, 8.485, 1.0],
    }
}

/// Unit-gain second-order low-pass on the same poles (ω_n = 6, ζ ≈ 0.707):
/// 36 / (s² + 8.485 s + 36). Default G_f1.
pub fn paper_coupling_filter() -> TransferFunction {
    TransferFunction {
        num: vec![36.0],
        den: vec![36.0, 8.485, 1.0],
    }
}

impl UdeFilterSpec {
    pub fn paper() -> Self {
        UdeFilterSpec {
            coupling: vec![paper_coupling_filter(); 6],
            cutoffs: PAPER_CUTOFFS,
        }
    }

    /// Experiment variant: same G_f1, ω_c = 3 on every axis.
    pub fn experiment() -> Self {
        UdeFilterSpec {
            coupling: vec![paper_coupling_filter(); 6],
            cutoffs: [3.0; 6],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.coupling.len() != 6 {
            return Err(Error::InvalidTransferFunction("need six G_f1 sections".into()));
        }
        for tf in &self.coupling {
            tf.validate()?;
            // sG_f1 must be proper too.
            tf.times_s()?;
        }
        if self.cutoffs.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::InvalidTransferFunction("cutoffs must be > 0".into()));
        }
        Ok(())
    }

    pub fn lowpass(&self) -> Vec<TransferFunction> {
        self.cutoffs
            .iter()
            .map(|&w| TransferFunction::first_order_lowpass(w).expect("validated cutoff"))
            .collect()
    }
}

/// Discretized banks {G_f1, sG_f1, G_f2}.
#[derive(Debug, Clone, PartialEq)]
pub struct UdeFilters {
    pub coupling: FilterBank,
    pub coupling_derivative: FilterBank,
    pub lowpass: FilterBank,
}

impl UdeFilters {
    pub fn new(spec: &UdeFilterSpec, sample_period: f64) -> Result<Self> {
        spec.validate()?;
        let s_times: Vec<TransferFunction> = spec
            .coupling
            .iter()
            .map(TransferFunction::times_s)
            .collect::<Result<_>>()?;
        Ok(UdeFilters {
            coupling: FilterBank::new(&spec.coupling, sample_period)?,
            coupling_derivative: FilterBank::new(&s_times, sample_period)?,
            lowpass: FilterBank::new(&spec.lowpass(), sample_period)?,
        })
    }
}

/// The paper filter banks at sample period `sample_period`.
pub fn make_paper_filters(sample_period: f64) -> UdeFilters {
    UdeFilters::new(&UdeFilterSpec::paper(), sample_period).expect("paper filters are valid")
}

/// 1/(1 − G_f2) for a first-order G_f2 = ω/(s+ω): the unity-feedthrough
/// integrator 1 + ω/s, trapezoidal in discrete time.
#[derive(Debug, Clone, PartialEq)]
pub struct UdeIntegrator {
    pub cutoff: f64,
    pub integral: f64,
    last_input: f64,
    sample_period: f64,
}

impl UdeIntegrator {
    pub fn new(cutoff: f64, sample_period: f64) -> Self {
        UdeIntegrator {
            cutoff,
            integral: 0.0,
            last_input: 0.0,
            sample_period,
        }
    }

    /// Output if `v` were applied now, without advancing.
    pub fn output(&self, v: f64) -> f64 {
        v + self.cutoff * (self.integral + 0.5 * self.sample_period * (v + self.last_input))
    }

    /// Advances one sample. With `hold` set the integral is frozen whenever
    /// the increment would grow its magnitude (anti-windup).
    pub fn step(&mut self, v: f64, hold: bool) -> f64 {
        let inc = 0.5 * self.sample_period * (v + self.last_input);
        let grows = inc * self.integral > 0.0 || self.integral == 0.0;
        if !(hold && grows) {
            self.integral += inc;
        }
        self.last_input = v;
        v + self.cutoff * self.integral
    }

    pub fn reset(&mut self) {
        self.integral = 0.0;
        self.last_input = 0.0;
    }
}

/// One composite operator pair per axis.
#[derive(Debug, Clone, PartialEq)]
pub enum CompositeOperator {
    /// First-order G_f2: integral = 1 + ω/s, proportional = ω.
    Simplified(UdeIntegrator),
    /// General G_f2: explicit realization of both rational operators.
    Rational {
        integral: FilterState,
        proportional: FilterState,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompositeOperators {
    pub axes: Vec<CompositeOperator>,
}

fn as_first_order_cutoff(tf: &TransferFunction) -> Option<f64> {
    if tf.den.len() == 2 && tf.num.len() == 1 {
        let w = tf.den[0] / tf.den[1];
        let k = tf.num[0] / tf.den[1];
        if w > 0.0 && (k - w).abs() <= 1e-12 * w {
            return Some(w);
        }
    }
    None
}

/// Composite operators for G_f2 = ω_c/(s + ω_c) per axis.
pub fn ude_composite_operators(cutoffs: &[f64; 6], sample_period: f64) -> Result<CompositeOperators> {
    if cutoffs.iter().any(|w| !(*w > 0.0)) {
        return Err(Error::InvalidTransferFunction("cutoffs must be > 0".into()));
    }
    Ok(CompositeOperators {
        axes: cutoffs
            .iter()
            .map(|&w| CompositeOperator::Simplified(UdeIntegrator::new(w, sample_period)))
            .collect(),
    })
}

impl CompositeOperators {
    /// Simplified forms only; anything other than a unit-gain first-order
    /// low-pass is rejected.
    pub fn simplified(tfs: &[TransferFunction], sample_period: f64) -> Result<Self> {
        let mut cutoffs = [0.0; 6];
        if tfs.len() != 6 {
            return Err(Error::InvalidTransferFunction("need six G_f2 sections".into()));
        }
        for (i, tf) in tfs.iter().enumerate() {
            cutoffs[i] = as_first_order_cutoff(tf).ok_or_else(|| {
                Error::InvalidTransferFunction(format!(
                    "axis {i}: simplified UDE operators require G_f2 = w/(s+w)"
                ))
            })?;
        }
        ude_composite_operators(&cutoffs, sample_period)
    }

    /// Simplified forms where valid, explicit rational realizations otherwise.
    pub fn from_transfer_functions(tfs: &[TransferFunction], sample_period: f64) -> Result<Self> {
        let axes = tfs
            .iter()
            .map(|tf| match as_first_order_cutoff(tf) {
                Some(w) => Ok(CompositeOperator::Simplified(UdeIntegrator::new(w, sample_period))),
                None => {
                    let (int, prop) = tf.ude_operators()?;
                    Ok(CompositeOperator::Rational {
                        integral: discretize(&int, sample_period)?,
                        proportional: discretize(&prop, sample_period)?,
                    })
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(CompositeOperators { axes })
    }

    /// f_u = 1/(1−G)∗v − sG/(1−G)∗w, one sample. `hold[i]` freezes growth of
    /// the integral on axis i.
    pub fn step(&mut self, v: &Vector6<f64>, w: &Vector6<f64>, hold: &[bool; 6]) -> Vector6<f64> {
        Vector6::from_fn(|i, _| match &mut self.axes[i] {
            CompositeOperator::Simplified(int) => int.step(v[i], hold[i]) - int.cutoff * w[i],
            CompositeOperator::Rational {
                integral,
                proportional,
            } => integral.step(v[i]) - proportional.step(w[i]),
        })
    }

    pub fn integral_states(&self) -> Vector6<f64> {
        Vector6::from_fn(|i, _| match &self.axes[i] {
            CompositeOperator::Simplified(int) => int.integral,
            CompositeOperator::Rational { integral, .. } => integral.state.sum(),
        })
    }

    pub fn reset(&mut self) {
        for a in &mut self.axes {
            match a {
                CompositeOperator::Simplified(int) => int.reset(),
                CompositeOperator::Rational {
                    integral,
                    proportional,
                } => {
                    integral.reset();
                    proportional.reset();
                }
            }
        }
    }
}
