//! Time stepping for phase models: fixed-step RK4 and adaptive Dormand-Prince 5(4).
//!
//! The stepper keeps angles near the principal branch by shifting the whole
//! tuple by whole turns between steps, and tracks the number of turns so the
//! lifted trajectory can be reconstructed exactly.

use serde::{Deserialize, Serialize};

use crate::error::{Result, WsError};
use crate::models::ModelSpec;
use crate::scalar::{lit, Scalar};
use crate::torus_state::{PhaseState, DEFAULT_SEP_MIN};

/// Autonomous or time-dependent first-order system `y' = F(t, y)`.
pub trait OdeSystem<T: Scalar> {
    fn dim(&self) -> usize;
    fn eval(&self, t: T, y: &[T], dy: &mut [T]);
}

impl<T: Scalar> OdeSystem<T> for ModelSpec<T> {
    fn dim(&self) -> usize {
        self.n_units()
    }

    fn eval(&self, _t: T, y: &[T], dy: &mut [T]) {
        self.rhs_into(y, dy);
    }
}

/// Wraps a closure as an [`OdeSystem`].
pub struct FnSystem<F> {
    dim: usize,
    f: F,
}

impl<F> FnSystem<F> {
    pub fn new(dim: usize, f: F) -> Self {
        FnSystem { dim, f }
    }
}

impl<T: Scalar, F: Fn(T, &[T], &mut [T])> OdeSystem<T> for FnSystem<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, t: T, y: &[T], dy: &mut [T]) {
        (self.f)(t, y, dy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Classical fourth-order Runge-Kutta with fixed step `dt`.
    Rk4,
    /// Dormand-Prince 5(4) with error control.
    Rk45,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default, bound = "T: Scalar")]
pub struct IntegratorConfig<T: Scalar = f64> {
    pub method: Method,
    /// Fixed step for RK4, initial step for RK45.
    pub dt: T,
    pub rtol: T,
    pub atol: T,
    /// Transient before cycle detection; `None` selects `max(200, 20/|kappa|)`.
    pub t_transient: Option<T>,
    /// Hard stop for cycle detection, measured from the start.
    pub t_max: Option<T>,
    pub max_steps: usize,
    pub sep_min: T,
}

impl<T: Scalar> Default for IntegratorConfig<T> {
    fn default() -> Self {
        IntegratorConfig {
            method: Method::Rk45,
            dt: lit(1e-3),
            rtol: lit(1e-10),
            atol: lit(1e-12),
            t_transient: None,
            t_max: None,
            max_steps: 50_000_000,
            sep_min: lit(DEFAULT_SEP_MIN),
        }
    }
}

impl<T: Scalar> IntegratorConfig<T> {
    pub fn rk4(dt: T) -> Self {
        IntegratorConfig {
            method: Method::Rk4,
            dt,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |v: T| v > T::zero() && v.is_finite();
        if !pos(self.dt) || !pos(self.rtol) || !pos(self.atol) {
            return Err(WsError::Domain("dt, rtol and atol must be positive".into()));
        }
        if let Some(t) = self.t_transient {
            if !(t >= T::zero()) {
                return Err(WsError::Domain("t_transient must be non-negative".into()));
            }
        }
        Ok(())
    }

    /// Transient length for a model with coupling `kappa`.
    pub fn transient_for(&self, kappa: T) -> T {
        self.t_transient.unwrap_or_else(|| {
            let floor = lit::<T>(200.0);
            if kappa == T::zero() {
                floor
            } else {
                floor.max(lit::<T>(20.0) / kappa.abs())
            }
        })
    }
}

// Dormand-Prince tableau.
const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

fn two_sum<T: Scalar>(a: T, b: T) -> (T, T) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

/// `2 pi - T::TAU()` in the precision of `T`.
fn tau_low<T: Scalar>() -> T {
    let exact_f64_low = 2.449_293_598_294_706_4e-16;
    lit(exact_f64_low + (std::f64::consts::TAU - T::TAU().to_f64().expect("finite")))
}

/// Last accepted step, kept for substep evaluation.
#[derive(Debug, Clone)]
struct LastStep<T> {
    t0: T,
    y0: Vec<T>,
    f0: Vec<T>,
}

/// Incremental integrator over an [`OdeSystem`].
pub struct Stepper<'a, T: Scalar, S: OdeSystem<T>> {
    sys: &'a S,
    method: Method,
    rtol: T,
    atol: T,
    dt: T,
    h: T,
    t: T,
    y: Vec<T>,
    f: Vec<T>,
    last: Option<LastStep<T>>,
    wrap: bool,
    winding: i64,
    grid_origin: T,
    grid_steps: u64,
    /// Low-order parts of `y` lost to rounding (fixed-step mode).
    comp: Vec<T>,
    sep_min: Option<T>,
    max_steps: usize,
    pub n_accepted: usize,
    pub n_rejected: usize,
    k: [Vec<T>; 7],
    tmp: Vec<T>,
}

impl<'a, T: Scalar, S: OdeSystem<T>> Stepper<'a, T, S> {
    pub fn new(sys: &'a S, t0: T, y0: &[T], cfg: &IntegratorConfig<T>) -> Result<Self> {
        cfg.validate()?;
        let n = sys.dim();
        if y0.len() != n {
            return Err(WsError::Domain(format!(
                "initial state has {} components, system has {n}",
                y0.len()
            )));
        }
        let mut f = vec![T::zero(); n];
        sys.eval(t0, y0, &mut f);
        let zeros = || vec![T::zero(); n];
        Ok(Stepper {
            sys,
            method: cfg.method,
            rtol: cfg.rtol,
            atol: cfg.atol,
            dt: cfg.dt,
            h: cfg.dt,
            t: t0,
            y: y0.to_vec(),
            f,
            last: None,
            wrap: false,
            winding: 0,
            grid_origin: t0,
            grid_steps: 0,
            comp: zeros(),
            sep_min: None,
            max_steps: cfg.max_steps,
            n_accepted: 0,
            n_rejected: 0,
            k: [zeros(), zeros(), zeros(), zeros(), zeros(), zeros(), zeros()],
            tmp: zeros(),
        })
    }

    /// Shift angles back by whole turns when unit 1 leaves `(-pi, pi]`.
    pub fn with_wrapping(mut self, on: bool) -> Self {
        self.wrap = on;
        self
    }

    /// Check cyclic order after every accepted step.
    pub fn with_order_check(mut self, sep_min: T) -> Self {
        self.sep_min = Some(sep_min);
        self
    }

    pub fn t(&self) -> T {
        self.t
    }

    /// Current state in the stepper's working branch.
    pub fn y(&self) -> &[T] {
        &self.y
    }

    pub fn f(&self) -> &[T] {
        &self.f
    }

    /// Whole turns removed so far by wrapping.
    pub fn winding(&self) -> i64 {
        self.winding
    }

    /// Current state with removed turns added back.
    pub fn lifted(&self) -> Vec<T> {
        let shift = T::TAU() * T::from_i64(self.winding).expect("winding");
        self.y.iter().map(|&v| v + shift).collect()
    }

    fn rewrap(&mut self) {
        if !self.wrap || self.y.is_empty() {
            return;
        }
        let (hi, lo) = (T::TAU(), tau_low::<T>());
        while self.y[0] > T::PI() {
            self.shift_turn(-hi, -lo);
            self.winding += 1;
        }
        while self.y[0] <= -T::PI() {
            self.shift_turn(hi, lo);
            self.winding -= 1;
        }
    }

    fn shift_turn(&mut self, hi: T, lo: T) {
        for (v, c) in self.y.iter_mut().zip(self.comp.iter_mut()) {
            let (sum, err) = two_sum(*v, hi);
            *v = sum;
            *c += err + lo;
        }
    }

    /// Takes one accepted step, never passing `t_limit`.
    pub fn step(&mut self, t_limit: T) -> Result<()> {
        if self.n_accepted + self.n_rejected >= self.max_steps {
            return Err(WsError::StepFailure {
                t: self.t.to_f64().unwrap_or(f64::NAN),
                h: self.h.to_f64().unwrap_or(f64::NAN),
            });
        }
        self.rewrap();
        let remaining = t_limit - self.t;
        if !(remaining > T::zero()) {
            return Ok(());
        }
        match self.method {
            Method::Rk4 => {
                // fixed-step times come from a step count, not a running sum
                let next = self.grid_origin + self.dt * T::from_u64(self.grid_steps + 1).expect("step count");
                let t1 = if next < t_limit { next } else { t_limit };
                let h = t1 - self.t;
                let inc = self.rk4_increment(self.t, &self.y.clone(), &self.f.clone(), h);
                let mut y1 = Vec::with_capacity(inc.len());
                for ((&y, d), c) in self.y.iter().zip(inc).zip(self.comp.iter_mut()) {
                    let (sum, err) = two_sum(y, d + *c);
                    y1.push(sum);
                    *c = err;
                }
                self.accept_at(t1, h, y1)?;
                if t1 == next {
                    self.grid_steps += 1;
                } else {
                    self.grid_origin = t1;
                    self.grid_steps = 0;
                }
                Ok(())
            }
            Method::Rk45 => loop {
                let h = self.h.min(remaining);
                let (y1, err) = self.dopri_from(self.t, &self.y.clone(), &self.f.clone(), h);
                if !err.is_finite() {
                    self.n_rejected += 1;
                    self.h = h * lit(0.2);
                } else if err <= T::one() {
                    let grow = if err == T::zero() {
                        lit(5.0)
                    } else {
                        (lit::<T>(0.9) * err.powf(lit(-0.2))).min(lit(5.0)).max(lit(0.2))
                    };
                    // a step clipped to hit t_limit does not shrink the controller
                    if h == self.h {
                        self.h = h * grow;
                    } else {
                        self.h = self.h.max(h * grow);
                    }
                    return self.accept_at(self.t + h, h, y1);
                } else {
                    self.n_rejected += 1;
                    let shrink = (lit::<T>(0.9) * err.powf(lit(-0.2))).max(lit(0.2));
                    self.h = h * shrink;
                }
                if self.h < lit::<T>(1e-14) * self.t.abs().max(T::one()) {
                    return Err(WsError::StepFailure {
                        t: self.t.to_f64().unwrap_or(f64::NAN),
                        h: self.h.to_f64().unwrap_or(f64::NAN),
                    });
                }
            },
        }
    }

    fn accept_at(&mut self, t1: T, h: T, y1: Vec<T>) -> Result<()> {
        if y1.iter().any(|v| !v.is_finite()) {
            return Err(WsError::StepFailure {
                t: self.t.to_f64().unwrap_or(f64::NAN),
                h: h.to_f64().unwrap_or(f64::NAN),
            });
        }
        let mut f1 = vec![T::zero(); y1.len()];
        self.sys.eval(t1, &y1, &mut f1);
        let y0 = std::mem::replace(&mut self.y, y1);
        let f0 = std::mem::replace(&mut self.f, f1);
        self.last = Some(LastStep { t0: self.t, y0, f0 });
        self.t = t1;
        self.n_accepted += 1;
        if let Some(sep) = self.sep_min {
            check_order(&self.y, sep)?;
        }
        Ok(())
    }

    /// Integrates up to exactly `t_end`.
    pub fn advance_to(&mut self, t_end: T) -> Result<()> {
        while self.t < t_end {
            self.step(t_end)?;
        }
        Ok(())
    }

    /// State at `t` inside the last accepted step, obtained by re-stepping from
    /// its start with the same method. Returned in the branch of that step.
    pub fn substep(&mut self, t: T) -> Result<Vec<T>> {
        let last = self
            .last
            .clone()
            .ok_or_else(|| WsError::Numerical("no step taken yet".into()))?;
        let tau = t - last.t0;
        if tau == T::zero() {
            return Ok(last.y0);
        }
        Ok(match self.method {
            Method::Rk4 => self.rk4_from(last.t0, &last.y0, &last.f0, tau),
            Method::Rk45 => self.dopri_from(last.t0, &last.y0, &last.f0, tau).0,
        })
    }

    /// Start time of the last accepted step.
    pub fn last_start(&self) -> Option<T> {
        self.last.as_ref().map(|l| l.t0)
    }

    fn rk4_from(&mut self, t: T, y: &[T], f: &[T], h: T) -> Vec<T> {
        let inc = self.rk4_increment(t, y, f, h);
        y.iter().zip(inc).map(|(&a, d)| a + d).collect()
    }

    fn rk4_increment(&mut self, t: T, y: &[T], f: &[T], h: T) -> Vec<T> {
        let n = y.len();
        let half = lit::<T>(0.5);
        let sixth = T::one() / lit(6.0);
        let [_, k2, k3, k4, ..] = &mut self.k;
        for i in 0..n {
            self.tmp[i] = y[i] + half * h * f[i];
        }
        self.sys.eval(t + half * h, &self.tmp, k2);
        for i in 0..n {
            self.tmp[i] = y[i] + half * h * k2[i];
        }
        self.sys.eval(t + half * h, &self.tmp, k3);
        for i in 0..n {
            self.tmp[i] = y[i] + h * k3[i];
        }
        self.sys.eval(t + h, &self.tmp, k4);
        (0..n)
            .map(|i| h * sixth * (f[i] + lit::<T>(2.0) * (k2[i] + k3[i]) + k4[i]))
            .collect()
    }

    /// One Dormand-Prince step; returns the fifth-order solution and the scaled error norm.
    #[allow(clippy::needless_range_loop)]
    fn dopri_from(&mut self, t: T, y: &[T], f: &[T], h: T) -> (Vec<T>, T) {
        let n = y.len();
        self.k[0].copy_from_slice(f);
        for s in 1..7 {
            for i in 0..n {
                let mut acc = T::zero();
                for j in 0..s {
                    let a = A[s][j];
                    if a != 0.0 {
                        acc += lit::<T>(a) * self.k[j][i];
                    }
                }
                self.tmp[i] = y[i] + h * acc;
            }
            self.sys.eval(t + lit::<T>(C[s]) * h, &self.tmp, &mut self.k[s]);
        }
        // stage 7 is evaluated at the fifth-order solution
        let y1 = self.tmp.clone();
        let mut sum = T::zero();
        for i in 0..n {
            let mut e = T::zero();
            for (s, &c) in E.iter().enumerate() {
                if c != 0.0 {
                    e += lit::<T>(c) * self.k[s][i];
                }
            }
            let sc = self.atol + self.rtol * y[i].abs().max(y1[i].abs());
            let r = h * e / sc;
            sum += r * r;
        }
        let err = if n == 0 {
            T::zero()
        } else {
            (sum / T::from_usize(n).expect("dim")).sqrt()
        };
        (y1, err)
    }
}

/// Strict cyclic order of a lifted tuple with gaps of at least `sep_min`.
pub fn check_order<T: Scalar>(y: &[T], sep_min: T) -> Result<()> {
    let n = y.len();
    if n < 2 {
        return Ok(());
    }
    let report = |first, second, sep: T| WsError::Collision {
        first,
        second,
        separation: sep.to_f64().unwrap_or(f64::NAN),
        sep_min: sep_min.to_f64().unwrap_or(f64::NAN),
    };
    for j in 0..n - 1 {
        let gap = y[j + 1] - y[j];
        if !(gap >= sep_min) {
            return Err(report(j, j + 1, gap));
        }
    }
    let closing = y[0] + T::TAU() - y[n - 1];
    if !(closing >= sep_min) {
        return Err(report(n - 1, 0, closing));
    }
    Ok(())
}

/// Sampled solution with lifted (continuous) angles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Trajectory<T: Scalar = f64> {
    pub times: Vec<T>,
    pub states: Vec<Vec<T>>,
}

impl<T: Scalar> Trajectory<T> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<(T, &[T])> {
        Some((*self.times.last()?, self.states.last()?.as_slice()))
    }

    /// Sample `i` as a canonical state.
    pub fn state(&self, i: usize) -> Result<PhaseState<T>> {
        PhaseState::canonicalize(&self.states[i])
    }
}

/// Integrates `model` from `s0` over `t_span`, recording every accepted step.
/// The cyclic order is checked after each step.
pub fn integrate<T: Scalar>(
    model: &ModelSpec<T>,
    s0: &PhaseState<T>,
    t_span: (T, T),
    cfg: &IntegratorConfig<T>,
) -> Result<Trajectory<T>> {
    let (t0, t1) = t_span;
    if !t0.is_finite() || !t1.is_finite() {
        return Err(WsError::Domain("t_span must be finite".into()));
    }
    if t1 >= t0 {
        record(model, s0, t0, t1 - t0, T::one(), cfg)
    } else {
        record(&Reversed(model), s0, t0, t0 - t1, -T::one(), cfg)
    }
}

/// The field `-F`, integrated forward in `tau = t0 - t`.
struct Reversed<'a, S>(&'a S);

impl<T: Scalar, S: OdeSystem<T>> OdeSystem<T> for Reversed<'_, S> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn eval(&self, t: T, y: &[T], dy: &mut [T]) {
        self.0.eval(-t, y, dy);
        dy.iter_mut().for_each(|v| *v = -*v);
    }
}

fn record<T: Scalar, S: OdeSystem<T>>(
    sys: &S,
    s0: &PhaseState<T>,
    t0: T,
    span: T,
    sign: T,
    cfg: &IntegratorConfig<T>,
) -> Result<Trajectory<T>> {
    let mut st = Stepper::new(sys, T::zero(), s0.phases(), cfg)?
        .with_wrapping(true)
        .with_order_check(cfg.sep_min);
    let mut traj = Trajectory {
        times: vec![t0],
        states: vec![s0.phases().to_vec()],
    };
    while st.t() < span {
        st.step(span)?;
        traj.times.push(t0 + sign * st.t());
        traj.states.push(st.lifted());
    }
    Ok(traj)
}

/// Integrates `model` from `s0` at `t = times[0]` and records the state at
/// each requested time exactly, by clipping steps.
pub fn integrate_at<T: Scalar>(
    model: &ModelSpec<T>,
    s0: &PhaseState<T>,
    times: &[T],
    cfg: &IntegratorConfig<T>,
) -> Result<Trajectory<T>> {
    let Some(&t0) = times.first() else {
        return Ok(Trajectory {
            times: vec![],
            states: vec![],
        });
    };
    if times.windows(2).any(|w| !(w[1] >= w[0])) {
        return Err(WsError::Domain("output times must be non-decreasing".into()));
    }
    let mut st = Stepper::new(model, t0, s0.phases(), cfg)?
        .with_wrapping(true)
        .with_order_check(cfg.sep_min);
    let mut states = Vec::with_capacity(times.len());
    for &t in times {
        st.advance_to(t)?;
        states.push(st.lifted());
    }
    Ok(Trajectory {
        times: times.to_vec(),
        states,
    })
}

/// Final state of a general system after integrating from `t0` to `t1`.
pub fn integrate_final<T: Scalar, S: OdeSystem<T>>(
    sys: &S,
    y0: &[T],
    t0: T,
    t1: T,
    cfg: &IntegratorConfig<T>,
) -> Result<Vec<T>> {
    let mut st = Stepper::new(sys, t0, y0, cfg)?;
    st.advance_to(t1)?;
    Ok(st.y().to_vec())
}
