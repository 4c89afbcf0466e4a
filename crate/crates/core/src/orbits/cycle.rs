//! Limit cycles of the unperturbed flow on a fixed cross-ratio leaf.
//!
//! After a transient, returns to a Poincare section `psi = const (mod 2 pi)`
//! are located on the unwrapped rotation angle `psi` of the chart inverse.
//! Once two successive returns agree, one period is resampled on a uniform
//! grid with exact output times.

use serde::{Deserialize, Serialize};

use super::integrate::{IntegratorConfig, Stepper};
use crate::error::{Result, WsError};
use crate::mobius::{chart_inverse, cross_ratios, leaf_point, Convention, CrossRatios};
use crate::models::ModelSpec;
use crate::scalar::{circle_distance, from_usize, lit, wrap_angle, Scalar};
use crate::torus_state::PhaseState;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default, bound = "T: Scalar")]
pub struct CycleConfig<T: Scalar = f64> {
    pub integrator: IntegratorConfig<T>,
    /// Number of uniform intervals over one period.
    pub samples: usize,
    /// Largest accepted phase mismatch between successive section returns.
    pub residual_tol: T,
    /// Smallest accepted mean rotation rate of `psi`.
    pub min_rate: T,
}

impl<T: Scalar> Default for CycleConfig<T> {
    fn default() -> Self {
        CycleConfig {
            integrator: IntegratorConfig::default(),
            samples: 2048,
            residual_tol: lit(1e-8),
            min_rate: lit(1e-3),
        }
    }
}

/// One period of a limit cycle, sampled uniformly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct OrbitRecord<T: Scalar = f64> {
    pub period: T,
    /// `t_i = i T / M` for `i = 0..=M`, measured from the section.
    pub times: Vec<T>,
    /// Lifted phases at each sample.
    pub phases: Vec<Vec<T>>,
    /// Vector field at each sample.
    pub velocities: Vec<Vec<T>>,
    /// Cross-ratios of the section state, in the convention requested.
    pub lambda: CrossRatios<T>,
    /// Largest deviation of the cross-ratios along the sampled period.
    pub lambda_drift: T,
    /// Mismatch between the last two section returns.
    pub residual: T,
    /// Mismatch between the first and last sample.
    pub closure: T,
    /// `+1` if `psi` increases along the orbit, `-1` otherwise.
    pub direction: i8,
    /// Number of section returns used.
    pub returns: usize,
    pub converged: bool,
}

impl<T: Scalar> OrbitRecord<T> {
    pub fn n_units(&self) -> usize {
        self.phases.first().map_or(0, Vec::len)
    }

    pub fn n_samples(&self) -> usize {
        self.times.len().saturating_sub(1)
    }

    pub fn state(&self, i: usize) -> Result<PhaseState<T>> {
        PhaseState::canonicalize(&self.phases[i])
    }

    /// Phase of `unit` at time `t`, extended periodically and interpolated
    /// with cubic Hermite polynomials. The value is defined modulo `2 pi`.
    pub fn phase_at(&self, unit: usize, t: T) -> T {
        let m = self.n_samples();
        let dt = self.period / from_usize::<T>(m);
        let tau = t - self.period * (t / self.period).floor();
        let mut i = (tau / dt).floor().to_usize().unwrap_or(0);
        if i >= m {
            i = m - 1;
        }
        let s = (tau - dt * from_usize::<T>(i)) / dt;
        let (y0, y1) = (self.phases[i][unit], self.phases[i + 1][unit]);
        let (f0, f1) = (self.velocities[i][unit], self.velocities[i + 1][unit]);
        hermite(y0, f0, y1, f1, dt, s)
    }
}

/// Cubic Hermite interpolant on one interval, `s` in `[0, 1]`.
pub fn hermite<T: Scalar>(y0: T, f0: T, y1: T, f1: T, h: T, s: T) -> T {
    let two = lit::<T>(2.0);
    let three = lit::<T>(3.0);
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = two * s3 - three * s2 + T::one();
    let h10 = s3 - two * s2 + s;
    let h01 = three * s2 - two * s3;
    let h11 = s3 - s2;
    h00 * y0 + h10 * h * f0 + h01 * y1 + h11 * h * f1
}

/// Rotation angle `psi` of the chart inverse of a lifted tuple.
pub fn psi_of<T: Scalar>(y: &[T]) -> Result<T> {
    let s = PhaseState::canonicalize(y)?;
    Ok(chart_inverse(&s)?.mobius.psi())
}

struct PsiTracker<T> {
    last: T,
    lift: T,
}

impl<T: Scalar> PsiTracker<T> {
    fn new(psi: T) -> Self {
        PsiTracker { last: psi, lift: psi }
    }

    fn advance(&self, psi: T) -> T {
        self.lift + wrap_angle(psi - self.last)
    }

    fn update(&mut self, psi: T) {
        self.lift = self.advance(psi);
        self.last = psi;
    }
}

fn lost<T: Scalar>(t: T) -> impl Fn(WsError) -> WsError {
    move |e| {
        WsError::NotConverged(format!(
            "trajectory left the admissible region at t = {}: {e}",
            t.to_f64().unwrap_or(f64::NAN)
        ))
    }
}

/// Largest circular distance between two tuples.
pub fn max_phase_mismatch<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .fold(T::zero(), |acc, (&x, &y)| acc.max(circle_distance(x, y)))
}

/// Finds the limit cycle of the unperturbed part of `model` on the leaf `lambda`.
pub fn find_limit_cycle<T: Scalar>(
    model: &ModelSpec<T>,
    lambda: &CrossRatios<T>,
    cfg: &CycleConfig<T>,
) -> Result<OrbitRecord<T>> {
    if lambda.n_units() != model.n_units() {
        return Err(WsError::InvalidModel(format!(
            "leaf has {} units, model expects {}",
            lambda.n_units(),
            model.n_units()
        )));
    }
    find_limit_cycle_from(model, &leaf_point(lambda)?, lambda.convention(), cfg)
}

/// As [`find_limit_cycle`], starting from an arbitrary state of the leaf.
pub fn find_limit_cycle_from<T: Scalar>(
    model: &ModelSpec<T>,
    s0: &PhaseState<T>,
    convention: Convention,
    cfg: &CycleConfig<T>,
) -> Result<OrbitRecord<T>> {
    if s0.n_units() != model.n_units() {
        return Err(WsError::InvalidModel(format!(
            "state has {} units, model expects {}",
            s0.n_units(),
            model.n_units()
        )));
    }
    if cfg.samples < 2 || !cfg.samples.is_multiple_of(2) {
        return Err(WsError::Domain("samples must be even and at least 2".into()));
    }
    let m0 = model.unperturbed();
    let icfg = &cfg.integrator;
    let kappa = m0.rotator_params().map_or(T::one(), |(_, k)| k);
    let t_tr = icfg.transient_for(kappa).max(T::one());

    let mut st = Stepper::new(&m0, T::zero(), s0.phases(), icfg)?
        .with_wrapping(true)
        .with_order_check(icfg.sep_min);
    let mut tracker = PsiTracker::new(psi_of(st.y())?);

    let t_mid = t_tr * lit(0.5);
    let mut lift_mid = None;
    while st.t() < t_tr {
        let limit = if lift_mid.is_none() { t_mid } else { t_tr };
        st.step(limit).map_err(lost(st.t()))?;
        tracker.update(psi_of(st.y()).map_err(lost(st.t()))?);
        if lift_mid.is_none() && st.t() >= t_mid {
            lift_mid = Some(tracker.lift);
        }
    }
    let drift = tracker.lift - lift_mid.unwrap_or(tracker.lift);
    let rate = drift.abs() / (t_tr - t_mid);
    if !(rate >= cfg.min_rate) {
        return Err(WsError::FrequencyBelowThreshold {
            rate: rate.to_f64().unwrap_or(f64::NAN),
            threshold: cfg.min_rate.to_f64().unwrap_or(f64::NAN),
        });
    }
    let dir = if drift > T::zero() { T::one() } else { -T::one() };
    let t_max = icfg
        .t_max
        .unwrap_or_else(|| t_tr + lit::<T>(60.0) * T::TAU() / rate);

    let mut target = tracker.lift + dir * T::TAU();
    let mut previous: Option<(T, Vec<T>)> = None;
    let mut returns = 0usize;
    let (t_section, y_section, residual) = loop {
        if st.t() > t_max {
            return Err(WsError::NotConverged(format!(
                "no repeat of the section state by t = {}",
                t_max.to_f64().unwrap_or(f64::NAN)
            )));
        }
        let (last_psi, last_lift) = (tracker.last, tracker.lift);
        st.step(t_max + T::one()).map_err(lost(st.t()))?;
        tracker.update(psi_of(st.y()).map_err(lost(st.t()))?);
        if dir * (tracker.lift - target) < T::zero() {
            continue;
        }
        let t0 = st.last_start().expect("a step was taken");
        let base = PsiTracker {
            last: last_psi,
            lift: last_lift,
        };
        let t_c = refine_crossing(&mut st, &base, target, dir, t0)?;
        let y_c = st.substep(t_c)?;
        returns += 1;
        target += dir * T::TAU();
        if let Some((t_prev, y_prev)) = &previous {
            let res = max_phase_mismatch(&y_c, y_prev);
            if res < cfg.residual_tol {
                break (t_c - *t_prev, y_c, res);
            }
        }
        previous = Some((t_c, y_c));
    };
    let period = t_section;

    let section = PhaseState::canonicalize(&y_section)?;
    let record_lambda = cross_ratios(&section, convention)?;
    let m = cfg.samples;
    let dt = period / from_usize::<T>(m);
    let mut sampler = Stepper::new(&m0, T::zero(), section.phases(), icfg)?
        .with_order_check(icfg.sep_min);
    let mut times = Vec::with_capacity(m + 1);
    let mut phases = Vec::with_capacity(m + 1);
    let mut velocities = Vec::with_capacity(m + 1);
    let mut lambda_drift = T::zero();
    for i in 0..=m {
        let t = if i == m { period } else { dt * from_usize::<T>(i) };
        sampler.advance_to(t).map_err(lost(t))?;
        let y = sampler.y().to_vec();
        let lam = cross_ratios(&PhaseState::canonicalize(&y)?, convention)?;
        for (a, b) in lam.values().iter().zip(record_lambda.values()) {
            lambda_drift = lambda_drift.max((*a - *b).abs());
        }
        times.push(t);
        velocities.push(sampler.f().to_vec());
        phases.push(y);
    }
    let closure = max_phase_mismatch(&phases[m], &phases[0]);
    log::debug!(
        "limit cycle: period {} after {} returns, residual {:e}, closure {:e}",
        period,
        returns,
        residual.to_f64().unwrap_or(f64::NAN),
        closure.to_f64().unwrap_or(f64::NAN)
    );
    Ok(OrbitRecord {
        period,
        times,
        phases,
        velocities,
        lambda: record_lambda,
        lambda_drift,
        residual,
        closure,
        direction: if dir > T::zero() { 1 } else { -1 },
        returns,
        converged: true,
    })
}

/// Time in the last step at which the lifted `psi` reaches `target`.
fn refine_crossing<T: Scalar, S: super::integrate::OdeSystem<T>>(
    st: &mut Stepper<'_, T, S>,
    base: &PsiTracker<T>,
    target: T,
    dir: T,
    t0: T,
) -> Result<T> {
    let g = |t: T, st: &mut Stepper<'_, T, S>| -> Result<T> {
        let y = st.substep(t)?;
        Ok(dir * (base.advance(psi_of(&y)?) - target))
    };
    let (mut a, mut b) = (t0, st.t());
    let (mut ga, mut gb) = (dir * (base.lift - target), g(b, st)?);
    if gb == T::zero() {
        return Ok(b);
    }
    // Illinois variant of regula falsi
    let mut side = 0i8;
    for _ in 0..100 {
        let c = (a * gb - b * ga) / (gb - ga);
        let c = if c > a && c < b { c } else { (a + b) * lit(0.5) };
        let gc = g(c, st)?;
        if gc == T::zero() || (b - a) <= T::epsilon() * lit::<T>(4.0) * b.abs().max(T::one()) {
            return Ok(c);
        }
        if gc < T::zero() {
            a = c;
            ga = gc;
            if side == -1 {
                gb *= lit(0.5);
            }
            side = -1;
        } else {
            b = c;
            gb = gc;
            if side == 1 {
                ga *= lit(0.5);
            }
            side = 1;
        }
        if gc.abs() < T::epsilon() {
            return Ok(c);
        }
    }
    Ok((a + b) * lit(0.5))
}
