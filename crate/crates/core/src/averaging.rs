//! Averaged cross-ratio drift along unperturbed limit cycles.
//!
//! Under a perturbation `eps h(phi_j)` the cross-ratios drift at rate
//! `eps sum_j dLambda_k/dtheta_j h(phi_j)`. Averaging this over the
//! unperturbed cycle `C_lambda` gives `F_h(lambda)`; simple zeros of `F_h`
//! mark leaves whose cycles persist for small `eps`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, WsError};
use crate::mobius::{sine_cross_ratio, splay_lambda, Convention, CrossRatios};
use crate::models::{ModelSpec, PerturbationSpec};
use crate::orbits::{find_limit_cycle, CycleConfig, OrbitRecord};
use crate::scalar::{from_usize, lit, Scalar};
use crate::torus_state::PhaseState;

/// Tolerances used by the averaging layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default, bound = "T: Scalar")]
pub struct AveragingConfig<T: Scalar = f64> {
    pub cycle: CycleConfig<T>,
    /// Largest accepted difference between Simpson rules on `M` and `M/2` intervals.
    pub quad_tol: T,
    /// Bisection width for scalar roots.
    pub root_tol: T,
    /// Half-width of the central difference used for root slopes.
    pub slope_step: T,
}

impl<T: Scalar> Default for AveragingConfig<T> {
    fn default() -> Self {
        AveragingConfig {
            cycle: CycleConfig::default(),
            quad_tol: lit(1e-8),
            root_tol: lit(1e-8),
            slope_step: lit(1e-4),
        }
    }
}

/// Gradient of coordinate `k` (zero-based) with respect to all phases.
///
/// Written as the real part of the complex chain rule
/// `dLambda/dtheta_p = i e^{i theta_p} dLambda/dz_p`, which on the circle
/// reduces to half-angle cotangents.
pub fn cross_ratio_gradient<T: Scalar>(
    k: usize,
    s: &PhaseState<T>,
    convention: Convention,
) -> Result<Vec<T>> {
    let n = s.n_units();
    if k + 3 >= n {
        return Err(WsError::Index(format!(
            "cross-ratio index {} out of range for N = {n}",
            k + 1
        )));
    }
    let (p, q, r, t) = convention.quadruple(k);
    let ph = s.phases();
    let mut grad = vec![T::zero(); n];
    let d = cross_ratio_derivatives(ph[p], ph[q], ph[r], ph[t])?;
    grad[p] = d[0];
    grad[q] = d[1];
    grad[r] = d[2];
    grad[t] = d[3];
    Ok(grad)
}

/// Partial derivatives of the circle cross-ratio in its four angles.
fn cross_ratio_derivatives<T: Scalar>(p: T, q: T, r: T, s: T) -> Result<[T; 4]> {
    let half = lit::<T>(0.5);
    let hcot = |x: T| -> Result<T> {
        let sn = (x * half).sin();
        if sn.abs() < T::epsilon() {
            return Err(WsError::Collision {
                first: 0,
                second: 0,
                separation: x.abs().to_f64().unwrap_or(f64::NAN),
                sep_min: T::epsilon().to_f64().unwrap_or(f64::NAN),
            });
        }
        Ok(half * (x * half).cos() / sn)
    };
    let lam = sine_cross_ratio(p, q, r, s);
    let (ps, qr, qs, pr) = (hcot(p - s)?, hcot(q - r)?, hcot(q - s)?, hcot(p - r)?);
    Ok([
        lam * (ps - pr),
        lam * (qr - qs),
        lam * (pr - qr),
        lam * (qs - ps),
    ])
}

/// Instantaneous drift `sum_j dLambda_k/dtheta_j h(phi_j)` for every `k`,
/// on a lifted tuple. The factor `eps` is not included.
pub fn drift_integrand<T: Scalar>(
    phases: &[T],
    h: &PerturbationSpec<T>,
    convention: Convention,
) -> Result<Vec<T>> {
    let hv: Vec<T> = phases.iter().map(|&p| h.eval(p)).collect();
    (0..phases.len().saturating_sub(3))
        .map(|k| {
            let (p, q, r, t) = convention.quadruple(k);
            let d = cross_ratio_derivatives(phases[p], phases[q], phases[r], phases[t])?;
            Ok(d[0] * hv[p] + d[1] * hv[q] + d[2] * hv[r] + d[3] * hv[t])
        })
        .collect()
}

/// One evaluation of the averaged functional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct AveragedSample<T: Scalar = f64> {
    pub lambda: CrossRatios<T>,
    pub f_h: Vec<T>,
    /// Trapezoid rule on the same nodes, for comparison.
    pub f_h_trapezoid: Vec<T>,
    pub period: T,
    pub quadrature_error_estimate: T,
}

/// Composite Simpson rule over equally spaced values (even number of intervals).
pub fn simpson<T: Scalar>(values: &[T], h: T) -> T {
    let m = values.len() - 1;
    debug_assert!(m.is_multiple_of(2) && m >= 2);
    let mut acc = values[0] + values[m];
    for (i, &v) in values.iter().enumerate().take(m).skip(1) {
        acc += if i % 2 == 1 { lit::<T>(4.0) * v } else { lit::<T>(2.0) * v };
    }
    acc * h / lit(3.0)
}

/// Composite trapezoid rule over equally spaced values.
pub fn trapezoid<T: Scalar>(values: &[T], h: T) -> T {
    let m = values.len() - 1;
    let inner = values[1..m].iter().fold(T::zero(), |a, &v| a + v);
    (inner + (values[0] + values[m]) * lit(0.5)) * h
}

/// Averages the drift of `h` over a sampled cycle, in the convention of `orb.lambda`.
pub fn f_h_on_orbit<T: Scalar>(
    orb: &OrbitRecord<T>,
    h: &PerturbationSpec<T>,
    quad_tol: T,
) -> Result<AveragedSample<T>> {
    let m = orb.n_samples();
    if m < 4 || !m.is_multiple_of(4) {
        return Err(WsError::Domain(
            "sample count must be a multiple of 4 for the error estimate".into(),
        ));
    }
    let convention = orb.lambda.convention();
    let rows = orb
        .phases
        .iter()
        .map(|y| drift_integrand(y, h, convention))
        .collect::<Result<Vec<_>>>()?;
    let dt = orb.period / from_usize::<T>(m);
    let ncoord = rows[0].len();
    let mut fine = Vec::with_capacity(ncoord);
    let mut trap = Vec::with_capacity(ncoord);
    let mut est = T::zero();
    for k in 0..ncoord {
        let col: Vec<T> = rows.iter().map(|r| r[k]).collect();
        let coarse_col: Vec<T> = col.iter().step_by(2).copied().collect();
        let s_fine = simpson(&col, dt) / orb.period;
        let s_coarse = simpson(&coarse_col, dt + dt) / orb.period;
        est = est.max((s_fine - s_coarse).abs());
        fine.push(s_fine);
        trap.push(trapezoid(&col, dt) / orb.period);
    }
    if !(est <= quad_tol) {
        return Err(WsError::Quadrature {
            estimate: est.to_f64().unwrap_or(f64::NAN),
            limit: quad_tol.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(AveragedSample {
        lambda: orb.lambda.clone(),
        f_h: fine,
        f_h_trapezoid: trap,
        period: orb.period,
        quadrature_error_estimate: est,
    })
}

fn require_perturbation<T: Scalar>(model: &ModelSpec<T>) -> Result<&PerturbationSpec<T>> {
    model
        .perturbation()
        .ok_or_else(|| WsError::InvalidModel("averaging needs a perturbation h".into()))
}

/// `F_h(lambda)` for consecutive cross-ratios `lambda`.
pub fn f_h<T: Scalar>(
    model: &ModelSpec<T>,
    lambda: &CrossRatios<T>,
    cfg: &AveragingConfig<T>,
) -> Result<AveragedSample<T>> {
    let h = require_perturbation(model)?;
    if lambda.convention() != Convention::Consecutive {
        return Err(WsError::Domain(
            "averaging uses consecutive cross-ratios".into(),
        ));
    }
    let orb = find_limit_cycle(&model.unperturbed(), lambda, &cfg.cycle)?;
    let mut sample = f_h_on_orbit(&orb, h, cfg.quad_tol)?;
    sample.lambda = lambda.clone();
    Ok(sample)
}

/// `F_h` at the splay leaf with the two structural checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SplayAverage<T: Scalar = f64> {
    pub sample: AveragedSample<T>,
    pub max_abs: T,
    pub spread: T,
    /// Components agree within `1e-7`.
    pub components_equal: bool,
    /// Components vanish within `1e-6`.
    pub vanishes: bool,
}

pub fn f_h_at_splay<T: Scalar>(
    model: &ModelSpec<T>,
    cfg: &AveragingConfig<T>,
) -> Result<SplayAverage<T>> {
    let lambda = splay_lambda(model.n_units(), Convention::Consecutive)?;
    let sample = f_h(model, &lambda, cfg)?;
    let max_abs = sample.f_h.iter().fold(T::zero(), |a, v| a.max(v.abs()));
    let hi = sample.f_h.iter().fold(T::neg_infinity(), |a, &v| a.max(v));
    let lo = sample.f_h.iter().fold(T::infinity(), |a, &v| a.min(v));
    let spread = hi - lo;
    Ok(SplayAverage {
        components_equal: spread < lit(1e-7),
        vanishes: max_abs < lit(1e-6),
        sample,
        max_abs,
        spread,
    })
}

/// Result of one grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ScanPoint<T: Scalar = f64> {
    pub lambda: Vec<T>,
    pub f_h: Option<Vec<T>>,
    pub period: Option<T>,
    /// `"ok"` or an error tag.
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

impl<T: Scalar> ScanPoint<T> {
    fn from_result(lambda: &CrossRatios<T>, r: Result<AveragedSample<T>>) -> Self {
        match r {
            Ok(s) => ScanPoint {
                lambda: lambda.values().to_vec(),
                f_h: Some(s.f_h),
                period: Some(s.period),
                status: "ok".into(),
                message: None,
            },
            Err(e) => ScanPoint {
                lambda: lambda.values().to_vec(),
                f_h: None,
                period: None,
                status: e.kind().into(),
                message: Some(e.to_string()),
            },
        }
    }

    pub fn is_ok(&self) -> bool {
        self.f_h.is_some()
    }
}

/// Evaluates `F_h` at every grid point; runs on the current rayon pool and
/// returns results in grid order.
pub fn scan_fh<T: Scalar>(
    model: &ModelSpec<T>,
    grid: &[CrossRatios<T>],
    cfg: &AveragingConfig<T>,
) -> Vec<ScanPoint<T>> {
    grid.par_iter()
        .map(|lam| ScanPoint::from_result(lam, f_h(model, lam, cfg)))
        .collect()
}

/// `n` equally spaced points on `[lo, hi]`.
pub fn uniform_grid<T: Scalar>(lo: T, hi: T, n: usize) -> Vec<T> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n)
            .map(|i| lo + (hi - lo) * from_usize::<T>(i) / from_usize::<T>(n - 1))
            .collect(),
    }
}

/// 101 points on `[0.02, 0.98]`.
pub fn default_grid<T: Scalar>() -> Vec<T> {
    uniform_grid(lit(0.02), lit(0.98), 101)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Root<T: Scalar = f64> {
    pub lambda: T,
    /// `F_h` at the returned root.
    pub value: T,
    /// Central-difference estimate of `dF_h/dlambda`.
    pub slope: T,
    /// Hyperbolic attractor of `lambda' = eps F_h` for `eps > 0`.
    pub stable_for_positive_eps: bool,
    pub stable_for_negative_eps: bool,
    /// Verdict for the sign of `eps` in the model; `None` when `eps = 0`.
    pub stable: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct EndpointLimits<T: Scalar = f64> {
    pub lambda_low: T,
    pub f_low: Option<T>,
    pub lambda_high: T,
    pub f_high: Option<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct RootReport<T: Scalar = f64> {
    pub points: Vec<ScanPoint<T>>,
    pub roots: Vec<Root<T>>,
    pub endpoints: Option<EndpointLimits<T>>,
    pub converged: usize,
    pub failed: usize,
}

/// Scans `F_h` on a scalar grid for `N = 4`, then bisects every sign change
/// and classifies each root by the slope of `F_h`.
pub fn scan_and_root<T: Scalar>(
    model: &ModelSpec<T>,
    grid: &[T],
    cfg: &AveragingConfig<T>,
) -> Result<RootReport<T>> {
    if model.n_units() != 4 {
        return Err(WsError::InvalidModel(
            "root bracketing needs the scalar case N = 4".into(),
        ));
    }
    require_perturbation(model)?;
    let leaves = grid
        .iter()
        .map(|&l| CrossRatios::consecutive(vec![l]))
        .collect::<Result<Vec<_>>>()?;
    let points = scan_fh(model, &leaves, cfg);
    let value = |p: &ScanPoint<T>| p.f_h.as_ref().map(|v| v[0]);

    let mut brackets = Vec::new();
    let mut exact = Vec::new();
    let ok: Vec<(T, T)> = points
        .iter()
        .filter_map(|p| value(p).map(|v| (p.lambda[0], v)))
        .collect();
    for (i, &(l, v)) in ok.iter().enumerate() {
        if v == T::zero() {
            exact.push(l);
        }
        if let Some(&(l2, v2)) = ok.get(i + 1) {
            if v != T::zero() && v2 != T::zero() && (v < T::zero()) != (v2 < T::zero()) {
                brackets.push((l, v, l2, v2));
            }
        }
    }
    let eps = model.epsilon();
    let mut roots: Vec<Root<T>> = brackets
        .par_iter()
        .map(|&(a, fa, b, fb)| bisect_root(model, a, fa, b, fb, cfg))
        .chain(exact.par_iter().map(|&l| classify_root(model, l, T::zero(), cfg)))
        .collect::<Result<Vec<_>>>()?;
    roots.sort_by(|x, y| x.lambda.partial_cmp(&y.lambda).expect("finite roots"));
    for r in &mut roots {
        r.stable = if eps == T::zero() {
            None
        } else if eps > T::zero() {
            Some(r.stable_for_positive_eps)
        } else {
            Some(r.stable_for_negative_eps)
        };
    }
    let endpoints = match (points.first(), points.last()) {
        (Some(lo), Some(hi)) => Some(EndpointLimits {
            lambda_low: lo.lambda[0],
            f_low: value(lo),
            lambda_high: hi.lambda[0],
            f_high: value(hi),
        }),
        _ => None,
    };
    let converged = points.iter().filter(|p| p.is_ok()).count();
    let failed = points.len() - converged;
    Ok(RootReport {
        points,
        roots,
        endpoints,
        converged,
        failed,
    })
}

fn scalar_f<T: Scalar>(model: &ModelSpec<T>, l: T, cfg: &AveragingConfig<T>) -> Result<T> {
    Ok(f_h(model, &CrossRatios::consecutive(vec![l])?, cfg)?.f_h[0])
}

fn bisect_root<T: Scalar>(
    model: &ModelSpec<T>,
    mut a: T,
    fa: T,
    mut b: T,
    _fb: T,
    cfg: &AveragingConfig<T>,
) -> Result<Root<T>> {
    let neg_a = fa < T::zero();
    let mut best = (a, fa);
    while b - a > cfg.root_tol {
        let mid = (a + b) * lit(0.5);
        let fm = scalar_f(model, mid, cfg)?;
        best = (mid, fm);
        if fm == T::zero() {
            break;
        }
        if (fm < T::zero()) == neg_a {
            a = mid;
        } else {
            b = mid;
        }
    }
    classify_root(model, best.0, best.1, cfg)
}

fn classify_root<T: Scalar>(
    model: &ModelSpec<T>,
    l: T,
    value: T,
    cfg: &AveragingConfig<T>,
) -> Result<Root<T>> {
    let d = cfg.slope_step.min(l * lit(0.5)).min((T::one() - l) * lit(0.5));
    let fp = scalar_f(model, l + d, cfg)?;
    let fm = scalar_f(model, l - d, cfg)?;
    let slope = (fp - fm) / (d + d);
    Ok(Root {
        lambda: l,
        value,
        slope,
        stable_for_positive_eps: slope < T::zero(),
        stable_for_negative_eps: slope > T::zero(),
        stable: None,
    })
}

/// Cross-ratio drift of the perturbed model measured by direct simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct MeasuredDrift<T: Scalar = f64> {
    pub lambda: CrossRatios<T>,
    /// `(Lambda(t0 + K T) - lambda) / (K T)` per coordinate.
    pub rate: Vec<T>,
    pub period: T,
    pub periods: usize,
}

/// Starts the perturbed model on the unperturbed cycle `C_lambda` and
/// measures the mean cross-ratio drift over `periods` unperturbed periods.
pub fn measured_drift<T: Scalar>(
    model: &ModelSpec<T>,
    lambda: &CrossRatios<T>,
    periods: usize,
    cfg: &AveragingConfig<T>,
) -> Result<MeasuredDrift<T>> {
    require_perturbation(model)?;
    if periods == 0 {
        return Err(WsError::Domain("need at least one period".into()));
    }
    let orb = find_limit_cycle(&model.unperturbed(), lambda, &cfg.cycle)?;
    let start = orb.state(0)?;
    let span = orb.period * from_usize::<T>(periods);
    let end = crate::orbits::integrate_at(model, &start, &[T::zero(), span], &cfg.cycle.integrator)?;
    let last = end.state(1)?;
    let after = crate::mobius::cross_ratios(&last, lambda.convention())?;
    let rate = after
        .values()
        .iter()
        .zip(orb.lambda.values())
        .map(|(&a, &b)| (a - b) / span)
        .collect();
    Ok(MeasuredDrift {
        lambda: orb.lambda.clone(),
        rate,
        period: orb.period,
        periods,
    })
}

/// Number of strict sign changes in a sequence, ignoring exact zeros.
pub fn sign_changes<T: Scalar>(values: &[T]) -> usize {
    let signs: Vec<bool> = values
        .iter()
        .filter(|v| **v != T::zero())
        .map(|v| *v > T::zero())
        .collect();
    signs.windows(2).filter(|w| w[0] != w[1]).count()
}
