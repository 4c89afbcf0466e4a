//! Reduced dynamics in Watanabe-Strogatz coordinates.
//!
//! For an unperturbed mean-field model the cross-ratios are conserved and the
//! group parameters obey
//! `alpha' = i(f alpha^2 + g alpha + conj f)`, `psi' = f alpha + g + conj(f alpha)`,
//! with `f, g` evaluated at the order parameter `Z(alpha, psi, lambda)`.
//! Replacing `Z` by `alpha` gives the closed truncated system.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Result, WsError};
use crate::mobius::{reference_point, CrossRatios, WsCoordinates};
use crate::models::ModelSpec;
use crate::scalar::{from_usize, lit, Scalar};

/// Upper bound on the number of series terms.
pub const MAX_SERIES_TERMS: usize = 1_000_000;

/// Default truncation tolerance for the order-parameter series.
pub const DEFAULT_SERIES_TOL: f64 = 1e-14;

/// Width of the band around `kappa^2 = 1 - omega^2` treated as degenerate.
pub const BOUNDARY_TOL: f64 = 1e-12;

/// State of the reduced system, the same data as the chart coordinates.
pub type WsState<T = f64> = WsCoordinates<T>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct WsDerivative<T: Scalar = f64> {
    pub alpha_dot: Complex<T>,
    pub psi_dot: T,
    pub lambda_dot: Vec<T>,
}

/// Order parameter of `chart(alpha, psi, lambda)` from the power-mean series.
pub fn z_series<T: Scalar>(
    alpha: Complex<T>,
    psi: T,
    lambda: &CrossRatios<T>,
    tol: T,
) -> Result<Complex<T>> {
    let theta = reference_point(lambda)?;
    let base: Vec<Complex<T>> = theta.unit_points();
    let n = from_usize::<T>(base.len());
    let r = alpha.norm();
    let one_minus = T::one() - r * r;
    let rot = Complex::cis(psi);
    let q = -alpha.conj() * rot;
    let mut powers = base.clone();
    let mut qk = Complex::new(T::one(), T::zero());
    let mut acc = Complex::new(T::zero(), T::zero());
    // geometric tail bound (1 - r^2) r^k / (1 - r)
    let mut bound = T::one() + r;
    for k in 1..=MAX_SERIES_TERMS {
        if bound < tol {
            return Ok(alpha + rot * acc * one_minus);
        }
        let mean = powers
            .iter()
            .fold(Complex::new(T::zero(), T::zero()), |a, &p| a + p)
            / n;
        acc += qk * mean;
        qk *= q;
        bound *= r;
        if k % 64 == 0 {
            // keep the running powers on the unit circle
            for (p, &b) in powers.iter_mut().zip(&base) {
                *p = (*p * b).unscale(p.norm());
            }
        } else {
            for (p, &b) in powers.iter_mut().zip(&base) {
                *p *= b;
            }
        }
    }
    Err(WsError::Convergence {
        tol: tol.to_f64().unwrap_or(f64::NAN),
        terms: MAX_SERIES_TERMS,
    })
}

/// Closed form on the splay leaf:
/// `Z = alpha - (1 - |alpha|^2) sum_k conj(alpha)^{kN-1} e^{ikN psi}`.
pub fn z_series_splay<T: Scalar>(alpha: Complex<T>, psi: T, n: usize, tol: T) -> Result<Complex<T>> {
    let r = alpha.norm();
    let one_minus = T::one() - r * r;
    let nn = i32::try_from(n).map_err(|_| WsError::Domain("too many units".into()))?;
    let step = alpha.conj().powi(nn) * Complex::cis(psi * from_usize::<T>(n));
    let mut term = alpha.conj().powi(nn - 1) * Complex::cis(psi * from_usize::<T>(n));
    let mut bound = one_minus * r.powi(nn - 1) / (T::one() - r.powi(nn));
    let mut acc = Complex::new(T::zero(), T::zero());
    for _ in 0..MAX_SERIES_TERMS {
        if bound < tol {
            return Ok(alpha - acc * one_minus);
        }
        acc += term;
        term *= step;
        bound *= r.powi(nn);
    }
    Err(WsError::Convergence {
        tol: tol.to_f64().unwrap_or(f64::NAN),
        terms: MAX_SERIES_TERMS,
    })
}

/// Group-parameter equations `(alpha', psi', lambda')` for an unperturbed model.
pub fn ws_rhs<T: Scalar>(model: &ModelSpec<T>, w: &WsState<T>, tol: T) -> Result<WsDerivative<T>> {
    if model.epsilon() != T::zero() {
        return Err(WsError::InvalidModel(
            "reduced equations hold only without perturbation".into(),
        ));
    }
    if w.lambda.n_units() != model.n_units() {
        return Err(WsError::InvalidModel(format!(
            "state has {} units, model expects {}",
            w.lambda.n_units(),
            model.n_units()
        )));
    }
    let alpha = w.mobius.alpha();
    let z = z_series(alpha, w.mobius.psi(), &w.lambda, tol)?;
    let (alpha_dot, psi_dot) = group_velocity(model, alpha, z);
    Ok(WsDerivative {
        alpha_dot,
        psi_dot,
        lambda_dot: vec![T::zero(); w.lambda.values().len()],
    })
}

/// `(alpha', psi')` with the fields evaluated at a given `Z`.
pub fn group_velocity<T: Scalar>(model: &ModelSpec<T>, alpha: Complex<T>, z: Complex<T>) -> (Complex<T>, T) {
    let (f, g) = model.fields(z);
    let i = Complex::new(T::zero(), T::one());
    let alpha_dot = i * (f * alpha * alpha + alpha * g + f.conj());
    let psi_dot = g + lit::<T>(2.0) * (f * alpha).re;
    (alpha_dot, psi_dot)
}

/// Truncated rotator flow
/// `alpha' = -(1 + kappa conj(alpha)) alpha^2 / 2 + i omega alpha + (1 + kappa alpha) / 2`.
pub fn truncated_rhs<T: Scalar>(model: &ModelSpec<T>, alpha: Complex<T>) -> Result<Complex<T>> {
    let (omega, kappa) = model
        .rotator_params()
        .ok_or_else(|| WsError::InvalidModel("truncated system needs a rotator model".into()))?;
    Ok(truncated_rotator(omega, kappa, alpha))
}

pub fn truncated_rotator<T: Scalar>(omega: T, kappa: T, alpha: Complex<T>) -> Complex<T> {
    let half = lit::<T>(0.5);
    let one = Complex::new(T::one(), T::zero());
    -(one + alpha.conj() * kappa) * alpha * alpha * half
        + Complex::new(T::zero(), omega) * alpha
        + (one + alpha * kappa) * half
}

/// Real Jacobian of the truncated flow in `(Re alpha, Im alpha)`.
pub fn truncated_jacobian<T: Scalar>(omega: T, kappa: T, alpha: Complex<T>) -> [[T; 2]; 2] {
    let half = lit::<T>(0.5);
    let a = -alpha - alpha * alpha.conj() * kappa
        + Complex::new(kappa * half, omega);
    let b = -alpha * alpha * kappa * half;
    let dx = a + b;
    let dy = Complex::new(T::zero(), T::one()) * (a - b);
    [[dx.re, dy.re], [dx.im, dy.im]]
}

/// Eigenvalues of a real 2x2 matrix, larger real part first.
pub fn eigen2<T: Scalar>(m: [[T; 2]; 2]) -> [Complex<T>; 2] {
    let half = lit::<T>(0.5);
    let tr = m[0][0] + m[1][1];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let disc = tr * tr * half * half - det;
    let mid = Complex::new(tr * half, T::zero());
    let root = Complex::new(disc, T::zero()).sqrt();
    [mid + root, mid - root]
}

/// Fixed point of the truncated rotator flow with its linearization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct TruncatedFixedPoint<T: Scalar = f64> {
    /// `|alpha_0|^2`, the root of the cubic in `(0, 1)`.
    pub x: T,
    pub r: T,
    pub beta: T,
    pub alpha0: Complex<T>,
    /// `psi'` at the fixed point.
    pub omega_rot: T,
    pub eig: [Complex<T>; 2],
}

/// `kappa^2 x^3 + (2 kappa^2 - 1) x^2 + (kappa^2 + 4 omega^2 - 2) x - 1`.
pub fn fixed_point_cubic<T: Scalar>(omega: T, kappa: T, x: T) -> T {
    let k2 = kappa * kappa;
    let two = lit::<T>(2.0);
    ((k2 * x + two * k2 - T::one()) * x + k2 + lit::<T>(4.0) * omega * omega - two) * x - T::one()
}

fn cubic_derivative<T: Scalar>(omega: T, kappa: T, x: T) -> T {
    let k2 = kappa * kappa;
    let two = lit::<T>(2.0);
    (lit::<T>(3.0) * k2 * x + two * (two * k2 - T::one())) * x + k2 + lit::<T>(4.0) * omega * omega
        - two
}

/// Root of the cubic in `(0, 1)` by bisection then safeguarded Newton.
pub fn solve_cubic<T: Scalar>(omega: T, kappa: T) -> Result<T> {
    let p = |x| fixed_point_cubic(omega, kappa, x);
    let (mut lo, mut hi) = (T::zero(), T::one());
    if !(p(lo) < T::zero() && p(hi) > T::zero()) {
        return Err(WsError::Numerical("cubic has no sign change on (0, 1)".into()));
    }
    for _ in 0..40 {
        let mid = (lo + hi) * lit(0.5);
        if p(mid) > T::zero() {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let mut x = (lo + hi) * lit(0.5);
    let target = lit::<T>(1e-13).max(T::epsilon() * lit(16.0));
    for _ in 0..50 {
        let v = p(x);
        if v.abs() < target {
            break;
        }
        if v > T::zero() {
            hi = x;
        } else {
            lo = x;
        }
        let step = v / cubic_derivative(omega, kappa, x);
        let next = x - step;
        x = if next > lo && next < hi {
            next
        } else {
            (lo + hi) * lit(0.5)
        };
        if step.abs() <= T::epsilon() * x {
            break;
        }
    }
    Ok(x)
}

/// Fixed point, rotation frequency and eigenvalues of the truncated flow.
pub fn fixed_point<T: Scalar>(omega: T, kappa: T) -> Result<TruncatedFixedPoint<T>> {
    if !omega.is_finite() || !kappa.is_finite() {
        return Err(WsError::Domain("non-finite parameters".into()));
    }
    if omega.abs() >= T::one() {
        return Err(WsError::Domain(format!("|omega| = {} must be below 1", omega.abs())));
    }
    let k2 = kappa * kappa;
    let threshold = T::one() - omega * omega;
    let report = |v: T| v.to_f64().unwrap_or(f64::NAN);
    if (k2 - threshold).abs() <= lit(BOUNDARY_TOL) {
        return Err(WsError::Boundary {
            kappa_sq: report(k2),
            threshold: report(threshold),
        });
    }
    if k2 < threshold {
        return Err(WsError::NoFixedPoint {
            kappa_sq: report(k2),
            threshold: report(threshold),
        });
    }
    let x = solve_cubic(omega, kappa)?;
    let two = lit::<T>(2.0);
    let alpha0 = Complex::new(-kappa * x, two * omega * x / (T::one() + x));
    Ok(TruncatedFixedPoint {
        x,
        r: x.sqrt(),
        beta: alpha0.arg(),
        alpha0,
        omega_rot: rotation_frequency(omega, x),
        eig: eigenvalues(omega, kappa, x),
    })
}

/// Smallest `|Omega|` treated as a rotating fixed point.
pub const MIN_ROTATION: f64 = 1e-6;

impl<T: Scalar> TruncatedFixedPoint<T> {
    /// Fails with [`WsError::FrequencyBelowThreshold`] when `|Omega| < MIN_ROTATION`,
    /// where the truncated manifold degenerates into a continuum of fixed points.
    pub fn check_rotation(&self) -> Result<()> {
        let rate = self.omega_rot.abs().to_f64().unwrap_or(f64::NAN);
        if rate < MIN_ROTATION {
            return Err(WsError::FrequencyBelowThreshold {
                rate,
                threshold: MIN_ROTATION,
            });
        }
        Ok(())
    }
}

/// `Omega = omega (1 - x) / (1 + x)`.
pub fn rotation_frequency<T: Scalar>(omega: T, x: T) -> T {
    omega * (T::one() - x) / (T::one() + x)
}

/// `kappa/2 +- sqrt(kappa^2 x^2 / 4 - Omega^2)`, larger real part first.
pub fn eigenvalues<T: Scalar>(omega: T, kappa: T, x: T) -> [Complex<T>; 2] {
    let half = lit::<T>(0.5);
    let big = rotation_frequency(omega, x);
    let disc = kappa * kappa * x * x * half * half - big * big;
    let root = Complex::new(disc, T::zero()).sqrt();
    let mid = Complex::new(kappa * half, T::zero());
    [mid + root, mid - root]
}
