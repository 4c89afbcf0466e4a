//! Disk automorphisms, cross-ratios and the Watanabe-Strogatz chart.
//!
//! The chart sends `(alpha, psi, lambda)` to the ordered configuration
//! `G_{alpha,psi}(Theta(lambda))`, where `Theta` is a fixed reference point on
//! the leaf of constant cross-ratios `lambda`.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Result, WsError};
use crate::scalar::{from_usize, lit, rem_turn, wrap_angle, Scalar};
use crate::torus_state::{PhaseState, MIN_UNITS};

/// Largest admissible `|alpha|`, as a gap below the unit circle.
pub const DISK_MARGIN: f64 = 1e-14;

fn disk_margin<T: Scalar>() -> T {
    lit::<T>(DISK_MARGIN).max(T::epsilon() * lit(4.0))
}

/// A general 2x2 complex matrix acting by linear fractional maps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2<T: Scalar> {
    pub a: Complex<T>,
    pub b: Complex<T>,
    pub c: Complex<T>,
    pub d: Complex<T>,
}

impl<T: Scalar> Mat2<T> {
    pub fn apply(&self, z: Complex<T>) -> Complex<T> {
        (self.a * z + self.b) / (self.c * z + self.d)
    }

    /// Matrix of `self o other`.
    pub fn compose(&self, other: &Mat2<T>) -> Mat2<T> {
        Mat2 {
            a: self.a * other.a + self.b * other.c,
            b: self.a * other.b + self.b * other.d,
            c: self.c * other.a + self.d * other.c,
            d: self.c * other.b + self.d * other.d,
        }
    }

    pub fn inverse(&self) -> Mat2<T> {
        Mat2 {
            a: self.d,
            b: -self.b,
            c: -self.c,
            d: self.a,
        }
    }

    pub fn det(&self) -> Complex<T> {
        self.a * self.d - self.b * self.c
    }

    /// Map taking `z1, z2, z3` to `0, inf, 1`:
    /// `mu(z) = (z - z1)(z2 - z3) / ((z - z2)(z1 - z3))`.
    pub fn three_point(z1: Complex<T>, z2: Complex<T>, z3: Complex<T>) -> Mat2<T> {
        let u = z2 - z3;
        let v = z1 - z3;
        Mat2 {
            a: u,
            b: -z1 * u,
            c: v,
            d: -z2 * v,
        }
    }

    /// Reads off `(alpha, psi)` assuming the matrix represents a disk automorphism:
    /// `alpha = G(0)` and `e^{i psi} = G'(0) / (1 - |alpha|^2)`.
    pub fn to_disk_params(&self) -> Result<MobiusParams<T>> {
        if self.d.norm() == T::zero() || !self.d.norm().is_finite() {
            return Err(WsError::Numerical("map sends 0 to infinity".into()));
        }
        let alpha = self.b / self.d;
        let r2 = alpha.norm_sqr();
        if !(r2 < T::one()) {
            return Err(WsError::Numerical(format!(
                "|alpha| = {} is not inside the disk",
                r2.sqrt()
            )));
        }
        let deriv = self.det() / (self.d * self.d);
        let rot = deriv / (T::one() - r2);
        if rot.norm() == T::zero() || !rot.norm().is_finite() {
            return Err(WsError::Numerical("degenerate rotation factor".into()));
        }
        MobiusParams::new(alpha, rot.arg())
    }
}

/// Parameters of `G(z) = (alpha + e^{i psi} z) / (1 + conj(alpha) e^{i psi} z)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MobiusRepr<T>", into = "MobiusRepr<T>", bound = "T: Scalar")]
pub struct MobiusParams<T: Scalar = f64> {
    alpha: Complex<T>,
    psi: T,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Scalar")]
struct MobiusRepr<T: Scalar> {
    alpha_re: T,
    alpha_im: T,
    psi: T,
}

impl<T: Scalar> TryFrom<MobiusRepr<T>> for MobiusParams<T> {
    type Error = WsError;

    fn try_from(r: MobiusRepr<T>) -> Result<Self> {
        MobiusParams::new(Complex::new(r.alpha_re, r.alpha_im), r.psi)
    }
}

impl<T: Scalar> From<MobiusParams<T>> for MobiusRepr<T> {
    fn from(g: MobiusParams<T>) -> Self {
        MobiusRepr {
            alpha_re: g.alpha.re,
            alpha_im: g.alpha.im,
            psi: g.psi,
        }
    }
}

impl<T: Scalar> MobiusParams<T> {
    /// Validates `|alpha| < 1` and wraps `psi` into `(-pi, pi]`.
    pub fn new(alpha: Complex<T>, psi: T) -> Result<Self> {
        if !alpha.re.is_finite() || !alpha.im.is_finite() || !psi.is_finite() {
            return Err(WsError::Domain("non-finite Moebius parameter".into()));
        }
        if alpha.norm() >= T::one() - disk_margin::<T>() {
            return Err(WsError::Domain(format!(
                "|alpha| = {} must stay below 1",
                alpha.norm()
            )));
        }
        Ok(MobiusParams {
            alpha,
            psi: wrap_angle(psi),
        })
    }

    pub fn identity() -> Self {
        MobiusParams {
            alpha: Complex::new(T::zero(), T::zero()),
            psi: T::zero(),
        }
    }

    pub fn rotation(psi: T) -> Self {
        MobiusParams {
            alpha: Complex::new(T::zero(), T::zero()),
            psi: wrap_angle(psi),
        }
    }

    pub fn alpha(&self) -> Complex<T> {
        self.alpha
    }

    pub fn psi(&self) -> T {
        self.psi
    }

    pub fn matrix(&self) -> Mat2<T> {
        let rot = Complex::cis(self.psi);
        Mat2 {
            a: rot,
            b: self.alpha,
            c: self.alpha.conj() * rot,
            d: Complex::new(T::one(), T::zero()),
        }
    }

    pub fn apply(&self, z: Complex<T>) -> Complex<T> {
        let w = Complex::cis(self.psi) * z;
        (self.alpha + w) / (Complex::new(T::one(), T::zero()) + self.alpha.conj() * w)
    }

    /// Action on an angle: `arg G(e^{i theta})`, in `(-pi, pi]`.
    pub fn apply_angle(&self, theta: T) -> T {
        self.apply(Complex::cis(theta)).arg()
    }

    /// `self o other`.
    pub fn compose(&self, other: &MobiusParams<T>) -> Result<MobiusParams<T>> {
        self.matrix().compose(&other.matrix()).to_disk_params()
    }

    pub fn inverse(&self) -> MobiusParams<T> {
        MobiusParams {
            alpha: -self.alpha * Complex::cis(-self.psi),
            psi: wrap_angle(-self.psi),
        }
    }
}

/// Applies `G` to every unit of `s`. Orientation preservation keeps the
/// labels in cyclic order; the result is re-canonicalized.
pub fn apply_diag<T: Scalar>(g: &MobiusParams<T>, s: &PhaseState<T>) -> Result<PhaseState<T>> {
    let raw: Vec<T> = s.phases().iter().map(|&p| g.apply_angle(p)).collect();
    PhaseState::canonicalize(&raw)
}

/// Which quadruples define the cross-ratio coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Convention {
    /// `Lambda_{1,2,3,k+3}`.
    Canonical,
    /// `Lambda_{k,k+1,k+2,k+3}`.
    Consecutive,
}

impl Convention {
    /// Zero-based indices `(p, q, r, s)` of the quadruple for coordinate `k`.
    pub fn quadruple(self, k: usize) -> (usize, usize, usize, usize) {
        match self {
            Convention::Canonical => (0, 1, 2, k + 3),
            Convention::Consecutive => (k, k + 1, k + 2, k + 3),
        }
    }
}

/// The `N - 3` cross-ratio coordinates of a leaf, tagged by convention.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CrossRatiosRepr<T>", into = "CrossRatiosRepr<T>", bound = "T: Scalar")]
pub struct CrossRatios<T: Scalar = f64> {
    convention: Convention,
    values: Vec<T>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Scalar")]
struct CrossRatiosRepr<T: Scalar> {
    convention: Convention,
    values: Vec<T>,
}

impl<T: Scalar> TryFrom<CrossRatiosRepr<T>> for CrossRatios<T> {
    type Error = WsError;

    fn try_from(r: CrossRatiosRepr<T>) -> Result<Self> {
        CrossRatios::new(r.convention, r.values)
    }
}

impl<T: Scalar> From<CrossRatios<T>> for CrossRatiosRepr<T> {
    fn from(c: CrossRatios<T>) -> Self {
        CrossRatiosRepr {
            convention: c.convention,
            values: c.values,
        }
    }
}

impl<T: Scalar> CrossRatios<T> {
    /// Canonical values must decrease strictly inside `(0, 1)`;
    /// consecutive values must each lie in `(0, 1)`.
    pub fn new(convention: Convention, values: Vec<T>) -> Result<Self> {
        if values.is_empty() {
            return Err(WsError::Domain("need at least one cross-ratio".into()));
        }
        for (k, &v) in values.iter().enumerate() {
            if !(v > T::zero() && v < T::one()) {
                return Err(WsError::Domain(format!(
                    "cross-ratio {} = {v} is outside (0, 1)",
                    k + 1
                )));
            }
        }
        if convention == Convention::Canonical {
            if let Some(k) = values.windows(2).position(|w| !(w[1] < w[0])) {
                return Err(WsError::Domain(format!(
                    "canonical cross-ratios must decrease strictly (index {})",
                    k + 2
                )));
            }
        }
        Ok(CrossRatios { convention, values })
    }

    pub fn canonical(values: Vec<T>) -> Result<Self> {
        Self::new(Convention::Canonical, values)
    }

    pub fn consecutive(values: Vec<T>) -> Result<Self> {
        Self::new(Convention::Consecutive, values)
    }

    pub fn convention(&self) -> Convention {
        self.convention
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn n_units(&self) -> usize {
        self.values.len() + 3
    }

    /// The same leaf expressed in the other convention.
    pub fn convert(&self, to: Convention) -> Result<CrossRatios<T>> {
        if to == self.convention {
            return Ok(self.clone());
        }
        cross_ratios(&leaf_point(self)?, to)
    }
}

/// Cross-ratio of four distinct units (zero-based indices)
/// `(z_p - z_s)(z_q - z_r) / ((z_q - z_s)(z_p - z_r))`.
///
/// On the circle it is real and equals the half-angle sine product used here.
pub fn cross_ratio<T: Scalar>(
    s: &PhaseState<T>,
    p: usize,
    q: usize,
    r: usize,
    t: usize,
) -> Result<T> {
    let n = s.n_units();
    let idx = [p, q, r, t];
    if let Some(&bad) = idx.iter().find(|&&i| i >= n) {
        return Err(WsError::Index(format!("index {bad} out of range for N = {n}")));
    }
    for i in 0..4 {
        for j in i + 1..4 {
            if idx[i] == idx[j] {
                return Err(WsError::Index(format!("repeated index {}", idx[i])));
            }
        }
    }
    let ph = s.phases();
    Ok(sine_cross_ratio(ph[p], ph[q], ph[r], ph[t]))
}

#[inline]
pub(crate) fn sine_cross_ratio<T: Scalar>(p: T, q: T, r: T, s: T) -> T {
    let half = lit::<T>(0.5);
    let num = ((p - s) * half).sin() * ((q - r) * half).sin();
    let den = ((q - s) * half).sin() * ((p - r) * half).sin();
    num / den
}

/// Complex form of the cross-ratio, for arbitrary points of the plane.
pub fn cross_ratio_complex<T: Scalar>(
    zp: Complex<T>,
    zq: Complex<T>,
    zr: Complex<T>,
    zs: Complex<T>,
) -> Complex<T> {
    (zp - zs) * (zq - zr) / ((zq - zs) * (zp - zr))
}

/// All `N - 3` cross-ratios of `s` in the requested convention.
pub fn cross_ratios<T: Scalar>(s: &PhaseState<T>, convention: Convention) -> Result<CrossRatios<T>> {
    let ph = s.phases();
    let values = (0..s.n_units() - 3)
        .map(|k| {
            let (p, q, r, t) = convention.quadruple(k);
            sine_cross_ratio(ph[p], ph[q], ph[r], ph[t])
        })
        .collect();
    CrossRatios::new(convention, values).map_err(|e| {
        WsError::Numerical(format!("cross-ratios of a valid state left the leaf domain: {e}"))
    })
}

/// Cross-ratios of the splay state, in closed form.
pub fn splay_lambda<T: Scalar>(n: usize, convention: Convention) -> Result<CrossRatios<T>> {
    if n < MIN_UNITS {
        return Err(WsError::Domain(format!("need at least {MIN_UNITS} units, got {n}")));
    }
    let nn = from_usize::<T>(n);
    let pi = T::PI();
    let lam = |k: usize| -> T {
        let k = from_usize::<T>(k);
        (pi * (k + lit(2.0)) / nn).sin()
            / (lit::<T>(2.0) * (pi / nn).cos() * (pi * (k + T::one()) / nn).sin())
    };
    let values = match convention {
        Convention::Canonical => (1..=n - 3).map(lam).collect(),
        Convention::Consecutive => vec![lam(1); n - 3],
    };
    CrossRatios::new(convention, values)
}

fn first_three<T: Scalar>(n: usize) -> [T; 3] {
    let step = T::TAU() / from_usize::<T>(n);
    [-T::PI(), -T::PI() + step, -T::PI() + step + step]
}

/// Lifts `angle` to the first representative strictly above `floor`.
fn lift_above<T: Scalar>(angle: T, floor: T) -> T {
    floor + rem_turn(angle - floor)
}

/// The reference point `Theta(lambda)` for canonical cross-ratios.
pub fn reference_point<T: Scalar>(lambda: &CrossRatios<T>) -> Result<PhaseState<T>> {
    if lambda.convention() != Convention::Canonical {
        return Err(WsError::Domain(
            "reference point is defined on canonical cross-ratios".into(),
        ));
    }
    let n = lambda.n_units();
    let zeta = Complex::cis(T::TAU() / from_usize::<T>(n));
    let one = Complex::new(T::one(), T::zero());
    let mut phases: Vec<T> = first_three::<T>(n).to_vec();
    for &l in lambda.values() {
        let lc = Complex::new(l, T::zero());
        let w = zeta * (lc + lc * zeta - one) / (-lc + (one - lc) * zeta);
        let prev = *phases.last().expect("three seed phases");
        phases.push(lift_above(w.arg(), prev));
    }
    PhaseState::canonicalize(&phases)
}

/// A point on the leaf of consecutive cross-ratios `lambda`, with the first
/// three units at the reference positions. Each further unit solves
/// `Lambda_{k,k+1,k+2,k+3} = lambda_k` given the three before it.
pub fn consecutive_point<T: Scalar>(lambda: &CrossRatios<T>) -> Result<PhaseState<T>> {
    if lambda.convention() != Convention::Consecutive {
        return Err(WsError::Domain("expected consecutive cross-ratios".into()));
    }
    let n = lambda.n_units();
    let mut phases: Vec<T> = first_three::<T>(n).to_vec();
    for (k, &l) in lambda.values().iter().enumerate() {
        let (zp, zq, zr) = (
            Complex::cis(phases[k]),
            Complex::cis(phases[k + 1]),
            Complex::cis(phases[k + 2]),
        );
        let lc = Complex::new(l, T::zero());
        let num = lc * zq * (zp - zr) - zp * (zq - zr);
        let den = lc * (zp - zr) - (zq - zr);
        let z = num / den;
        let theta = lift_above(z.arg(), phases[k + 2]);
        // the new unit must close before unit 1 completes a turn
        if theta >= phases[0] + T::TAU() {
            return Err(WsError::Domain(format!(
                "consecutive cross-ratios do not describe an ordered configuration (unit {})",
                k + 4
            )));
        }
        phases.push(theta);
    }
    PhaseState::canonicalize(&phases)
        .map_err(|e| WsError::Domain(format!("consecutive cross-ratios out of range: {e}")))
}

/// A representative point on the leaf `lambda`, in either convention.
pub fn leaf_point<T: Scalar>(lambda: &CrossRatios<T>) -> Result<PhaseState<T>> {
    match lambda.convention() {
        Convention::Canonical => reference_point(lambda),
        Convention::Consecutive => consecutive_point(lambda),
    }
}

/// Watanabe-Strogatz coordinates of a configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct WsCoordinates<T: Scalar = f64> {
    pub mobius: MobiusParams<T>,
    pub lambda: CrossRatios<T>,
}

/// `G_{alpha,psi}(Theta(lambda))`.
pub fn chart<T: Scalar>(w: &WsCoordinates<T>) -> Result<PhaseState<T>> {
    apply_diag(&w.mobius, &reference_point(&w.lambda)?)
}

/// The unique `(alpha, psi, lambda)` with `chart(...) == s`.
pub fn chart_inverse<T: Scalar>(s: &PhaseState<T>) -> Result<WsCoordinates<T>> {
    let lambda = cross_ratios(s, Convention::Canonical)?;
    let theta = reference_point(&lambda)?;
    let g = group_element_between(&theta, s)?;
    Ok(WsCoordinates { mobius: g, lambda })
}

/// The automorphism matching the first three units of `from` onto those of `to`.
pub fn group_element_between<T: Scalar>(
    from: &PhaseState<T>,
    to: &PhaseState<T>,
) -> Result<MobiusParams<T>> {
    let mu = |s: &PhaseState<T>| {
        let z = s.unit_points();
        Mat2::three_point(z[0], z[1], z[2])
    };
    let g = mu(to).inverse().compose(&mu(from));
    g.to_disk_params()
        .map_err(|e| WsError::Numerical(format!("chart inverse failed: {e}")))
}
