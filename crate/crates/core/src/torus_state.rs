//! Ensemble configurations on the ordered torus.
//!
//! A [`PhaseState`] holds `N >= 4` labelled angles in strict cyclic order
//! `phi_1 < phi_2 < ... < phi_N < phi_1 + 2 pi`. The stored representative is
//! canonical: `phi_1` lies in `(-pi, pi]` and the remaining angles are lifted
//! monotonically upward from it. Labels are never permuted; only the branch
//! of each angle is normalized.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Result, WsError};
use crate::io::format_float;
use crate::scalar::{from_usize, lit, rem_turn, wrap_angle, Scalar};

/// Default minimum angular separation between any two units.
pub const DEFAULT_SEP_MIN: f64 = 1e-9;

/// Smallest ensemble carrying at least one cross-ratio.
pub const MIN_UNITS: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(
    try_from = "PhaseStateRepr<T>",
    into = "PhaseStateRepr<T>",
    bound = "T: Scalar"
)]
pub struct PhaseState<T: Scalar = f64> {
    phases: Vec<T>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Scalar")]
struct PhaseStateRepr<T: Scalar> {
    n: usize,
    phases: Vec<T>,
}

impl<T: Scalar> TryFrom<PhaseStateRepr<T>> for PhaseState<T> {
    type Error = WsError;

    fn try_from(repr: PhaseStateRepr<T>) -> Result<Self> {
        if repr.n != repr.phases.len() {
            return Err(WsError::Domain(format!(
                "declared n = {} but {} phases given",
                repr.n,
                repr.phases.len()
            )));
        }
        PhaseState::canonicalize(&repr.phases)
    }
}

impl<T: Scalar> From<PhaseState<T>> for PhaseStateRepr<T> {
    fn from(s: PhaseState<T>) -> Self {
        PhaseStateRepr {
            n: s.phases.len(),
            phases: s.phases,
        }
    }
}

impl<T: Scalar> PhaseState<T> {
    /// Canonicalizes raw angles with the default separation threshold.
    pub fn canonicalize(raw: &[T]) -> Result<Self> {
        Self::canonicalize_with(raw, lit(DEFAULT_SEP_MIN))
    }

    /// Returns the ordered representative of `raw`, keeping labels as given.
    ///
    /// Each angle is lifted to lie strictly above its predecessor by less than
    /// one turn; the lifted tuple must then close within a single turn.
    pub fn canonicalize_with(raw: &[T], sep_min: T) -> Result<Self> {
        let n = raw.len();
        if n < MIN_UNITS {
            return Err(WsError::Domain(format!(
                "need at least {MIN_UNITS} units, got {n}"
            )));
        }
        if let Some(j) = raw.iter().position(|x| !x.is_finite()) {
            return Err(WsError::Domain(format!("phase {j} is not finite")));
        }
        let two_pi = T::TAU();
        let mut phases = Vec::with_capacity(n);
        phases.push(wrap_angle(raw[0]));
        for j in 1..n {
            let gap = rem_turn(raw[j] - raw[j - 1]);
            let sep = gap.min(two_pi - gap);
            if sep < sep_min {
                return Err(collision(j - 1, j, sep, sep_min));
            }
            let prev = phases[j - 1];
            phases.push(prev + gap);
        }
        let span = phases[n - 1] - phases[0];
        let closing = two_pi - span;
        if closing.abs() < sep_min {
            return Err(collision(n - 1, 0, closing.abs(), sep_min));
        }
        if closing < T::zero() {
            return Err(WsError::NotSortable(format!(
                "lifted phases wind {:.6} rad, more than one turn",
                span.to_f64().unwrap_or(f64::NAN)
            )));
        }
        Ok(PhaseState { phases })
    }

    /// Builds a state from angles that are already a lifted ordered tuple,
    /// e.g. integrator output. The branch is re-normalized.
    pub fn from_lifted(lifted: &[T]) -> Result<Self> {
        Self::canonicalize(lifted)
    }

    /// The splay configuration `theta*_j = -pi + 2 pi (j - 1) / N`.
    pub fn splay(n: usize) -> Result<Self> {
        if n < MIN_UNITS {
            return Err(WsError::Domain(format!(
                "need at least {MIN_UNITS} units, got {n}"
            )));
        }
        let step = T::TAU() / from_usize::<T>(n);
        let phases = (0..n).map(|j| -T::PI() + step * from_usize(j)).collect();
        Ok(PhaseState { phases })
    }

    pub fn phases(&self) -> &[T] {
        &self.phases
    }

    pub fn into_phases(self) -> Vec<T> {
        self.phases
    }

    pub fn n_units(&self) -> usize {
        self.phases.len()
    }

    /// Consecutive gaps including the closing gap; they sum to `2 pi`.
    pub fn gaps(&self) -> Vec<T> {
        let n = self.phases.len();
        let mut gaps: Vec<T> = self.phases.windows(2).map(|w| w[1] - w[0]).collect();
        gaps.push(self.phases[0] + T::TAU() - self.phases[n - 1]);
        gaps
    }

    /// Smallest gap between cyclically adjacent units.
    pub fn min_gap(&self) -> T {
        self.gaps()
            .into_iter()
            .fold(T::infinity(), |acc, g| acc.min(g))
    }

    /// Points `e^{i phi_j}` on the unit circle.
    pub fn unit_points(&self) -> Vec<Complex<T>> {
        self.phases.iter().map(|&p| Complex::cis(p)).collect()
    }

    /// Relabels cyclically: unit `j` of the result is unit `j - shift` of `self`.
    pub fn rotate_labels(&self, shift: usize) -> Result<Self> {
        let n = self.phases.len();
        let raw: Vec<T> = (0..n)
            .map(|j| self.phases[(j + n - shift % n) % n])
            .collect();
        Self::canonicalize(&raw)
    }

    /// One CSV row with 17 significant digits per phase.
    pub fn to_csv_row(&self) -> String {
        self.phases
            .iter()
            .map(|&p| format_float(p))
            .collect::<Vec<_>>()
            .join(",")
    }

    pub fn from_csv_row(row: &str) -> Result<Self> {
        let raw = row
            .trim()
            .split(',')
            .map(|f| {
                f.trim()
                    .parse::<f64>()
                    .map(lit::<T>)
                    .map_err(|e| WsError::Domain(format!("bad CSV field {f:?}: {e}")))
            })
            .collect::<Result<Vec<T>>>()?;
        Self::canonicalize(&raw)
    }
}

fn collision<T: Scalar>(first: usize, second: usize, sep: T, sep_min: T) -> WsError {
    WsError::Collision {
        first,
        second,
        separation: sep.to_f64().unwrap_or(f64::NAN),
        sep_min: sep_min.to_f64().unwrap_or(f64::NAN),
    }
}

/// Kuramoto order parameter `Z = (1/N) sum_j e^{i phi_j}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct OrderParameter<T: Scalar = f64> {
    pub z: Complex<T>,
}

impl<T: Scalar> OrderParameter<T> {
    pub fn modulus(&self) -> T {
        self.z.norm()
    }

    pub fn phase(&self) -> T {
        self.z.arg()
    }
}

/// Mean of `e^{i phi}` over a raw slice of angles.
pub fn mean_field<T: Scalar>(phases: &[T]) -> Complex<T> {
    let sum = phases
        .iter()
        .fold(Complex::new(T::zero(), T::zero()), |acc, &p| {
            acc + Complex::cis(p)
        });
    sum / from_usize::<T>(phases.len())
}

pub fn order_parameter<T: Scalar>(s: &PhaseState<T>) -> OrderParameter<T> {
    OrderParameter {
        z: mean_field(s.phases()),
    }
}

/// `<e^{i k phi}> = (1/N) sum_j e^{i k phi_j}`.
pub fn power_mean<T: Scalar>(s: &PhaseState<T>, k: u32) -> Complex<T> {
    let kk: T = T::from_u32(k).expect("k representable");
    let sum = s
        .phases()
        .iter()
        .fold(Complex::new(T::zero(), T::zero()), |acc, &p| {
            acc + Complex::cis(kk * p)
        });
    sum / from_usize::<T>(s.n_units())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_2, PI, TAU};

    #[test]
    fn already_canonical_is_unchanged() {
        let raw = [-PI + 1e-15, -FRAC_PI_2, 0.0, FRAC_PI_2];
        let s = PhaseState::canonicalize(&[-PI, -FRAC_PI_2, 0.0, FRAC_PI_2]).unwrap();
        // -pi maps to the +pi end of the branch, the rest lift above it
        assert_eq!(s.phases()[0], PI);
        assert_abs_diff_eq!(s.phases()[1], PI + FRAC_PI_2, epsilon = 1e-15);
        let s = PhaseState::canonicalize(&raw).unwrap();
        assert_eq!(s.phases(), &raw);
    }

    #[test]
    fn relabel_free_branch_normalization() {
        let s = PhaseState::canonicalize(&[0.0, FRAC_PI_2, -PI, -FRAC_PI_2]).unwrap();
        let expected = [0.0, FRAC_PI_2, PI, 3.0 * FRAC_PI_2];
        for (a, b) in s.phases().iter().zip(expected) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-15);
        }
        // from index 3 onward the raw values were re-expressed one turn up
        assert_abs_diff_eq!(s.phases()[2] - (-PI), TAU, epsilon = 1e-15);
        assert_abs_diff_eq!(s.phases()[3] - (-FRAC_PI_2), TAU, epsilon = 1e-15);
    }

    #[test]
    fn coincident_phases_collide() {
        let err = PhaseState::canonicalize(&[0.0, 0.0, 1.0, 2.0]).unwrap_err();
        assert!(matches!(err, WsError::Collision { first: 0, second: 1, .. }));
        let err = PhaseState::canonicalize(&[0.0, 1.0, 2.0, TAU]).unwrap_err();
        assert!(matches!(err, WsError::Collision { first: 3, second: 0, .. }));
    }

    #[test]
    fn winding_input_is_not_sortable() {
        let err = PhaseState::canonicalize(&[0.0, 2.0, 4.0, 0.5]).unwrap_err();
        assert!(matches!(err, WsError::NotSortable(_)));
    }

    #[test]
    fn too_few_units_or_nan() {
        assert!(PhaseState::canonicalize(&[0.0, 1.0, 2.0]).is_err());
        assert!(PhaseState::canonicalize(&[0.0, 1.0, f64::NAN, 2.0]).is_err());
    }

    #[test]
    fn gaps_sum_to_two_pi() {
        let s = PhaseState::canonicalize(&[2.9, -3.0, -1.0, 0.5, 2.0]).unwrap();
        let total: f64 = s.gaps().iter().sum();
        assert_abs_diff_eq!(total, TAU, epsilon = 1e-12);
    }

    #[test]
    fn splay_order_parameter_vanishes() {
        for n in 4..20 {
            let s = PhaseState::<f64>::splay(n).unwrap();
            assert!(order_parameter(&s).modulus() < 1e-14);
        }
        let s = PhaseState::canonicalize(&[-PI, -FRAC_PI_2, 0.0, FRAC_PI_2]).unwrap();
        assert!(order_parameter(&s).modulus() < 1e-15);
    }

    #[test]
    fn order_parameter_matches_direct_sum() {
        // 40-digit reference: (cos(-3)+cos(-1)+cos(.5)+cos(2))/4 etc.
        let s = PhaseState::canonicalize(&[-3.0, -1.0, 0.5, 2.0]).unwrap();
        let z = order_parameter(&s).z;
        assert_abs_diff_eq!(z.re, 0.002_936_383_652_731_147_2, epsilon = 1e-15);
        assert_abs_diff_eq!(z.im, 0.101_532_993_140_530_24, epsilon = 1e-15);
    }

    #[test]
    fn power_mean_on_splay() {
        for n in 4..=9usize {
            let s = PhaseState::<f64>::splay(n).unwrap();
            for k in 0..=(5 * n as u32) {
                let m = power_mean(&s, k);
                if (k as usize).is_multiple_of(n) {
                    let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                    assert_abs_diff_eq!(m.re, sign, epsilon = 1e-12);
                    assert_abs_diff_eq!(m.im, 0.0, epsilon = 1e-12);
                } else {
                    assert!(m.norm() < 1e-12, "n={n} k={k} |m|={}", m.norm());
                }
            }
        }
    }

    #[test]
    fn json_and_csv_round_trip() {
        let s = PhaseState::canonicalize(&[-3.0, -1.0, 0.5, 2.0, 2.7]).unwrap();
        let json = serde_json::to_string(&s).unwrap();
        assert!(json.starts_with("{\"n\":5,"));
        let back: PhaseState = serde_json::from_str(&json).unwrap();
        assert_eq!(back, s);
        let back = PhaseState::<f64>::from_csv_row(&s.to_csv_row()).unwrap();
        assert_eq!(back, s);
        let bad: std::result::Result<PhaseState, _> =
            serde_json::from_str(r#"{"n":3,"phases":[0,1,2,3]}"#);
        assert!(bad.is_err());
    }

    #[test]
    fn rotate_labels_is_cyclic() {
        let s = PhaseState::canonicalize(&[-3.0, -1.0, 0.5, 2.0]).unwrap();
        let r = s.rotate_labels(1).unwrap();
        assert_abs_diff_eq!(wrap_angle(r.phases()[0] - 2.0), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(wrap_angle(r.phases()[1] + 3.0), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn single_precision_state() {
        let s = PhaseState::<f32>::splay(6).unwrap();
        assert!(order_parameter(&s).modulus() < 1e-6);
    }
}
