//! Splay symmetry of sampled limit cycles.
//!
//! On the splay leaf every unit follows the same waveform shifted by a
//! multiple of `T/N`: `phi_j(t) = phi_N(t + s j T / N)` with `s` the
//! rotation direction of `psi`.

use serde::{Deserialize, Serialize};

use super::cycle::OrbitRecord;
use crate::error::{Result, WsError};
use crate::scalar::{circle_distance, from_usize, lit, Scalar};

pub const DEFAULT_SPLAY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SplayReport<T: Scalar = f64> {
    pub is_splay: bool,
    pub max_shift_error: T,
    pub tolerance: T,
    pub period: T,
    pub n_units: usize,
}

/// Compares every unit with the time-shifted last unit at all samples.
pub fn splay_check<T: Scalar>(orb: &OrbitRecord<T>, splay_tol: T) -> Result<SplayReport<T>> {
    let n = orb.n_units();
    if n < 2 || orb.n_samples() < 2 {
        return Err(WsError::Domain("orbit record is too small".into()));
    }
    let shift = orb.period / from_usize::<T>(n) * lit::<T>(orb.direction as f64);
    let mut worst = T::zero();
    for j in 1..n {
        let lag = shift * from_usize::<T>(j);
        for (i, &t) in orb.times.iter().enumerate() {
            let other = orb.phase_at(n - 1, t + lag);
            worst = worst.max(circle_distance(orb.phases[i][j - 1], other));
        }
    }
    Ok(SplayReport {
        is_splay: worst < splay_tol,
        max_shift_error: worst,
        tolerance: splay_tol,
        period: orb.period,
        n_units: n,
    })
}
