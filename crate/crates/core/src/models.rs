//! Phase models driven by a mean field.
//!
//! Every model is written as `dphi_j/dt = 2 Re(f(Z) e^{i phi_j}) + g(Z) + eps h(phi_j)`
//! with `Z` the Kuramoto order parameter. For active rotators
//! `f(Z) = (i/2)(1 + kappa conj(Z))` and `g = omega`, which expands to
//! `omega - sin phi_j + (kappa/N) sum_k sin(phi_k - phi_j)`.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Result, WsError};
use crate::scalar::{from_usize, lit, Scalar};
use crate::torus_state::{mean_field, PhaseState};

/// Tolerance on the unit L2 norm of the perturbation harmonics.
pub const NORM_TOL: f64 = 1e-12;

/// Trigonometric perturbation `h(phi) = sum_n a_n sin(n phi) + b_n cos(n phi)`, `n >= 2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PerturbationRepr<T>", into = "PerturbationRepr<T>", bound = "T: Scalar")]
pub struct PerturbationSpec<T: Scalar = f64> {
    a: BTreeMap<u32, T>,
    b: BTreeMap<u32, T>,
    epsilon: T,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Scalar")]
struct PerturbationRepr<T: Scalar> {
    eps: T,
    #[serde(default)]
    a: BTreeMap<u32, T>,
    #[serde(default)]
    b: BTreeMap<u32, T>,
}

impl<T: Scalar> TryFrom<PerturbationRepr<T>> for PerturbationSpec<T> {
    type Error = WsError;

    fn try_from(r: PerturbationRepr<T>) -> Result<Self> {
        PerturbationSpec::new(r.a, r.b, r.eps)
    }
}

impl<T: Scalar> From<PerturbationSpec<T>> for PerturbationRepr<T> {
    fn from(p: PerturbationSpec<T>) -> Self {
        PerturbationRepr {
            eps: p.epsilon,
            a: p.a,
            b: p.b,
        }
    }
}

impl<T: Scalar> PerturbationSpec<T> {
    /// Harmonics must start at `n = 2`; with `eps != 0` the coefficients must
    /// have unit L2 norm.
    pub fn new(a: BTreeMap<u32, T>, b: BTreeMap<u32, T>, epsilon: T) -> Result<Self> {
        for (&n, &v) in a.iter().chain(b.iter()) {
            if n < 2 {
                return Err(WsError::InvalidModel(format!(
                    "perturbation harmonic n = {n} must be at least 2"
                )));
            }
            if !v.is_finite() {
                return Err(WsError::InvalidModel(format!("non-finite coefficient at n = {n}")));
            }
        }
        if !epsilon.is_finite() {
            return Err(WsError::InvalidModel("non-finite epsilon".into()));
        }
        let spec = PerturbationSpec { a, b, epsilon };
        let tol = lit::<T>(NORM_TOL).max(T::epsilon() * lit(64.0));
        if epsilon != T::zero() && (spec.l2_norm() - T::one()).abs() > tol {
            return Err(WsError::InvalidModel(format!(
                "perturbation coefficients have L2 norm {}, expected 1",
                spec.l2_norm()
            )));
        }
        Ok(spec)
    }

    /// Like [`PerturbationSpec::new`] but rescales the coefficients to unit norm.
    pub fn normalized(mut a: BTreeMap<u32, T>, mut b: BTreeMap<u32, T>, epsilon: T) -> Result<Self> {
        let norm = a
            .values()
            .chain(b.values())
            .fold(T::zero(), |acc, &v| acc + v * v)
            .sqrt();
        if norm == T::zero() {
            return Err(WsError::InvalidModel("all perturbation coefficients vanish".into()));
        }
        a.values_mut().for_each(|v| *v /= norm);
        b.values_mut().for_each(|v| *v /= norm);
        Self::new(a, b, epsilon)
    }

    /// `sin(n phi)` with strength `eps`.
    pub fn sine(n: u32, epsilon: T) -> Result<Self> {
        Self::new(BTreeMap::from([(n, T::one())]), BTreeMap::new(), epsilon)
    }

    /// `cos(n phi)` with strength `eps`.
    pub fn cosine(n: u32, epsilon: T) -> Result<Self> {
        Self::new(BTreeMap::new(), BTreeMap::from([(n, T::one())]), epsilon)
    }

    pub fn epsilon(&self) -> T {
        self.epsilon
    }

    pub fn with_epsilon(&self, epsilon: T) -> Result<Self> {
        Self::new(self.a.clone(), self.b.clone(), epsilon)
    }

    pub fn sin_coeffs(&self) -> &BTreeMap<u32, T> {
        &self.a
    }

    pub fn cos_coeffs(&self) -> &BTreeMap<u32, T> {
        &self.b
    }

    pub fn l2_norm(&self) -> T {
        self.a
            .values()
            .chain(self.b.values())
            .fold(T::zero(), |acc, &v| acc + v * v)
            .sqrt()
    }

    /// `h(phi)`, without the factor `eps`.
    pub fn eval(&self, phi: T) -> T {
        let mut acc = T::zero();
        for (&n, &c) in &self.a {
            acc += c * (T::from_u32(n).expect("harmonic") * phi).sin();
        }
        for (&n, &c) in &self.b {
            acc += c * (T::from_u32(n).expect("harmonic") * phi).cos();
        }
        acc
    }
}

/// Complex mean-field coupling `f(Z)`.
pub type ComplexField<T> = Arc<dyn Fn(Complex<T>) -> Complex<T> + Send + Sync>;
/// Real mean-field frequency `g(Z)`.
pub type RealField<T> = Arc<dyn Fn(Complex<T>) -> T + Send + Sync>;

#[derive(Clone)]
pub enum ModelKind<T: Scalar = f64> {
    /// Arbitrary mean-field model without perturbation.
    GeneralWs { f: ComplexField<T>, g: RealField<T> },
    ClassicRotator { omega: T, kappa: T },
    GeneralizedRotator {
        omega: T,
        kappa: T,
        perturbation: PerturbationSpec<T>,
    },
}

impl<T: Scalar> fmt::Debug for ModelKind<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelKind::GeneralWs { .. } => f.write_str("GeneralWs { .. }"),
            ModelKind::ClassicRotator { omega, kappa } => f
                .debug_struct("ClassicRotator")
                .field("omega", omega)
                .field("kappa", kappa)
                .finish(),
            ModelKind::GeneralizedRotator {
                omega,
                kappa,
                perturbation,
            } => f
                .debug_struct("GeneralizedRotator")
                .field("omega", omega)
                .field("kappa", kappa)
                .field("perturbation", perturbation)
                .finish(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ModelSpec<T: Scalar = f64> {
    kind: ModelKind<T>,
    n_units: usize,
}

impl<T: Scalar> ModelSpec<T> {
    pub fn new(kind: ModelKind<T>, n_units: usize) -> Result<Self> {
        if n_units == 0 {
            return Err(WsError::InvalidModel("model needs at least one unit".into()));
        }
        if let ModelKind::ClassicRotator { omega, kappa }
        | ModelKind::GeneralizedRotator { omega, kappa, .. } = &kind
        {
            if !omega.is_finite() || !kappa.is_finite() {
                return Err(WsError::InvalidModel("non-finite rotator parameter".into()));
            }
        }
        Ok(ModelSpec { kind, n_units })
    }

    pub fn classic_rotator(omega: T, kappa: T, n_units: usize) -> Result<Self> {
        Self::new(ModelKind::ClassicRotator { omega, kappa }, n_units)
    }

    pub fn generalized_rotator(
        omega: T,
        kappa: T,
        perturbation: PerturbationSpec<T>,
        n_units: usize,
    ) -> Result<Self> {
        Self::new(
            ModelKind::GeneralizedRotator {
                omega,
                kappa,
                perturbation,
            },
            n_units,
        )
    }

    pub fn general_ws(f: ComplexField<T>, g: RealField<T>, n_units: usize) -> Result<Self> {
        Self::new(ModelKind::GeneralWs { f, g }, n_units)
    }

    pub fn kind(&self) -> &ModelKind<T> {
        &self.kind
    }

    pub fn n_units(&self) -> usize {
        self.n_units
    }

    /// `(omega, kappa)` for rotator kinds.
    pub fn rotator_params(&self) -> Option<(T, T)> {
        match &self.kind {
            ModelKind::ClassicRotator { omega, kappa }
            | ModelKind::GeneralizedRotator { omega, kappa, .. } => Some((*omega, *kappa)),
            ModelKind::GeneralWs { .. } => None,
        }
    }

    pub fn perturbation(&self) -> Option<&PerturbationSpec<T>> {
        match &self.kind {
            ModelKind::GeneralizedRotator { perturbation, .. } => Some(perturbation),
            _ => None,
        }
    }

    pub fn epsilon(&self) -> T {
        self.perturbation().map_or(T::zero(), |p| p.epsilon())
    }

    /// The same model with the perturbation switched off.
    pub fn unperturbed(&self) -> ModelSpec<T> {
        match &self.kind {
            ModelKind::GeneralizedRotator { omega, kappa, .. } => ModelSpec {
                kind: ModelKind::ClassicRotator {
                    omega: *omega,
                    kappa: *kappa,
                },
                n_units: self.n_units,
            },
            _ => self.clone(),
        }
    }

    /// Checks `|omega| < 1` and `kappa^2 > 1 - omega^2` for rotator kinds.
    pub fn validate_regime(&self) -> Result<()> {
        let Some((omega, kappa)) = self.rotator_params() else {
            return Ok(());
        };
        if omega.abs() >= T::one() {
            return Err(WsError::InvalidModel(format!(
                "|omega| = {} must be below 1",
                omega.abs()
            )));
        }
        if kappa * kappa <= T::one() - omega * omega {
            return Err(WsError::InvalidModel(format!(
                "kappa^2 = {} must exceed 1 - omega^2 = {}",
                kappa * kappa,
                T::one() - omega * omega
            )));
        }
        Ok(())
    }

    /// Mean-field coefficients `(f(Z), g(Z))`.
    pub fn fields(&self, z: Complex<T>) -> (Complex<T>, T) {
        match &self.kind {
            ModelKind::GeneralWs { f, g } => (f(z), g(z)),
            ModelKind::ClassicRotator { omega, kappa }
            | ModelKind::GeneralizedRotator { omega, kappa, .. } => {
                let half_i = Complex::new(T::zero(), lit(0.5));
                let f = half_i * (Complex::new(T::one(), T::zero()) + z.conj() * *kappa);
                (f, *omega)
            }
        }
    }

    /// `eps h(phi)`, zero without perturbation.
    pub fn forcing(&self, phi: T) -> T {
        match self.perturbation() {
            Some(p) if p.epsilon() != T::zero() => p.epsilon() * p.eval(phi),
            _ => T::zero(),
        }
    }

    /// Vector field in mean-field form, written into `out`.
    pub fn rhs_into(&self, phases: &[T], out: &mut [T]) {
        let z = mean_field(phases);
        let (f, g) = self.fields(z);
        let two = lit::<T>(2.0);
        for (o, &p) in out.iter_mut().zip(phases) {
            let e = Complex::cis(p);
            *o = two * (f * e).re + g + self.forcing(p);
        }
    }

    pub fn rhs(&self, phases: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); phases.len()];
        self.rhs_into(phases, &mut out);
        out
    }

    pub fn rhs_state(&self, s: &PhaseState<T>) -> Result<Vec<T>> {
        if s.n_units() != self.n_units {
            return Err(WsError::InvalidModel(format!(
                "state has {} units, model expects {}",
                s.n_units(),
                self.n_units
            )));
        }
        Ok(self.rhs(s.phases()))
    }

    /// Direct pairwise sum for rotator kinds, `O(N^2)`.
    pub fn rhs_sum(&self, phases: &[T]) -> Result<Vec<T>> {
        let (omega, kappa) = self
            .rotator_params()
            .ok_or_else(|| WsError::InvalidModel("pairwise form needs a rotator model".into()))?;
        let n = from_usize::<T>(phases.len());
        Ok(phases
            .iter()
            .map(|&pj| {
                let coupling = phases
                    .iter()
                    .fold(T::zero(), |acc, &pk| acc + (pk - pj).sin());
                omega - pj.sin() + kappa / n * coupling + self.forcing(pj)
            })
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelTag {
    ClassicRotator,
    GeneralizedRotator,
}

/// Serializable description of a rotator model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Scalar")]
pub struct ModelConfig<T: Scalar = f64> {
    pub kind: ModelTag,
    pub omega: T,
    pub kappa: T,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<PerturbationSpec<T>>,
}

impl<T: Scalar> ModelConfig<T> {
    pub fn build(&self) -> Result<ModelSpec<T>> {
        match (&self.kind, &self.perturbation) {
            (_, Some(p)) => ModelSpec::generalized_rotator(self.omega, self.kappa, p.clone(), self.n),
            (ModelTag::ClassicRotator, None) => {
                ModelSpec::classic_rotator(self.omega, self.kappa, self.n)
            }
            (ModelTag::GeneralizedRotator, None) => Err(WsError::InvalidModel(
                "generalized_rotator requires a perturbation".into(),
            )),
        }
    }
}

impl<T: Scalar> TryFrom<&ModelSpec<T>> for ModelConfig<T> {
    type Error = WsError;

    fn try_from(m: &ModelSpec<T>) -> Result<Self> {
        match m.kind() {
            ModelKind::ClassicRotator { omega, kappa } => Ok(ModelConfig {
                kind: ModelTag::ClassicRotator,
                omega: *omega,
                kappa: *kappa,
                n: m.n_units(),
                perturbation: None,
            }),
            ModelKind::GeneralizedRotator {
                omega,
                kappa,
                perturbation,
            } => Ok(ModelConfig {
                kind: ModelTag::GeneralizedRotator,
                omega: *omega,
                kappa: *kappa,
                n: m.n_units(),
                perturbation: Some(perturbation.clone()),
            }),
            ModelKind::GeneralWs { .. } => Err(WsError::InvalidModel(
                "general mean-field models carry callbacks and cannot be serialized".into(),
            )),
        }
    }
}
