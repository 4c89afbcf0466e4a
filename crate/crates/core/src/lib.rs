//! Watanabe-Strogatz reduction, limit cycles and averaging for mean-field
//! phase ensembles such as active rotators.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix `f64`, which all default tolerances assume.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod averaging;
pub mod error;
pub mod invariants;
pub mod io;
pub mod mobius;
pub mod models;
pub mod orbits;
pub mod scalar;
pub mod torus_state;
pub mod ws_reduced;

pub use error::{Result, WsError};
pub use mobius::{Convention, CrossRatios, MobiusParams, WsCoordinates};
pub use models::{ModelConfig, ModelKind, ModelSpec, PerturbationSpec};
pub use orbits::{CycleConfig, IntegratorConfig, Method, OrbitRecord, SplayReport};
pub use scalar::Scalar;
pub use torus_state::{OrderParameter, PhaseState};
pub use ws_reduced::{TruncatedFixedPoint, WsState};

pub use num_complex::Complex;

pub type PhaseState64 = PhaseState<f64>;
pub type PhaseState32 = PhaseState<f32>;
pub type MobiusParams64 = MobiusParams<f64>;
pub type MobiusParams32 = MobiusParams<f32>;
pub type CrossRatios64 = CrossRatios<f64>;
pub type CrossRatios32 = CrossRatios<f32>;
pub type ModelSpec64 = ModelSpec<f64>;
pub type ModelSpec32 = ModelSpec<f32>;
pub type OrbitRecord64 = OrbitRecord<f64>;
pub type Complex64 = Complex<f64>;
pub type Complex32 = Complex<f32>;
