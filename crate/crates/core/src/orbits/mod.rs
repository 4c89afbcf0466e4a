//! Trajectories, limit cycles and splay detection.

pub mod cycle;
pub mod integrate;
pub mod splay;

pub use cycle::{find_limit_cycle, find_limit_cycle_from, hermite, max_phase_mismatch, psi_of, CycleConfig, OrbitRecord};
pub use integrate::{
    check_order, integrate, integrate_at, integrate_final, FnSystem, IntegratorConfig, Method,
    OdeSystem, Stepper, Trajectory,
};
pub use splay::{splay_check, SplayReport, DEFAULT_SPLAY_TOL};
