use thiserror::Error;

/// Errors raised by the numeric core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum WsError {
    #[error("phases {first} and {second} collide (separation {separation:e} below {sep_min:e})")]
    Collision {
        first: usize,
        second: usize,
        separation: f64,
        sep_min: f64,
    },
    #[error("phases are not a cyclic permutation of an ordered tuple: {0}")]
    NotSortable(String),
    #[error("index error: {0}")]
    Index(String),
    #[error("argument outside the domain: {0}")]
    Domain(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("series did not reach tolerance {tol:e} within {terms} terms")]
    Convergence { tol: f64, terms: usize },
    #[error("no fixed point in (0,1): kappa^2 = {kappa_sq} < 1 - omega^2 = {threshold}")]
    NoFixedPoint { kappa_sq: f64, threshold: f64 },
    #[error("degenerate boundary: kappa^2 = {kappa_sq} equals 1 - omega^2 = {threshold}")]
    Boundary { kappa_sq: f64, threshold: f64 },
    #[error("rotation frequency {rate:e} below threshold {threshold:e}")]
    FrequencyBelowThreshold { rate: f64, threshold: f64 },
    #[error("limit cycle not converged: {0}")]
    NotConverged(String),
    #[error("adaptive step underflow at t = {t} (h = {h:e})")]
    StepFailure { t: f64, h: f64 },
    #[error("quadrature error estimate {estimate:e} exceeds {limit:e}")]
    Quadrature { estimate: f64, limit: f64 },
    #[error("invalid model: {0}")]
    InvalidModel(String),
}

impl WsError {
    /// Short machine-readable tag, used in CSV status columns and error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            WsError::Collision { .. } => "collision",
            WsError::NotSortable(_) => "not_sortable",
            WsError::Index(_) => "index",
            WsError::Domain(_) => "domain",
            WsError::Numerical(_) => "numerical",
            WsError::Convergence { .. } => "convergence",
            WsError::NoFixedPoint { .. } => "no_fixed_point",
            WsError::Boundary { .. } => "boundary",
            WsError::FrequencyBelowThreshold { .. } => "frequency_below_threshold",
            WsError::NotConverged(_) => "not_converged",
            WsError::StepFailure { .. } => "step_failure",
            WsError::Quadrature { .. } => "quadrature",
            WsError::InvalidModel(_) => "invalid_model",
        }
    }
}

pub type Result<T, E = WsError> = std::result::Result<T, E>;
