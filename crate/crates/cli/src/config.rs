//! Run configuration loaded from one JSON file.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use wsrot::models::ModelTag;
use wsrot::{IntegratorConfig, ModelConfig, PerturbationSpec};

use crate::failure::Failure;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub integrator: IntegratorConfig,
    /// Seed for every random draw; `--seed` overrides it.
    pub seed: u64,
    pub simulate: SimulateOptions,
    pub scan: ScanOptions,
    pub splay: SplayOptions,
    pub invariants: InvariantOptions,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: ModelConfig {
                kind: ModelTag::ClassicRotator,
                omega: 0.8,
                kappa: -0.7,
                n: 4,
                perturbation: None,
            },
            integrator: IntegratorConfig::default(),
            seed: 0x5eed_2024,
            simulate: SimulateOptions::default(),
            scan: ScanOptions::default(),
            splay: SplayOptions::default(),
            invariants: InvariantOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialState {
    Phases(Vec<f64>),
    Splay,
    Random { min_gap: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateOptions {
    pub t_end: f64,
    /// Output samples including both ends.
    pub samples: usize,
    pub initial: InitialState,
}

impl Default for SimulateOptions {
    fn default() -> Self {
        SimulateOptions {
            t_end: 100.0,
            samples: 1001,
            initial: InitialState::Random { min_gap: 0.05 },
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Curve {
    pub name: String,
    pub h: PerturbationSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScanOptions {
    pub grid: GridSpec,
    pub curves: Vec<Curve>,
    pub samples: usize,
    pub quad_tol: f64,
    pub root_tol: f64,
    pub slope_step: f64,
    /// Fraction of converged points required for a zero exit code.
    pub min_ok_fraction: f64,
}

fn harmonic(a: f64, b: f64) -> PerturbationSpec {
    PerturbationSpec::new(BTreeMap::from([(2, a)]), BTreeMap::from([(2, b)]), 1e-3)
        .expect("unit-norm harmonic")
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions {
            grid: GridSpec {
                min: 0.02,
                max: 0.98,
                points: 101,
            },
            curves: vec![
                Curve {
                    name: "h1".into(),
                    h: harmonic(1.0, 0.0),
                },
                Curve {
                    name: "h2".into(),
                    h: harmonic(0.0, -1.0),
                },
                Curve {
                    name: "h3".into(),
                    h: harmonic(0.6, -0.8),
                },
            ],
            samples: 2048,
            quad_tol: 1e-8,
            root_tol: 1e-8,
            slope_step: 1e-4,
            min_ok_fraction: 0.9,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplayOptions {
    /// Consecutive cross-ratios of the leaf; the splay leaf when absent.
    pub lambda: Option<Vec<f64>>,
    pub tolerance: f64,
    pub samples: usize,
}

impl Default for SplayOptions {
    fn default() -> Self {
        SplayOptions {
            lambda: None,
            tolerance: wsrot::orbits::DEFAULT_SPLAY_TOL,
            samples: 2048,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InvariantOptions {
    pub samples: usize,
    pub filter: Option<String>,
    /// Tolerance overrides keyed by `module.name`.
    pub tolerances: BTreeMap<String, f64>,
}

impl Default for InvariantOptions {
    fn default() -> Self {
        let d = wsrot::invariants::SuiteConfig::default();
        InvariantOptions {
            samples: d.samples,
            filter: d.filter,
            tolerances: d.tolerances,
        }
    }
}

/// Parses a config, reporting the path of the offending key on failure.
pub fn parse(text: &str) -> Result<RunConfig, Failure> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Failure::config(e.into_inner().to_string(), Some(path))
    })
}

pub fn load(path: Option<&Path>) -> Result<RunConfig, Failure> {
    match path {
        None => Ok(RunConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Failure::config(format!("cannot read {}: {e}", p.display()), None))?;
            parse(&text)
        }
    }
}
