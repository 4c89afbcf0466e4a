//! Subcommand implementations.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use wsrot::averaging::{scan_and_root, uniform_grid, AveragingConfig, EndpointLimits, Root};
use wsrot::invariants::{random_state, run_suites, InvariantRow, SuiteConfig};
use wsrot::io::{format_float, write_csv_record, write_trajectory_csv};
use wsrot::mobius::{cross_ratios, splay_lambda};
use wsrot::orbits::{find_limit_cycle, integrate_at, splay_check, CycleConfig, SplayReport};
use wsrot::torus_state::order_parameter;
use wsrot::ws_reduced::{fixed_point, TruncatedFixedPoint};
use wsrot::{Convention, CrossRatios, ModelSpec, PhaseState, WsError};

use crate::config::{InitialState, RunConfig};
use crate::failure::Failure;

fn write_json<V: Serialize>(path: &Path, value: &V) -> Result<(), Failure> {
    let mut f = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut f, value).map_err(|e| Failure::io(e.into()))?;
    f.write_all(b"\n")?;
    f.flush()?;
    Ok(())
}

fn print_text(text: &str) -> Result<(), Failure> {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|()| out.flush()) {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        r => r.map_err(Failure::io),
    }
}

fn print_json<V: Serialize>(value: &V) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).expect("serializable report");
    print_text(&format!("{text}\n"))
}

fn warn(kind: &str, message: &str) {
    log::info!("{message}");
    eprintln!("{}", serde_json::json!({ "warning": kind, "message": message }));
}

fn build_model(cfg: &RunConfig) -> Result<ModelSpec, Failure> {
    cfg.integrator.validate().map_err(Failure::invalid)?;
    cfg.model.build().map_err(Failure::invalid)
}

#[derive(Debug, Serialize)]
struct OrderStats {
    mean_modulus: f64,
    min_modulus: f64,
    max_modulus: f64,
    final_z: [f64; 2],
}

#[derive(Debug, Serialize)]
struct SimulateSummary {
    n_units: usize,
    t_end: f64,
    samples: usize,
    initial_state: Vec<f64>,
    final_state: Vec<f64>,
    convention: Convention,
    lambda_initial: Option<Vec<f64>>,
    lambda_final: Option<Vec<f64>>,
    /// Largest `|Lambda_k(t) - Lambda_k(0)|` over the run.
    lambda_max_drift: Option<f64>,
    /// Least-squares slope of each `Lambda_k(t)`.
    lambda_slope: Option<Vec<f64>>,
    order_parameter: OrderStats,
}

fn initial_state(cfg: &RunConfig) -> Result<PhaseState, Failure> {
    let n = cfg.model.n;
    match &cfg.simulate.initial {
        InitialState::Phases(p) => {
            if p.len() != n {
                return Err(Failure::invalid(WsError::InvalidModel(format!(
                    "initial state has {} phases, model has {n} units",
                    p.len()
                ))));
            }
            PhaseState::canonicalize(p)
        }
        InitialState::Splay => PhaseState::splay(n),
        InitialState::Random { min_gap } => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            random_state(&mut rng, n, *min_gap)
        }
    }
    .map_err(Failure::invalid)
}

fn slope(ts: &[f64], ys: &[f64]) -> f64 {
    let n = ts.len() as f64;
    let (mt, my) = (ts.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let num: f64 = ts.iter().zip(ys).map(|(t, y)| (t - mt) * (y - my)).sum();
    let den: f64 = ts.iter().map(|t| (t - mt).powi(2)).sum();
    num / den
}

pub fn simulate(cfg: &RunConfig, out: &Path) -> Result<(), Failure> {
    let model = build_model(cfg)?;
    let opts = &cfg.simulate;
    if !(opts.t_end > 0.0 && opts.t_end.is_finite()) || opts.samples < 2 {
        return Err(Failure::invalid(WsError::Domain(
            "simulate needs t_end > 0 and at least 2 samples".into(),
        )));
    }
    let s0 = initial_state(cfg)?;
    let times = uniform_grid(0.0, opts.t_end, opts.samples);
    let traj = integrate_at(&model, &s0, &times, &cfg.integrator).map_err(Failure::numerical)?;
    std::fs::create_dir_all(out)?;
    let mut w = BufWriter::new(File::create(out.join("trajectory.csv"))?);
    write_trajectory_csv(&mut w, &traj.times, &traj.states)?;
    w.flush()?;

    let states = (0..traj.len())
        .map(|i| traj.state(i))
        .collect::<wsrot::Result<Vec<_>>>()
        .map_err(Failure::numerical)?;
    let moduli: Vec<f64> = states.iter().map(|s| order_parameter(s).modulus()).collect();
    let last = states.last().expect("at least two samples");
    let z = order_parameter(last).z;
    let convention = Convention::Consecutive;
    let (mut l0, mut l1, mut drift, mut slopes) = (None, None, None, None);
    if model.n_units() >= 4 {
        let lambdas = states
            .iter()
            .map(|s| cross_ratios(s, convention).map(|l| l.values().to_vec()))
            .collect::<wsrot::Result<Vec<_>>>()
            .map_err(Failure::numerical)?;
        let first = lambdas[0].clone();
        drift = Some(
            lambdas
                .iter()
                .flat_map(|l| l.iter().zip(&first).map(|(a, b)| (a - b).abs()))
                .fold(0.0, f64::max),
        );
        slopes = Some(
            (0..first.len())
                .map(|k| slope(&traj.times, &lambdas.iter().map(|l| l[k]).collect::<Vec<_>>()))
                .collect(),
        );
        l1 = lambdas.last().cloned();
        l0 = Some(first);
    }
    let summary = SimulateSummary {
        n_units: model.n_units(),
        t_end: opts.t_end,
        samples: opts.samples,
        initial_state: s0.phases().to_vec(),
        final_state: last.phases().to_vec(),
        convention,
        lambda_initial: l0,
        lambda_final: l1,
        lambda_max_drift: drift,
        lambda_slope: slopes,
        order_parameter: OrderStats {
            mean_modulus: moduli.iter().sum::<f64>() / moduli.len() as f64,
            min_modulus: moduli.iter().copied().fold(f64::INFINITY, f64::min),
            max_modulus: moduli.iter().copied().fold(0.0, f64::max),
            final_z: [z.re, z.im],
        },
    };
    write_json(&out.join("summary.json"), &summary)?;
    print_json(&summary)?;
    Ok(())
}

pub fn fixed_point_report(cfg: &RunConfig, out: Option<&Path>) -> Result<(), Failure> {
    let (omega, kappa) = (cfg.model.omega, cfg.model.kappa);
    let fp: TruncatedFixedPoint = fixed_point(omega, kappa).map_err(|e| match e {
        WsError::Domain(_) => Failure::invalid(e),
        other => Failure::numerical(other),
    })?;
    if let Err(e) = fp.check_rotation() {
        warn(e.kind(), &e.to_string());
    }
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        write_json(&dir.join("fixed_point.json"), &fp)?;
    }
    print_json(&fp)?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct CurveReport {
    name: String,
    epsilon: f64,
    converged: usize,
    failed: usize,
    roots: Vec<Root>,
    endpoints: Option<EndpointLimits>,
}

#[derive(Debug, Serialize)]
struct ScanReport {
    omega: f64,
    kappa: f64,
    n_units: usize,
    curves: Vec<CurveReport>,
}

fn opt_float(v: Option<f64>) -> String {
    v.map(format_float).unwrap_or_default()
}

pub fn scan_fh(cfg: &RunConfig, out: &Path) -> Result<(), Failure> {
    cfg.integrator.validate().map_err(Failure::invalid)?;
    let opts = &cfg.scan;
    let g = &opts.grid;
    if !(g.min > 0.0 && g.max < 1.0 && g.min < g.max) || g.points < 2 {
        return Err(Failure::invalid(WsError::Domain(
            "scan grid needs 0 < min < max < 1 and at least 2 points".into(),
        )));
    }
    if opts.curves.is_empty() {
        return Err(Failure::invalid(WsError::Domain("no curves to scan".into())));
    }
    for c in &opts.curves {
        if c.name.is_empty()
            || !c.name.chars().all(|ch| ch.is_ascii_alphanumeric() || ch == '_' || ch == '-')
        {
            return Err(Failure::config(
                format!("curve name {:?} must be non-empty ASCII letters, digits, '_' or '-'", c.name),
                Some("scan.curves.name".into()),
            ));
        }
    }
    let avg = AveragingConfig {
        cycle: CycleConfig {
            integrator: cfg.integrator.clone(),
            samples: opts.samples,
            ..CycleConfig::default()
        },
        quad_tol: opts.quad_tol,
        root_tol: opts.root_tol,
        slope_step: opts.slope_step,
    };
    let grid = uniform_grid(g.min, g.max, g.points);
    let models = opts
        .curves
        .iter()
        .map(|c| ModelSpec::generalized_rotator(cfg.model.omega, cfg.model.kappa, c.h.clone(), cfg.model.n))
        .collect::<wsrot::Result<Vec<_>>>()
        .map_err(Failure::invalid)?;
    if cfg.model.n != 4 {
        return Err(Failure::invalid(WsError::InvalidModel(
            "scan-fh needs the scalar case n = 4".into(),
        )));
    }
    std::fs::create_dir_all(out)?;
    let mut curves = Vec::new();
    let mut short = Vec::new();
    for (c, m) in opts.curves.iter().zip(&models) {
        log::info!("scanning {} on {} points", c.name, grid.len());
        let report = scan_and_root(m, &grid, &avg).map_err(Failure::numerical)?;
        let mut w = BufWriter::new(File::create(out.join(format!("fh_{}.csv", c.name)))?);
        write_csv_record(&mut w, &["lambda", "f_h_1", "period", "status", "message"])?;
        for p in &report.points {
            write_csv_record(
                &mut w,
                &[
                    format_float(p.lambda[0]),
                    opt_float(p.f_h.as_ref().map(|v| v[0])),
                    opt_float(p.period),
                    p.status.clone(),
                    p.message.clone().unwrap_or_default(),
                ],
            )?;
        }
        w.flush()?;
        let fraction = report.converged as f64 / report.points.len() as f64;
        if fraction < opts.min_ok_fraction {
            short.push(format!("{}: {}/{}", c.name, report.converged, report.points.len()));
        }
        curves.push(CurveReport {
            name: c.name.clone(),
            epsilon: c.h.epsilon(),
            converged: report.converged,
            failed: report.failed,
            roots: report.roots,
            endpoints: report.endpoints,
        });
    }
    let summary = ScanReport {
        omega: cfg.model.omega,
        kappa: cfg.model.kappa,
        n_units: cfg.model.n,
        curves,
    };
    write_json(&out.join("roots.json"), &summary)?;
    print_json(&summary)?;
    if !short.is_empty() {
        return Err(Failure {
            error: "scan_incomplete".into(),
            message: format!(
                "fewer than {:.0}% of points converged ({})",
                100.0 * opts.min_ok_fraction,
                short.join(", ")
            ),
            path: None,
            exit_code: crate::failure::EXIT_NUMERICAL,
        });
    }
    Ok(())
}

pub fn splay(cfg: &RunConfig, out: Option<&Path>) -> Result<(), Failure> {
    let model = build_model(cfg)?;
    if model.perturbation().is_some() {
        warn("perturbation_ignored", "splay-check uses the unperturbed model");
    }
    let n = model.n_units();
    let lambda = match &cfg.splay.lambda {
        Some(v) => CrossRatios::consecutive(v.clone()),
        None => splay_lambda(n, Convention::Consecutive),
    }
    .map_err(Failure::invalid)?;
    let cycle = CycleConfig {
        integrator: cfg.integrator.clone(),
        samples: cfg.splay.samples,
        ..CycleConfig::default()
    };
    let orb = find_limit_cycle(&model.unperturbed(), &lambda, &cycle).map_err(|e| match e {
        WsError::InvalidModel(_) | WsError::Domain(_) => Failure::invalid(e),
        other => Failure::numerical(other),
    })?;
    let report: SplayReport = splay_check(&orb, cfg.splay.tolerance).map_err(Failure::numerical)?;
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        write_json(&dir.join("splay.json"), &report)?;
    }
    print_json(&report)?;
    Ok(())
}

fn table(rows: &[InvariantRow]) -> String {
    let mut s = format!(
        "{:<12} {:<36} {:>7} {:>10} {:>10}  {}\n",
        "module", "invariant", "samples", "max_error", "tolerance", "status"
    );
    for r in rows {
        s.push_str(&format!(
            "{:<12} {:<36} {:>7} {:>10.3e} {:>10.1e}  {}\n",
            r.module,
            r.name,
            r.samples,
            r.max_error,
            r.tolerance,
            if r.passed { "PASS" } else { "FAIL" }
        ));
    }
    s
}

pub fn invariants(cfg: &RunConfig, filter: Option<String>, out: Option<&Path>) -> Result<(), Failure> {
    let opts = &cfg.invariants;
    if opts.samples == 0 {
        return Err(Failure::invalid(WsError::Domain("invariants.samples must be positive".into())));
    }
    let suite = SuiteConfig {
        seed: cfg.seed,
        samples: opts.samples,
        filter: filter.or_else(|| opts.filter.clone()),
        tolerances: opts.tolerances.clone(),
    };
    let rows = run_suites(&suite);
    if rows.is_empty() {
        return Err(Failure::invalid(WsError::Domain(format!(
            "filter {:?} selects no invariant",
            suite.filter.unwrap_or_default()
        ))));
    }
    print_text(&table(&rows))?;
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        write_json(&dir.join("invariants.json"), &rows)?;
    }
    let failed: Vec<String> = rows
        .iter()
        .filter(|r| !r.passed)
        .map(|r| format!("{}.{}", r.module, r.name))
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::checks(format!("failed invariants: {}", failed.join(", "))))
    }
}
