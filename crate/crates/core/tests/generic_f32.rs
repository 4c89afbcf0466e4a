use wsrot::mobius::{chart, chart_inverse, cross_ratios, splay_lambda};
use wsrot::orbits::{find_limit_cycle, integrate_final, max_phase_mismatch, CycleConfig, IntegratorConfig};
use wsrot::torus_state::order_parameter;
use wsrot::ws_reduced::{fixed_point, z_series_splay};
use wsrot::{Complex32, Convention, MobiusParams32, ModelSpec, ModelSpec32, PhaseState32, WsState};

#[test]
fn chart_round_trip_in_single_precision() {
    let s = PhaseState32::canonicalize(&[-2.9, -1.2, 0.4, 1.1, 2.6]).unwrap();
    let back = chart(&chart_inverse(&s).unwrap()).unwrap();
    assert!(max_phase_mismatch(s.phases(), back.phases()) < 1e-4);
    let l = cross_ratios(&s, Convention::Consecutive).unwrap();
    assert!(l.values().iter().all(|&v| v > 0.0 && v < 1.0));
}

#[test]
fn fixed_point_agrees_with_double_precision() {
    let a = fixed_point(0.8f32, -0.7f32).unwrap();
    let b = fixed_point(0.8f64, -0.7f64).unwrap();
    assert!((f64::from(a.x) - b.x).abs() < 1e-5);
    assert!((f64::from(a.omega_rot) - b.omega_rot).abs() < 1e-5);
}

#[test]
fn series_matches_direct_sum_in_single_precision() {
    let alpha = Complex32::new(0.3, -0.2);
    let lambda = splay_lambda::<f32>(7, Convention::Canonical).unwrap();
    let w = WsState { mobius: MobiusParams32::new(alpha, 0.7).unwrap(), lambda };
    let direct = order_parameter(&chart(&w).unwrap()).z;
    let series = z_series_splay(alpha, 0.7, 7, 1e-7).unwrap();
    assert!((direct - series).norm() < 1e-5);
}

#[test]
fn integrator_runs_in_single_precision() {
    let m = ModelSpec32::classic_rotator(1.25, 0.0, 1).unwrap();
    let period = 8.0 * std::f32::consts::PI / 3.0;
    let cfg = IntegratorConfig::<f32> { rtol: 1e-6, atol: 1e-7, ..IntegratorConfig::default() };
    let y = integrate_final(&m, &[0.0], 0.0, period, &cfg).unwrap();
    assert!((y[0] - 2.0 * std::f32::consts::PI).abs() < 1e-4);
}

#[test]
fn splay_cycle_in_single_precision() {
    let m = ModelSpec32::classic_rotator(0.8, -0.7, 4).unwrap();
    let cfg = CycleConfig::<f32> {
        integrator: IntegratorConfig { rtol: 1e-6, atol: 1e-7, ..IntegratorConfig::default() },
        residual_tol: 1e-4,
        samples: 256,
        ..CycleConfig::default()
    };
    let lambda = splay_lambda::<f32>(4, Convention::Consecutive).unwrap();
    let orb = find_limit_cycle(&m, &lambda, &cfg).unwrap();
    let reference = find_limit_cycle(
        &ModelSpec::classic_rotator(0.8, -0.7, 4).unwrap(),
        &splay_lambda::<f64>(4, Convention::Consecutive).unwrap(),
        &CycleConfig::default(),
    )
    .unwrap();
    assert!((f64::from(orb.period) - reference.period).abs() < 1e-2 * reference.period);
}
