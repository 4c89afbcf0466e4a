//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on failure.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wsrot::averaging::{
    default_grid, f_h, f_h_at_splay, measured_drift, scan_and_root, sign_changes, AveragingConfig,
};
use wsrot::invariants::{random_mobius, random_state};
use wsrot::mobius::{chart, chart_inverse, cross_ratios, splay_lambda};
use wsrot::orbits::{
    check_order, find_limit_cycle, find_limit_cycle_from, integrate, max_phase_mismatch,
    splay_check, CycleConfig, IntegratorConfig, Stepper,
};
use wsrot::scalar::circle_distance;
use wsrot::torus_state::order_parameter;
use wsrot::ws_reduced::{fixed_point, z_series_splay};
use wsrot::{Complex, Convention, CrossRatios, MobiusParams, ModelSpec, PerturbationSpec, WsError, WsState};

const OMEGA: f64 = 0.8;
const KAPPA: f64 = -0.7;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn three_h(eps: f64) -> Vec<(&'static str, PerturbationSpec)> {
    vec![
        ("sin2", PerturbationSpec::sine(2, eps).unwrap()),
        (
            "-cos2",
            PerturbationSpec::new(BTreeMap::new(), BTreeMap::from([(2, -1.0)]), eps).unwrap(),
        ),
        (
            "mix",
            PerturbationSpec::new(BTreeMap::from([(2, 0.6)]), BTreeMap::from([(2, -0.8)]), eps)
                .unwrap(),
        ),
    ]
}

fn figure_scan() -> (Outcome, Outcome) {
    let grid: Vec<f64> = default_grid();
    let cfg = AveragingConfig::default();
    let expected_changes = [1usize, 1, 3];
    let mut pass1 = true;
    let mut pass2 = true;
    let mut d1 = Vec::new();
    let mut d2 = Vec::new();
    for ((name, h), want) in three_h(1.0).into_iter().zip(expected_changes) {
        let m = ModelSpec::generalized_rotator(OMEGA, KAPPA, h, 4).unwrap();
        let report = scan_and_root(&m, &grid, &cfg).unwrap();
        if report.failed > 0 {
            pass1 = false;
            pass2 = false;
            d1.push(format!("{name}: {} failed points", report.failed));
            continue;
        }
        let f: Vec<f64> = report.points.iter().map(|p| p.f_h.as_ref().unwrap()[0]).collect();
        let mid = grid.iter().position(|&l| (l - 0.5).abs() < 1e-12).unwrap();
        let changes = sign_changes(&f);
        let n = f.len();
        let trend = |end: usize, nb: usize| {
            let dist = |l: f64| l.min(1.0 - l);
            10.0 * f[nb].abs() * dist(grid[end]) / dist(grid[nb])
        };
        let low_ok = f[0].abs() < trend(0, 1);
        let high_ok = f[n - 1].abs() < trend(n - 1, n - 2);
        let ok1 = f[mid].abs() < 1e-6 && changes == want && low_ok && high_ok;
        pass1 &= ok1;
        d1.push(format!(
            "{name}: F(1/2)={:.1e} changes={changes} ends=({:.2e},{:.2e})",
            f[mid], f[0], f[n - 1]
        ));
        let anti = (0..n).map(|i| (f[i] + f[n - 1 - i]).abs()).fold(0.0, f64::max);
        pass2 &= anti < 1e-6;
        d2.push(format!("{name}: {anti:.1e}"));
    }
    (outcome(pass1, d1.join("; ")), outcome(pass2, d2.join("; ")))
}

fn splay_zero() -> Outcome {
    let cfg = AveragingConfig::default();
    let hs = [
        PerturbationSpec::sine(2, 1.0).unwrap(),
        PerturbationSpec::cosine(3, 1.0).unwrap(),
        PerturbationSpec::normalized(BTreeMap::from([(2, 1.0)]), BTreeMap::from([(3, 0.5)]), 1.0)
            .unwrap(),
    ];
    let mut worst_abs = 0.0f64;
    let mut worst_spread = 0.0f64;
    for n in [4, 5, 6, 8] {
        for h in &hs {
            let m = ModelSpec::generalized_rotator(OMEGA, KAPPA, h.clone(), n).unwrap();
            let s = f_h_at_splay(&m, &cfg).unwrap();
            worst_abs = worst_abs.max(s.max_abs);
            worst_spread = worst_spread.max(s.spread);
        }
    }
    outcome(
        worst_abs < 1e-6 && worst_spread < 1e-7,
        format!("max|F|={worst_abs:.1e} spread={worst_spread:.1e}"),
    )
}

fn cubic_oracle(omega: f64, kappa: f64) -> f64 {
    let k2 = kappa * kappa;
    let p = |x: f64| k2 * x.powi(3) + (2.0 * k2 - 1.0) * x * x + (k2 + 4.0 * omega * omega - 2.0) * x - 1.0;
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if p(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

fn truncated_field(omega: f64, kappa: f64, a: Complex<f64>) -> Complex<f64> {
    let i = Complex::new(0.0, 1.0);
    let zbar = a.conj();
    let f: Complex<f64> = 0.5 * i * (1.0 + kappa * zbar);
    i * (f * a * a + omega * a + f.conj())
}

fn fd_eigenvalues(omega: f64, kappa: f64, a: Complex<f64>) -> [Complex<f64>; 2] {
    let d = 1e-6;
    let col = |dir: Complex<f64>| {
        (truncated_field(omega, kappa, a + dir * d) - truncated_field(omega, kappa, a - dir * d))
            / (2.0 * d)
    };
    let cx = col(Complex::new(1.0, 0.0));
    let cy = col(Complex::new(0.0, 1.0));
    let tr = cx.re + cy.im;
    let det = cx.re * cy.im - cy.re * cx.im;
    let root = Complex::new(tr * tr / 4.0 - det, 0.0).sqrt();
    [tr / 2.0 + root, tr / 2.0 - root]
}

fn fixed_points() -> Outcome {
    let mut worst_x = 0.0f64;
    let mut worst_eig = 0.0f64;
    let mut worst_field = 0.0f64;
    let mut count = 0;
    for omega in [-0.9, -0.4, 0.0, 0.35, 0.8] {
        let threshold = 1.0 - omega * omega;
        for (sign, factor) in [(-1.0f64, 1.02f64), (-1.0, 1.7), (-1.0, 4.0), (1.0, 2.5)] {
            let kappa = sign * (factor * threshold).sqrt();
            let fp = fixed_point(omega, kappa).unwrap();
            worst_x = worst_x.max((fp.x - cubic_oracle(omega, kappa)).abs());
            worst_field = worst_field.max(truncated_field(omega, kappa, fp.alpha0).norm());
            let fd = fd_eigenvalues(omega, kappa, fp.alpha0);
            let e = (fd[0] - fp.eig[0]).norm().max((fd[1] - fp.eig[1]).norm());
            let swapped = (fd[0] - fp.eig[1]).norm().max((fd[1] - fp.eig[0]).norm());
            worst_eig = worst_eig.max(e.min(swapped));
            count += 1;
        }
    }
    let mut rejected = 0;
    for (omega, factor) in [
        (0.0f64, 0.5f64),
        (0.1, 0.9),
        (-0.2, 0.1),
        (0.3, 0.99),
        (-0.5, 0.7),
        (0.6, 0.3),
        (-0.7, 0.95),
        (0.8, 0.5),
        (0.9, 0.8),
        (-0.95, 0.2),
    ] {
        let kappa = -(factor * (1.0 - omega * omega)).sqrt();
        if matches!(fixed_point(omega, kappa), Err(WsError::NoFixedPoint { .. })) {
            rejected += 1;
        }
    }
    outcome(
        count == 20 && worst_x < 1e-12 && worst_eig < 1e-6 && worst_field < 1e-10 && rejected == 10,
        format!(
            "grid={count} |dx|={worst_x:.1e} |d eig|={worst_eig:.1e} |field|={worst_field:.1e} rejected={rejected}/10"
        ),
    )
}

fn conservation() -> Outcome {
    let fp = fixed_point(OMEGA, KAPPA).unwrap();
    let t_ref = TAU / fp.omega_rot.abs();
    let cfg = IntegratorConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    let mut ordered = true;
    for n in 4..=10 {
        let m = ModelSpec::classic_rotator(OMEGA, KAPPA, n).unwrap();
        for _ in 0..20 {
            let s0 = random_state(&mut rng, n, 0.02).unwrap();
            let l0 = cross_ratios(&s0, Convention::Consecutive).unwrap();
            let traj = integrate(&m, &s0, (0.0, t_ref), &cfg).unwrap();
            for y in &traj.states {
                ordered &= check_order(y, cfg.sep_min).is_ok();
                let s = wsrot::PhaseState::from_lifted(y).unwrap();
                let l = cross_ratios(&s, Convention::Consecutive).unwrap();
                for (a, b) in l.values().iter().zip(l0.values()) {
                    worst = worst.max((a - b).abs());
                }
            }
        }
    }
    outcome(
        worst < 1e-7 && ordered,
        format!("T={t_ref:.3} max drift={worst:.1e} ordered={ordered}"),
    )
}

fn params_distance(a: &MobiusParams, b: &MobiusParams) -> f64 {
    (a.alpha() - b.alpha()).norm().max(circle_distance(a.psi(), b.psi()))
}

fn chart_and_group() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst_rt = 0.0f64;
    for i in 0..1000 {
        let n = 4 + i % 9;
        let s = random_state(&mut rng, n, 0.02).unwrap();
        let back = chart(&chart_inverse(&s).unwrap()).unwrap();
        worst_rt = worst_rt.max(max_phase_mismatch(s.phases(), back.phases()));
        let leaf = cross_ratios(&random_state(&mut rng, n, 0.02).unwrap(), Convention::Canonical).unwrap();
        let w = WsState { mobius: random_mobius(&mut rng, 0.8), lambda: leaf };
        let w2 = chart_inverse(&chart(&w).unwrap()).unwrap();
        worst_rt = worst_rt.max(params_distance(&w.mobius, &w2.mobius));
        for (a, b) in w.lambda.values().iter().zip(w2.lambda.values()) {
            worst_rt = worst_rt.max((a - b).abs());
        }
    }
    let mut worst_group = 0.0f64;
    let id = MobiusParams::identity();
    for _ in 0..1000 {
        let a = random_mobius(&mut rng, 0.9);
        let b = random_mobius(&mut rng, 0.9);
        let c = random_mobius(&mut rng, 0.9);
        let assoc = params_distance(
            &a.compose(&b).unwrap().compose(&c).unwrap(),
            &a.compose(&b.compose(&c).unwrap()).unwrap(),
        );
        let ident = params_distance(&a.compose(&id).unwrap(), &a)
            .max(params_distance(&id.compose(&a).unwrap(), &a));
        let inv = params_distance(&a.compose(&a.inverse()).unwrap(), &id)
            .max(params_distance(&a.inverse().compose(&a).unwrap(), &id));
        let z = Complex::from_polar(0.7, 1.3);
        let action = (a.compose(&b).unwrap().apply(z) - a.apply(b.apply(z))).norm();
        worst_group = worst_group.max(assoc).max(ident).max(inv).max(action);
    }
    outcome(
        worst_rt < 1e-9 && worst_group < 1e-10,
        format!("round trip={worst_rt:.1e} group={worst_group:.1e}"),
    )
}

fn splay_symmetry() -> Outcome {
    let m = ModelSpec::classic_rotator(OMEGA, KAPPA, 10).unwrap();
    let cfg = CycleConfig::default();
    let orb = find_limit_cycle(&m, &splay_lambda(10, Convention::Consecutive).unwrap(), &cfg).unwrap();
    let rep = splay_check(&orb, 1e-6).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let s = random_state(&mut rng, 10, 0.05).unwrap();
    let generic = find_limit_cycle_from(&m, &s, Convention::Consecutive, &cfg).unwrap();
    let grep = splay_check(&generic, 1e-6).unwrap();
    outcome(
        rep.is_splay && rep.max_shift_error < 1e-6 && grep.max_shift_error > 1e-2,
        format!(
            "splay error={:.1e} (T={:.3}) generic error={:.2}",
            rep.max_shift_error, rep.period, grep.max_shift_error
        ),
    )
}

fn series_decay() -> Outcome {
    let alpha = Complex::new(0.5, 0.0);
    let psis: Vec<f64> = (0..720).map(|i| -PI + TAU * i as f64 / 720.0).collect();
    let mut sups = Vec::new();
    let mut worst_match = 0.0f64;
    for n in 6..=12 {
        let lambda = splay_lambda(n, Convention::Canonical).unwrap();
        let mut sup = 0.0f64;
        for &psi in &psis {
            let z = z_series_splay(alpha, psi, n, 1e-15).unwrap();
            sup = sup.max((z - alpha).norm());
            let w = WsState { mobius: MobiusParams::new(alpha, psi).unwrap(), lambda: lambda.clone() };
            let direct = order_parameter(&chart(&w).unwrap()).z;
            worst_match = worst_match.max((direct - z).norm());
        }
        sups.push(sup);
    }
    let ratios: Vec<f64> = sups.windows(2).map(|w| w[1] / w[0]).collect();
    let ok = ratios.iter().all(|&r| (0.4..=0.6).contains(&r));
    let shown: Vec<String> = ratios.iter().map(|r| format!("{r:.3}")).collect();
    outcome(
        ok && worst_match < 1e-9,
        format!("ratios=[{}] series-direct={worst_match:.1e}", shown.join(",")),
    )
}

fn averaging_consistency() -> (Outcome, String) {
    let eps = 1e-3;
    let cfg = AveragingConfig::default();
    let lambdas = [0.3, 0.5, 0.7];
    let mut pass = true;
    let mut details = Vec::new();
    let mut info = Vec::new();
    for (idx, (name, h)) in three_h(eps).into_iter().enumerate() {
        let m = ModelSpec::generalized_rotator(OMEGA, KAPPA, h, 4).unwrap();
        let mut pred = Vec::new();
        let mut meas = Vec::new();
        for &l in &lambdas {
            let leaf = CrossRatios::consecutive(vec![l]).unwrap();
            pred.push(eps * f_h(&m, &leaf, &cfg).unwrap().f_h[0]);
            meas.push(measured_drift(&m, &leaf, 1, &cfg).unwrap().rate[0]);
        }
        let scale = pred.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let rel: Vec<f64> = pred
            .iter()
            .zip(&meas)
            .map(|(p, q)| (p - q).abs() / if p.abs() >= 0.1 * scale { p.abs() } else { scale })
            .collect();
        let worst = rel.iter().fold(0.0f64, |a, &v| a.max(v));
        let line = format!(
            "{name}: rel=[{}]",
            rel.iter().map(|r| format!("{r:.3}")).collect::<Vec<_>>().join(",")
        );
        if idx < 2 {
            pass &= worst < 0.15;
            details.push(line);
        } else {
            info.push(format!("{line} (small |F|, reported only)"));
        }
    }
    (outcome(pass, details.join("; ")), info.join("; "))
}

/// Error of the wrapped single-unit RK4 solution at `t1 = k T_p`, where the exact
/// phase is `2 pi k + omega (t1 - k T_p)` for `phi' = omega - sin phi`, `phi(0) = 0`,
/// `omega = 5/4`, `T_p = 2 pi / sqrt(omega^2 - 1) = 8 pi / 3`.
fn single_unit_error(m: &ModelSpec, dt: f64, k: u32) -> f64 {
    let omega = 1.25;
    let pi_lo = 1.224_646_799_147_353_2e-16;
    let tp_hi = 8.0 * PI / 3.0;
    let tp_lo = (8.0 * pi_lo - 3.0f64.mul_add(tp_hi, -8.0 * PI)) / 3.0;
    let kf = f64::from(k);
    let t1 = kf * tp_hi;
    let dt_exact = -kf.mul_add(tp_hi, -t1) - kf * tp_lo;
    let cfg = IntegratorConfig::rk4(dt);
    let mut st = Stepper::new(m, 0.0, &[0.0], &cfg).unwrap().with_wrapping(true);
    st.advance_to(t1).unwrap();
    let turns = (st.winding() - i64::from(k)) as f64;
    (st.y()[0] + turns * TAU - omega * dt_exact).abs()
}

fn integrator_order() -> Outcome {
    let m = ModelSpec::classic_rotator(1.25, KAPPA, 1).unwrap();
    let dts = [4e-3, 2e-3, 1e-3, 5e-4];
    let errs: Vec<f64> = dts.iter().map(|&dt| single_unit_error(&m, dt, 120)).collect();
    let xs: Vec<f64> = dts.iter().map(|d| d.ln()).collect();
    let ys: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / 4.0, ys.iter().sum::<f64>() / 4.0);
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    outcome(
        (slope - 4.0).abs() <= 0.2,
        format!("slope={slope:.3} errors=[{}]", errs.iter().map(|e| format!("{e:.2e}")).collect::<Vec<_>>().join(",")),
    )
}

fn main() {
    let mut all = true;
    let mut report = |id: usize, title: &str, secs: f64, o: &Outcome| {
        all &= o.pass;
        println!(
            "criterion {id:>2} {} {title} ({secs:.1}s): {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
    };

    let t = Instant::now();
    let (c1, c2) = figure_scan();
    let secs = t.elapsed().as_secs_f64();
    report(1, "N=4 averaged drift scan", secs, &c1);
    report(2, "antisymmetry about 1/2", secs, &c2);

    let t = Instant::now();
    let o = splay_zero();
    report(3, "averaged drift vanishes at splay", t.elapsed().as_secs_f64(), &o);

    let t = Instant::now();
    let o = fixed_points();
    report(4, "truncated fixed point and spectrum", t.elapsed().as_secs_f64(), &o);

    let t = Instant::now();
    let o = conservation();
    report(5, "cross-ratio conservation and ordering", t.elapsed().as_secs_f64(), &o);

    let t = Instant::now();
    let o = chart_and_group();
    report(6, "chart bijectivity and group laws", t.elapsed().as_secs_f64(), &o);

    let t = Instant::now();
    let o = splay_symmetry();
    report(7, "splay spatio-temporal symmetry", t.elapsed().as_secs_f64(), &o);

    let t = Instant::now();
    let o = series_decay();
    report(8, "mean-field series decay", t.elapsed().as_secs_f64(), &o);

    let t = Instant::now();
    let (o, info) = averaging_consistency();
    report(9, "first-order averaging vs simulation", t.elapsed().as_secs_f64(), &o);
    println!("             info: {info}");

    let t = Instant::now();
    let o = integrator_order();
    report(10, "RK4 convergence order", t.elapsed().as_secs_f64(), &o);

    if !all {
        println!("acceptance: FAILED");
        std::process::exit(1);
    }
    println!("acceptance: all criteria passed");
}
