//! Acceptance criteria 1–9. Each test prints one `criterion N: PASS|FAIL` line
//! with the measured values next to the pinned tolerances.

mod common;

use std::f64::consts::E;
use std::io::Write;
use std::sync::Arc;

use common::{manufactured, rng, two_wave};
use hyperbolic1d::boundary::{contraction_check, BoundaryOperator, ContractionOptions, ZMap};
use hyperbolic1d::characteristics::Tracer;
use hyperbolic1d::fredholm::*;
use hyperbolic1d::grid::{linspace, GridFunction, Interpolation};
use hyperbolic1d::operators::OperatorContext;
use hyperbolic1d::population::{renewal_boundary, AgeModel};
use hyperbolic1d::smoothing::{regularity_profile, smoothing_time, track_singularity, ProfileOptions};
use hyperbolic1d::solver::{solve_ibvp, Problem, SolveConfig, Solver};
use hyperbolic1d::{CoefficientField, Error, HyperbolicSystem, TimeDomain};
use nalgebra::DVector;
use rand::Rng;

fn verdict(n: u32, pass: bool, detail: String) {
    // written to the raw handle so the line survives libtest's output capture
    let line = format!("criterion {n}: {} | {detail}\n", if pass { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(pass, "criterion {n} failed: {detail}");
}

fn field(src: &str) -> CoefficientField {
    CoefficientField::parse(src).unwrap()
}

fn scalar_problem(a: &str, b: &str, domain: TimeDomain, bc: BoundaryOperator, phi: Option<&str>) -> Problem {
    let sys = HyperbolicSystem::parse(1, &[a], &[&[b]], &["0"], domain).unwrap();
    Problem::new(sys, bc, phi.map(|p| vec![field(p)])).unwrap()
}

fn classical(h: &str) -> BoundaryOperator {
    BoundaryOperator::ClassicalTrace { h: vec![field(h)] }
}

// ---------------------------------------------------------------- criterion 1

/// Largest error against `sin(t − x)` at the nodes and at the cell centres.
fn transport_errors(n: usize) -> (f64, f64) {
    let p = scalar_problem("1", "0", TimeDomain::HalfStrip { t0: 0.0 }, classical("sin(t)"), Some("sin(-x)"));
    let cfg = SolveConfig {
        nx: n,
        nt: n,
        verify: None,
        ..Default::default()
    };
    let u = solve_ibvp(&p, 2.0, &cfg).unwrap().u;
    let mut nodal: f64 = 0.0;
    for (k, &t) in u.ts().iter().enumerate() {
        for (i, &x) in u.xs().iter().enumerate() {
            nodal = nodal.max((u.get(0, i, k) - (t - x).sin()).abs());
        }
    }
    let mut centre: f64 = 0.0;
    for k in 0..u.nt() - 1 {
        let t = 0.5 * (u.ts()[k] + u.ts()[k + 1]);
        for i in 0..u.nx() - 1 {
            let x = 0.5 * (u.xs()[i] + u.xs()[i + 1]);
            centre = centre.max((u.eval(0, x, t) - (t - x).sin()).abs());
        }
    }
    (nodal, centre)
}

#[test]
fn criterion_1_transport_exactness() {
    const TOL: f64 = 1e-6;
    const RATIO: f64 = 3.0;
    let (nodal, fine) = transport_errors(201);
    let (_, coarse) = transport_errors(101);
    let ratio = coarse / fine;
    verdict(
        1,
        nodal <= TOL && ratio >= RATIO,
        format!("nodal error {nodal:.3e} (tol {TOL:e}) at 201x201, centre error 101->201 ratio {ratio:.3} (min {RATIO})"),
    );
}

// ---------------------------------------------------------------- criterion 2

fn two_wave_periodic(b: [[&str; 2]; 2], f: [&str; 2]) -> Problem {
    let sys = HyperbolicSystem::parse(1, &["1", "-1"], &[&b[0], &b[1]], &f, TimeDomain::Periodic).unwrap();
    let bc = BoundaryOperator::LinearReflection {
        r0: vec![vec![0.5]],
        r1: vec![vec![0.5]],
    };
    Problem::new(sys, bc, None).unwrap()
}

#[test]
fn criterion_2_integral_identities() {
    let cfg = SolveConfig {
        nx: 81,
        nt: 256,
        tol: 1e-8,
        interpolation: Interpolation::Bicubic,
        verify: None,
        ..Default::default()
    };
    let fixtures = [
        ("decoupled", two_wave_periodic([["0.5", "0"], ["0", "0.25"]], ["cos(t)", "sin(t) + x"])),
        ("coupled", two_wave_periodic([["0", "1"], ["1", "0"]], ["cos(t)", "sin(t) + x"])),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, p) in &fixtures {
        let mut s = Solver::new(p, &cfg).unwrap();
        let u = s.solve_periodic(None).unwrap().u;
        let abstr = s.abstr_residual(&u, 17, 19).unwrap();
        let io = s.io_residual(&u, 17, 19).unwrap();
        pass &= abstr <= 2.0 * cfg.tol && io <= 2.0 * cfg.tol;
        parts.push(format!("{name}: abstr {abstr:.2e}, io {io:.2e}"));
    }
    verdict(2, pass, format!("{} (bound 2 x tol = {:e})", parts.join("; "), 2.0 * cfg.tol));
}

// ---------------------------------------------------------------- criterion 3

struct SmoothingRun {
    orders: Vec<usize>,
    t2: Option<f64>,
    early_jump: f64,
    late_jump: f64,
    late_noise: f64,
}

fn smoothing_run(speed: &str) -> SmoothingRun {
    let p = scalar_problem(
        speed,
        "0",
        TimeDomain::HalfStrip { t0: 0.0 },
        classical("0.5 + sin(t)"),
        Some("abs(x - 0.5)"),
    );
    let cfg = SolveConfig {
        nx: 51,
        nt: 151,
        verify: None,
        ..Default::default()
    };
    let (profile, grids) = regularity_profile(&p, 3.0, &cfg, &ProfileOptions::unit_windows(0.0, 3.0), 3).unwrap();
    let tracer = Tracer::new(p.sys.clone());
    let track = track_singularity(grids.last().unwrap(), &tracer, 0.5, 0.0).unwrap();
    SmoothingRun {
        orders: profile.orders(),
        t2: smoothing_time(&profile, 2),
        early_jump: track.min_jump_du(0, (0.0, 0.4)).unwrap(),
        late_jump: track.max_jump_du(0, (1.0, 3.0)).unwrap_or(0.0),
        late_noise: track.max_noise(0, (1.0, 3.0)).unwrap_or(0.0),
    }
}

#[test]
fn criterion_3_classical_smoothing() {
    const JUMP: f64 = 2.0;
    const JUMP_REL: f64 = 0.05;
    const NOISE_FACTOR: f64 = 10.0;
    let pos = smoothing_run("1");
    let neg = smoothing_run("0.1");
    let slack = 1.0 + 1.0;
    let pass = pos.orders[0] == 0
        && pos.orders[1..].iter().all(|&k| k >= 2)
        && pos.t2.is_some_and(|t| t <= slack)
        && (pos.early_jump - JUMP).abs() <= JUMP_REL * JUMP
        && pos.late_jump <= NOISE_FACTOR * pos.late_noise
        && (neg.late_jump - JUMP).abs() <= JUMP_REL * JUMP
        && neg.orders.iter().all(|&k| k == 0);
    verdict(
        3,
        pass,
        format!(
            "orders {:?}, T(2) {:?}, jump {:.4} -> {:.3e} (noise {:.3e}); control orders {:?}, jump {:.4}",
            pos.orders, pos.t2, pos.early_jump, pos.late_jump, pos.late_noise, neg.orders, neg.late_jump
        ),
    );
}

// ---------------------------------------------------------------- criterion 4

fn age_problem(phi: &str) -> Problem {
    let bc = BoundaryOperator::IntegralAge {
        h: ZMap::parse("z").unwrap(),
        gamma: CoefficientField::constant(1.0),
    };
    scalar_problem("1", "0", TimeDomain::HalfStrip { t0: 0.0 }, bc, Some(phi))
}

#[test]
fn criterion_4_population_smoothing() {
    const STEADY_TOL: f64 = 1e-10;
    const TRACE_TOL: f64 = 1e-6;
    let steady_cfg = SolveConfig {
        nx: 21,
        nt: 61,
        tol: 1e-13,
        ..Default::default()
    };
    let steady = solve_ibvp(&age_problem("1"), 3.0, &steady_cfg).unwrap();
    let steady_dev = steady.u.component(0).iter().fold(0.0f64, |m, v| m.max((v - 1.0).abs()));

    let p = age_problem("piecewise(x < 0.5, 1, 0)");
    let cfg = SolveConfig {
        nx: 101,
        nt: 301,
        tol: 1e-12,
        verify: None,
        ..Default::default()
    };
    let u = solve_ibvp(&p, 3.0, &cfg).unwrap().u;
    let BoundaryOperator::IntegralAge { h, gamma } = &p.bc else { unreachable!() };
    let model = AgeModel::new(
        OperatorContext::new(Arc::new(Tracer::new(p.sys.clone()))),
        gamma.clone(),
        h.clone(),
        Some(field("piecewise(x < 0.5, 1, 0)")),
        cfg.panels_per_unit,
    )
    .unwrap();
    let renewal = renewal_boundary(&model, u.ts(), &[], 1e-14, 200).unwrap();
    let trace_gap = (0..u.nt())
        .map(|k| (u.get(0, 0, k) - renewal.values[k]).abs())
        .fold(0.0, f64::max);

    let profile_cfg = SolveConfig {
        nx: 51,
        nt: 151,
        verify: None,
        ..Default::default()
    };
    let (profile, _) = regularity_profile(&p, 3.0, &profile_cfg, &ProfileOptions::unit_windows(0.0, 3.0), 3).unwrap();
    let orders = profile.orders();
    let pass = steady_dev <= STEADY_TOL && trace_gap <= TRACE_TOL && orders[0] == 0 && orders[2] >= 1;
    verdict(
        4,
        pass,
        format!(
            "steady deviation {steady_dev:.2e} (tol {STEADY_TOL:e}), renewal vs solver {trace_gap:.2e} (tol {TRACE_TOL:e}), orders {orders:?}"
        ),
    );
}

// ---------------------------------------------------------------- criterion 5

fn dissipative(b: &str) -> Problem {
    let bc = BoundaryOperator::DissipativeNonlinear {
        h: vec![ZMap::parse("0.5*z1 + cos(t)").unwrap()],
    };
    scalar_problem("1", b, TimeDomain::Periodic, bc, None)
}

#[test]
fn criterion_5_dissipative_contraction() {
    const TOL: f64 = 1e-8;
    let kappa: f64 = 0.5;
    let mut pass = true;
    let mut parts = Vec::new();
    for (b, order, closed) in [("0", 2, 1.0 - kappa.abs()), ("-1", 0, 1.0 - E * kappa.abs())] {
        let p = dissipative(b);
        let tracer = Tracer::new(p.sys.clone());
        let rep = contraction_check(&tracer, &p.bc, order, &ContractionOptions::new(1, (0.0, 6.0))).unwrap();
        let dev = rep.margins.iter().map(|m| (m.margin - closed).abs()).fold(0.0, f64::max);
        let cfg = SolveConfig {
            nx: 41,
            nt: 64,
            max_iter: 200,
            verify: None,
            ..Default::default()
        };
        let outcome = Solver::new(&p, &cfg).unwrap().solve_periodic(None);
        let converged = match outcome {
            Ok(_) => true,
            Err(Error::NonConvergence { .. }) => false,
            Err(e) => panic!("unexpected error {e}"),
        };
        pass &= dev <= TOL && converged == (rep.min_margin() > 0.0);
        parts.push(format!(
            "b={b}: margin {:.10} vs {closed:.10} (dev {dev:.1e}), converged {converged}",
            rep.min_margin()
        ));
    }
    verdict(5, pass, format!("{} (tol {TOL:e})", parts.join("; ")));
}

// ---------------------------------------------------------------- criterion 6

#[test]
fn criterion_6_isomorphism() {
    const AGREE: f64 = 1e-10;
    const RECOVER: f64 = 1e-8;
    let ms = two_wave([["0.3", "0"], ["0", "0.2*x"]], 0.5, 0.5);
    let plain = two_wave([["0", "0"], ["0", "0"]], 0.5, 0.5);
    let iso = iso_margins(&plain.sys, &plain.profiles, &plain.refl, 64);
    let iso_ok = iso.torus_bound == 0.75 && (iso.min_margin - 0.75).abs() <= f64::EPSILON && iso.torus_exact;

    let xs = linspace(0.0, 1.0, 21);
    let f = |x: f64| DVector::from_vec(vec![C64::new(x.cos(), 0.3), C64::new(1.0 - x * x, -x)]);
    let mut worst: f64 = 0.0;
    for s in -64..=64 {
        let d = solve_mode_diagonal(&ms.profiles, &ms.refl, s, f, &xs).unwrap();
        let full = solve_mode_full(&ms, s, f, &xs).unwrap();
        let e = d.u.iter().zip(&full.u).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        worst = worst.max(e);
    }

    let cfg = FredholmConfig::default();
    let grid = cfg.grid(&ms).unwrap();
    let (u, rhs) = manufactured(&ms, &grid, 8, cfg.s_max, 6);
    let sol = fredholm_solve(&ms, &rhs, &cfg).unwrap();
    let err = w_norm(&sol.u.sub(&u).unwrap(), 0.0);
    let pass = iso_ok && worst <= AGREE && err <= RECOVER && sol.solvable;
    verdict(
        6,
        pass,
        format!(
            "torus bound {} (exact {}), sampled min {}, diagonal vs full {worst:.2e} (tol {AGREE:e}) for |s| <= 64, manufactured W0 error {err:.2e} (tol {RECOVER:e})",
            iso.torus_bound, iso.torus_exact, iso.min_margin
        ),
    );
}

// ---------------------------------------------------------------- criterion 7

#[test]
fn criterion_7_index_zero() {
    const GAP: f64 = 1e6;
    const PERTURB: f64 = 1e-2;
    let cfg = FredholmConfig::default();
    let ms = two_wave([["0", "0"], ["0", "0"]], 1.0, 1.0);
    let rep = kernel_and_index(&ms, &cfg).unwrap();
    let gap = rep.min_gap_ratio.unwrap_or(0.0);
    let mut pass = rep.dim_ker == Some(1) && rep.dim_coker == Some(1) && gap >= GAP;
    let mut indices = Vec::new();
    let mut r = rng(7);
    for _ in 0..3 {
        let e: Vec<String> = (0..4)
            .map(|_| format!("{:.17e}", PERTURB * if r.gen_bool(0.5) { 1.0 } else { -1.0 } * r.gen_range(0.5..1.0)))
            .collect();
        let perturbed = two_wave([[&e[0], &e[1]], [&e[2], &e[3]]], 1.0, 1.0);
        let rp = kernel_and_index(&perturbed, &FredholmConfig { s_max: 16, ..cfg.clone() }).unwrap();
        pass &= rp.index == Some(0);
        indices.push((rp.dim_ker, rp.dim_coker, rp.index));
    }
    verdict(
        7,
        pass,
        format!(
            "dim ker {:?}, dim coker {:?}, gap ratio {gap:.2e} (min {GAP:e}); perturbed (ker, coker, index): {indices:?}",
            rep.dim_ker, rep.dim_coker
        ),
    );
}

// ---------------------------------------------------------------- criterion 8

#[test]
fn criterion_8_orthogonality() {
    const TOL: f64 = 1e-8;
    const ANGLE: f64 = 1e-4;
    let ms = two_wave([["0", "0"], ["0", "0"]], 1.0, 1.0);
    let cfg = FredholmConfig { s_max: 16, ..Default::default() };
    let grid = cfg.grid(&ms).unwrap();

    let (_, range_f) = manufactured(&ms, &grid, 6, cfg.s_max, 8);
    let solved = fredholm_solve(&ms, &range_f, &cfg).unwrap();

    let co = grid.field_from_fn(2, cfg.s_max, 64, |_, _, _| 1.0).unwrap();
    let blocked = fredholm_solve(&ms, &co, &cfg).unwrap();
    let obstruction_gap = (blocked.obstruction - blocked.f_norm).abs();

    let rep = kernel_and_index(&ms, &cfg).unwrap();
    let pass = solved.solvable
        && solved.residual <= TOL
        && solved.obstruction <= TOL
        && !blocked.solvable
        && obstruction_gap <= TOL
        && rep.max_cokernel_angle <= ANGLE;
    verdict(
        8,
        pass,
        format!(
            "range f: residual {:.2e}, pairing {:.2e}; cokernel f: solvable {}, obstruction {:.12} vs norm {:.12} (gap {obstruction_gap:.1e}); cokernel angle {:.2e} (max {ANGLE:e}); tol {TOL:e}",
            solved.residual, solved.obstruction, blocked.solvable, blocked.obstruction, blocked.f_norm, rep.max_cokernel_angle
        ),
    );
}

// ---------------------------------------------------------------- criterion 9

#[test]
fn criterion_9_parametrix() {
    const DECAY: f64 = 1e3;
    let ms = two_wave([["0", "1"], ["1", "0"]], 0.5, 0.5);
    let cfg = FredholmConfig::default();
    let rep = kernel_and_index(&ms, &cfg).unwrap();
    assert_eq!(rep.grid_nodes, 64);
    let identity = rep
        .parametrix
        .iter()
        .all(|p| p.identity_defect_eps <= p.dimension as f64);
    let at = |s: i64| rep.parametrix.iter().find(|p| p.s == s).unwrap();
    let decay0 = at(0).d2_decay;
    let table: Vec<String> = [1, 4, 16, 64].iter().map(|&s| format!("s={s}: {:.1e}", at(s).d2_decay)).collect();
    // whole operator: mid-spectrum of every block against the largest block
    let top = rep.parametrix.iter().map(|p| p.d2_singular_values[0]).fold(0.0, f64::max);
    let mid = rep
        .parametrix
        .iter()
        .map(|p| p.d2_singular_values[0] / p.d2_decay)
        .fold(0.0, f64::max);
    let global = top / mid;
    verdict(
        9,
        identity && decay0 >= DECAY && global >= DECAY,
        format!(
            "identity defect max {:.1} eps (bound: block dimension {}), D^2 decay at s=0 {decay0:.2e}, across all blocks {global:.2e} (min {DECAY:e}); per-block decay {}",
            rep.max_identity_defect_eps,
            at(0).dimension,
            table.join(", ")
        ),
    );
}

// ---------------------------------------------------------------- round trip

#[test]
fn warm_start_from_csv_does_not_increase_residual() {
    let p = two_wave_periodic([["0", "1"], ["1", "0"]], ["cos(t)", "sin(t) + x"]);
    let cfg = SolveConfig {
        nx: 21,
        nt: 32,
        ..Default::default()
    };
    let first = Solver::new(&p, &cfg).unwrap().solve_periodic(None).unwrap();
    let mut buf = Vec::new();
    hyperbolic1d::report::write_field_csv(&mut buf, &first.u).unwrap();
    let back: GridFunction = hyperbolic1d::report::read_field_csv(&buf[..], true).unwrap();
    let second = Solver::new(&p, &cfg).unwrap().solve_periodic(Some(&back)).unwrap();
    assert!(second.residual <= first.residual.max(f64::EPSILON), "{} > {}", second.residual, first.residual);
    assert!(second.iterations <= first.iterations);
}
