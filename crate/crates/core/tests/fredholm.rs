mod common;

use std::sync::Arc;

use common::{manufactured, two_wave};
use hyperbolic1d::boundary::BoundaryOperator;
use hyperbolic1d::fredholm::*;
use hyperbolic1d::{HyperbolicSystem, TimeDomain};
use nalgebra::DVector;

fn zero_b() -> [[&'static str; 2]; 2] {
    [["0", "0"], ["0", "0"]]
}

fn nodes() -> Vec<f64> {
    (0..=16).map(|i| i as f64 / 16.0).collect()
}

#[test]
fn integrating_factor_closed_form() {
    let sys = HyperbolicSystem::parse(1, &["1"], &[&["0"]], &["0"], TimeDomain::Periodic).unwrap();
    let bc = BoundaryOperator::LinearReflection { r0: vec![vec![]], r1: vec![] };
    let ms = ModeSystem::new(Arc::new(sys), &bc).unwrap();
    let xs = nodes();
    let sol = solve_mode_diagonal(&ms.profiles, &ms.refl, 1, |_| DVector::from_element(1, C64::new(1.0, 0.0)), &xs).unwrap();
    for (i, &x) in xs.iter().enumerate() {
        let exact = (C64::new(1.0, 0.0) - C64::from_polar(1.0, -x)) / C64::new(0.0, 1.0);
        assert!((sol.u[i] - exact).norm() < 1e-10);
    }
}

#[test]
fn zero_forcing_gives_zero() {
    let ms = two_wave(zero_b(), 0.5, 0.5);
    let zero = |_: f64| DVector::from_element(2, C64::new(0.0, 0.0));
    for s in [-3, 0, 5] {
        let d = solve_mode_diagonal(&ms.profiles, &ms.refl, s, zero, &nodes()).unwrap();
        assert!(d.u.iter().all(|z| z.norm() == 0.0));
        let f = solve_mode_full(&ms, s, zero, &nodes()).unwrap();
        assert!(f.u.iter().all(|z| z.norm() < 1e-300));
    }
}

#[test]
fn diagonal_rejects_singular_mode() {
    let ms = two_wave(zero_b(), 1.0, 1.0);
    let f = |_: f64| DVector::from_element(2, C64::new(1.0, 0.0));
    let err = solve_mode_diagonal(&ms.profiles, &ms.refl, 0, f, &nodes()).unwrap_err();
    assert!(matches!(err, hyperbolic1d::Error::SingularMode { s: 0, .. }));
    let full = solve_mode_full(&ms, 0, f, &nodes()).unwrap();
    assert!(full.singular);
}

#[test]
fn coupled_mode_self_certifies() {
    let ms = two_wave([["0", "1"], ["1", "0"]], 0.5, 0.5);
    let f = |_: f64| DVector::from_element(2, C64::new(1.0, 0.0));
    let sol = solve_mode_full(&ms, 0, f, &nodes()).unwrap();
    assert!(sol.ode_residual.unwrap() <= 1e-10);
    assert!(sol.bc_residual <= 1e-10);
}

#[test]
fn uncoupled_operator_is_zero_and_blocks_conjugate() {
    let zero = two_wave(zero_b(), 0.5, 0.5);
    let grid = ModeGrid::new(8, 4, &[]).unwrap();
    let d = build_discrete_D(&zero, 8, grid.clone()).unwrap();
    assert!(d.block(3).unwrap().iter().all(|z| z.norm() == 0.0));

    let c = two_wave([["0", "1"], ["1", "0.5"]], 0.5, 0.5);
    let d = build_discrete_D(&c, 8, grid).unwrap();
    for s in 1..=8 {
        let p = d.block(s).unwrap();
        let q = d.block(-s).unwrap();
        let diff = p.iter().zip(q.iter()).map(|(a, b)| (a.conj() - b).norm()).fold(0.0, f64::max);
        assert!(diff < 1e-13, "s={s}: {diff}");
    }
}

#[test]
fn discrete_operator_refuses_singular_family() {
    let ms = two_wave(zero_b(), 1.0, 1.0);
    let grid = ModeGrid::new(8, 4, &[]).unwrap();
    assert!(build_discrete_D(&ms, 4, grid).is_err());
}

#[test]
fn inverse_matches_integrating_factor() {
    let ms = two_wave([["0.3", "0"], ["0", "-0.2"]], 0.5, 0.7);
    let grid = ModeGrid::new(8, 8, &[]).unwrap();
    let d = DiscreteOperator::new(&ms, 4, grid.clone());
    for s in [-4, 0, 3] {
        let g = d.inverse_a(s).unwrap();
        let fv = |x: f64| DVector::from_vec(vec![C64::new(x.sin(), 1.0), C64::new(x * x, -0.5)]);
        let nx = grid.len();
        let v = DVector::from_fn(2 * nx, |k, _| fv(grid.xs[k % nx])[k / nx]);
        let u = g * v;
        let exact = solve_mode_diagonal(&ms.profiles, &ms.refl, s, fv, &grid.xs).unwrap();
        let err = u.iter().zip(&exact.u).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-12, "s={s}: {err}");
    }
}

#[test]
fn uncoupled_solve_reduces_to_diagonal() {
    let ms = two_wave([["0.4", "0"], ["0", "0"]], 0.5, 0.5);
    let cfg = FredholmConfig { s_max: 3, ..Default::default() };
    let grid = cfg.grid(&ms).unwrap();
    let f = grid.field_from_fn(2, 3, 16, |j, x, t| (t + x).cos() + j as f64 * (2.0 * t).sin()).unwrap();
    let sol = fredholm_solve(&ms, &f, &cfg).unwrap();
    assert!(sol.solvable);
    for s in -3..=3i64 {
        let nx = grid.len();
        let fm = f.mode(s).to_vec();
        let fx = |x: f64| DVector::from_fn(2, |j, _| grid.interpolate(&fm[j * nx..(j + 1) * nx], x));
        let d = solve_mode_diagonal(&ms.profiles, &ms.refl, s, fx, &grid.xs).unwrap();
        let err = sol.u.mode(s).iter().zip(&d.u).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-10, "s={s}: {err}");
    }
}

#[test]
fn generic_margins_have_trivial_kernel() {
    let ms = two_wave(zero_b(), 0.5, 0.5);
    let cfg = FredholmConfig { s_max: 8, ..Default::default() };
    let rep = kernel_and_index(&ms, &cfg).unwrap();
    assert_eq!((rep.dim_ker, rep.dim_coker, rep.index), (Some(0), Some(0), Some(0)));
    assert!(adjoint_solve(&ms, &cfg).unwrap().is_empty());
}

#[test]
fn singular_fixture_kernel_is_constant() {
    let ms = two_wave(zero_b(), 1.0, 1.0);
    let cfg = FredholmConfig { s_max: 8, ..Default::default() };
    let rep = kernel_and_index(&ms, &cfg).unwrap();
    assert_eq!(rep.index, Some(0));
    assert_eq!(rep.kernel.len(), 1);
    let k = &rep.kernel[0];
    assert_eq!(k.s, 0);
    let first = k.values[0];
    assert!(k.values.iter().all(|z| (z - first).norm() < 1e-12 * first.norm()));
    let co = adjoint_solve(&ms, &cfg).unwrap();
    assert_eq!(co.len(), 1);
    let c0 = co[0].values[0];
    assert!(co[0].values.iter().all(|z| (z - c0).norm() < 1e-12 * c0.norm()));
    assert!(rep.gamma_invariant);
}

#[test]
fn manufactured_solution_is_recovered() {
    let ms = two_wave([["0", "0.7"], ["-0.4", "0"]], 0.5, 0.5);
    let cfg = FredholmConfig { s_max: 6, ..Default::default() };
    let grid = cfg.grid(&ms).unwrap();
    let (u, f) = manufactured(&ms, &grid, 4, 6, 11);
    let sol = fredholm_solve(&ms, &f, &cfg).unwrap();
    assert!(sol.solvable);
    assert!(w_norm(&sol.u.sub(&u).unwrap(), 0.0) < 1e-8);
    assert!(sol.max_cross_check.unwrap() < 1e-8);
    assert!(sol.reality_defect < 1e-12);
}
