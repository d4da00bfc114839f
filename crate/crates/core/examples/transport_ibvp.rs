//! Solves `u_t + u_x = 0` with `u(0,t) = sin t` and compares with `sin(t − x)`.

use hyperbolic1d::boundary::BoundaryOperator;
use hyperbolic1d::solver::{solve_ibvp, Problem, SolveConfig};
use hyperbolic1d::{CoefficientField, HyperbolicSystem, TimeDomain};

fn main() -> hyperbolic1d::Result<()> {
    let sys = HyperbolicSystem::parse(1, &["1"], &[&["0"]], &["0"], TimeDomain::HalfStrip { t0: 0.0 })?;
    let bc = BoundaryOperator::ClassicalTrace { h: vec![CoefficientField::parse("sin(t)")?] };
    let problem = Problem::new(sys, bc, Some(vec![CoefficientField::parse("sin(-x)")?]))?;
    for n in [26, 51, 101] {
        let cfg = SolveConfig { nx: n, nt: n, verify: None, ..Default::default() };
        let bundle = solve_ibvp(&problem, 2.0, &cfg)?;
        let u = &bundle.u;
        let mut err: f64 = 0.0;
        for (k, &t) in u.ts().iter().enumerate() {
            for (i, &x) in u.xs().iter().enumerate() {
                err = err.max((u.get(0, i, k) - (t - x).sin()).abs());
            }
        }
        println!("{n:>4} x {n:<4} nodal error {err:.2e}, fixed-point residual {:.2e}, slabs {}", bundle.residual, bundle.slabs.len());
    }
    Ok(())
}
