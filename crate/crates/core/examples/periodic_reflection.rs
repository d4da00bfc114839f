//! Time-periodic solution of a coupled two-wave system with partial reflection
//! at both ends, checked against both integral identities.

use hyperbolic1d::boundary::BoundaryOperator;
use hyperbolic1d::grid::Interpolation;
use hyperbolic1d::solver::{Problem, SolveConfig, Solver};
use hyperbolic1d::{HyperbolicSystem, TimeDomain};

fn main() -> hyperbolic1d::Result<()> {
    let sys = HyperbolicSystem::parse(
        1,
        &["1", "-1"],
        &[&["0", "1"], &["1", "0"]],
        &["cos(t)", "sin(t) + x"],
        TimeDomain::Periodic,
    )?;
    let bc = BoundaryOperator::LinearReflection { r0: vec![vec![0.5]], r1: vec![vec![0.5]] };
    let problem = Problem::new(sys, bc, None)?;
    let cfg = SolveConfig {
        nx: 41,
        nt: 128,
        tol: 1e-10,
        interpolation: Interpolation::Bicubic,
        ..Default::default()
    };
    let mut solver = Solver::new(&problem, &cfg)?;
    let bundle = solver.solve_periodic(None)?;
    println!("iterations {}, residual {:.2e}, verification {:?}", bundle.iterations, bundle.residual, bundle.verification_residual);
    println!("abstract identity defect {:.2e}", solver.abstr_residual(&bundle.u, 9, 11)?);
    println!("input-output identity defect {:.2e}", solver.io_residual(&bundle.u, 9, 11)?);
    println!("u(0.5, π) = ({:.6}, {:.6})", bundle.u.eval(0, 0.5, std::f64::consts::PI), bundle.u.eval(1, 0.5, std::f64::consts::PI));
    Ok(())
}
