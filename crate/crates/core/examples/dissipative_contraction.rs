//! Contraction margins of a nonlinear dissipative boundary law, and the
//! periodic fixed-point iteration that converges exactly when they are positive.

use hyperbolic1d::boundary::{contraction_check, BoundaryOperator, ContractionOptions, ZMap};
use hyperbolic1d::characteristics::Tracer;
use hyperbolic1d::solver::{Problem, SolveConfig, Solver};
use hyperbolic1d::{Error, HyperbolicSystem, TimeDomain};

fn main() -> hyperbolic1d::Result<()> {
    for (b, kappa) in [("0", 0.5), ("-1", 0.5), ("0", 0.9)] {
        let sys = HyperbolicSystem::parse(1, &["1"], &[&[b]], &["0"], TimeDomain::Periodic)?;
        let law = format!("{kappa}*z1 + cos(t)");
        let bc = BoundaryOperator::DissipativeNonlinear { h: vec![ZMap::parse(&law)?] };
        let problem = Problem::new(sys, bc, None)?;
        let rep = contraction_check(&Tracer::new(problem.sys.clone()), &problem.bc, 0, &ContractionOptions::new(1, (0.0, 6.0)))?;
        let cfg = SolveConfig { nx: 41, nt: 64, max_iter: 600, verify: None, ..Default::default() };
        let outcome = match Solver::new(&problem, &cfg)?.solve_periodic(None) {
            Ok(s) => format!("converged in {} iterations", s.iterations),
            Err(Error::NonConvergence { .. }) => "did not converge".to_string(),
            Err(e) => return Err(e),
        };
        println!("b = {b:>2}, κ = {kappa}: margin {:+.6}, {outcome}", rep.min_margin());
    }
    Ok(())
}
