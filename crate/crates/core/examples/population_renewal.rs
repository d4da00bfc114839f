//! Age-structured population with a birth law `u(0,t) = ∫ u(x,t) dx`: the
//! renewal-equation boundary trace against the characteristic solver.

use std::sync::Arc;

use hyperbolic1d::boundary::{BoundaryOperator, ZMap};
use hyperbolic1d::characteristics::Tracer;
use hyperbolic1d::operators::OperatorContext;
use hyperbolic1d::population::{renewal_boundary, AgeModel};
use hyperbolic1d::solver::{solve_ibvp, Problem, SolveConfig};
use hyperbolic1d::{CoefficientField, HyperbolicSystem, TimeDomain};

fn main() -> hyperbolic1d::Result<()> {
    let phi = CoefficientField::parse("piecewise(x < 0.5, 1, 0)")?;
    let sys = HyperbolicSystem::parse(1, &["1"], &[&["0"]], &["0"], TimeDomain::HalfStrip { t0: 0.0 })?;
    let (h, gamma) = (ZMap::parse("z")?, CoefficientField::constant(1.0));
    let bc = BoundaryOperator::IntegralAge { h: h.clone(), gamma: gamma.clone() };
    let problem = Problem::new(sys, bc, Some(vec![phi.clone()]))?;
    let cfg = SolveConfig { nx: 41, nt: 121, tol: 1e-12, verify: None, ..Default::default() };
    let u = solve_ibvp(&problem, 3.0, &cfg)?.u;

    let ctx = OperatorContext::new(Arc::new(Tracer::new(problem.sys.clone())));
    let model = AgeModel::new(ctx, gamma, h, Some(phi), cfg.panels_per_unit)?;
    let renewal = renewal_boundary(&model, u.ts(), &[], 1e-14, 200)?;
    for k in (0..u.nt()).step_by(20) {
        println!("t = {:.3}: solver {:.12}, renewal {:.12}", u.ts()[k], u.get(0, 0, k), renewal.values[k]);
    }
    Ok(())
}
