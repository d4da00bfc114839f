//! Mode-by-mode solution of a forced periodic problem; a forcing with a
//! cokernel component is reported as unsolvable with its obstruction.

use std::sync::Arc;

use hyperbolic1d::boundary::BoundaryOperator;
use hyperbolic1d::fredholm::{fredholm_solve, FredholmConfig, ModeSystem};
use hyperbolic1d::{HyperbolicSystem, TimeDomain};

fn main() -> hyperbolic1d::Result<()> {
    let cfg = FredholmConfig { s_max: 16, ..Default::default() };
    let sys = HyperbolicSystem::parse(1, &["1", "-1"], &[&["0", "1"], &["1", "0"]], &["0", "0"], TimeDomain::Periodic)?;
    let bc = BoundaryOperator::LinearReflection { r0: vec![vec![0.5]], r1: vec![vec![0.5]] };
    let ms = ModeSystem::new(Arc::new(sys), &bc)?;
    let grid = cfg.grid(&ms)?;
    let f = grid.field_from_fn(2, cfg.s_max, 64, |j, x, t| if j == 0 { t.cos() } else { t.sin() + x })?;
    let sol = fredholm_solve(&ms, &f, &cfg)?;
    let u = sol.to_grid(32);
    println!("coupled: solvable {}, residual {:.2e}, u_1(0.5, 0) = {:.8}", sol.solvable, sol.residual, u.eval(0, 0.5, 0.0));

    let sys = HyperbolicSystem::parse(1, &["1", "-1"], &[&["0", "0"], &["0", "0"]], &["0", "0"], TimeDomain::Periodic)?;
    let bc = BoundaryOperator::LinearReflection { r0: vec![vec![1.0]], r1: vec![vec![1.0]] };
    let ms = ModeSystem::new(Arc::new(sys), &bc)?;
    let grid = cfg.grid(&ms)?;
    let f = grid.field_from_fn(2, cfg.s_max, 64, |_, _, _| 1.0)?;
    let sol = fredholm_solve(&ms, &f, &cfg)?;
    println!("perfect reflection, constant forcing: solvable {}, obstruction {:.6} of ‖f‖ {:.6}", sol.solvable, sol.obstruction, sol.f_norm);
    Ok(())
}
