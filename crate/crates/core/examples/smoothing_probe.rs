//! Estimates the regularity gained by a kinked initial profile once every
//! characteristic has left through the boundary, and tracks the kink.

use hyperbolic1d::boundary::BoundaryOperator;
use hyperbolic1d::characteristics::Tracer;
use hyperbolic1d::smoothing::{regularity_profile, smoothing_time, track_singularity, ProfileOptions};
use hyperbolic1d::solver::{Problem, SolveConfig};
use hyperbolic1d::{CoefficientField, HyperbolicSystem, TimeDomain};

fn main() -> hyperbolic1d::Result<()> {
    let sys = HyperbolicSystem::parse(1, &["1"], &[&["0"]], &["0"], TimeDomain::HalfStrip { t0: 0.0 })?;
    let bc = BoundaryOperator::ClassicalTrace { h: vec![CoefficientField::parse("0.5 + sin(t)")?] };
    let problem = Problem::new(sys, bc, Some(vec![CoefficientField::parse("abs(x - 0.5)")?]))?;
    let cfg = SolveConfig { nx: 51, nt: 151, verify: None, ..Default::default() };
    let (profile, grids) = regularity_profile(&problem, 3.0, &cfg, &ProfileOptions::unit_windows(0.0, 3.0), 3)?;
    for w in &profile.windows {
        println!("window [{:.1}, {:.1}]: order {}", w.window.0, w.window.1, w.order);
    }
    println!("C^2 from t = {:?}", smoothing_time(&profile, 2));
    let track = track_singularity(grids.last().unwrap(), &Tracer::new(problem.sys.clone()), 0.5, 0.0)?;
    println!(
        "derivative jump near t=0: {:.4}, after exit: {:.2e} (noise {:.2e})",
        track.min_jump_du(0, (0.0, 0.4)).unwrap_or(f64::NAN),
        track.max_jump_du(0, (1.0, 3.0)).unwrap_or(0.0),
        track.max_noise(0, (1.0, 3.0)).unwrap_or(0.0)
    );
    Ok(())
}
