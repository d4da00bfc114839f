//! Traces characteristics of a variable-speed system back to their exits.

use std::sync::Arc;

use hyperbolic1d::characteristics::Tracer;
use hyperbolic1d::{HyperbolicSystem, TimeDomain};

fn main() -> hyperbolic1d::Result<()> {
    let sys = HyperbolicSystem::parse(
        1,
        &["1 + 0.5*sin(x)", "-(2 - x)"],
        &[&["0", "0"], &["0", "0"]],
        &["0", "0"],
        TimeDomain::HalfStrip { t0: 0.0 },
    )?;
    let tracer = Tracer::new(Arc::new(sys));
    for j in 0..2 {
        for &(x, t) in &[(0.5, 0.2), (0.5, 2.0), (0.9, 1.0)] {
            let (path, exit) = tracer.to_exit(j, x, t)?;
            // sensitivity of ω(exit) to the anchor point
            let (dx, dt) = path.omega_derivatives(exit.x);
            println!(
                "component {j} from ({x}, {t}): exits {:?} at x={:.6}, tau={:.6}; ∂ω/∂x {dx:.4}, ∂ω/∂t {dt:.4}",
                exit.kind, exit.x, exit.tau
            );
        }
    }
    println!("minimal transit time over [0,3]: {:.6}", tracer.min_transit_time((0.0, 3.0))?);
    Ok(())
}
