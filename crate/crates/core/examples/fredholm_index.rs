//! Kernel, cokernel and index of the periodic reflection problem with perfect
//! reflection, where the constant mode is a kernel element.

use std::sync::Arc;

use hyperbolic1d::boundary::BoundaryOperator;
use hyperbolic1d::fredholm::{kernel_and_index, FredholmConfig, ModeSystem};
use hyperbolic1d::{HyperbolicSystem, TimeDomain};

fn main() -> hyperbolic1d::Result<()> {
    for r in [1.0, 0.5] {
        let sys = HyperbolicSystem::parse(1, &["1", "-1"], &[&["0", "0"], &["0", "0"]], &["0", "0"], TimeDomain::Periodic)?;
        let bc = BoundaryOperator::LinearReflection { r0: vec![vec![r]], r1: vec![vec![r]] };
        let ms = ModeSystem::new(Arc::new(sys), &bc)?;
        let rep = kernel_and_index(&ms, &FredholmConfig { s_max: 8, ..Default::default() })?;
        println!(
            "r = {r}: iso margin {:.3e}, dim ker {:?}, dim coker {:?}, index {:?}, kernel modes {:?}",
            rep.iso.min_margin,
            rep.dim_ker,
            rep.dim_coker,
            rep.index,
            rep.kernel.iter().map(|v| v.s).collect::<Vec<_>>()
        );
    }
    Ok(())
}
