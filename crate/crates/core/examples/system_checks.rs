//! Hyperbolicity, Levy factorization and BV checks on a sampled grid.

use hyperbolic1d::system::{check_bv_factorization, check_hyperbolicity, check_levy, LevyOptions, SampleGrid};
use hyperbolic1d::{HyperbolicSystem, TimeDomain};

fn main() -> hyperbolic1d::Result<()> {
    let grid = SampleGrid::new(65, 33, (0.0, 1.0));
    let good = HyperbolicSystem::parse(
        1,
        &["1 + x", "-1"],
        &[&["0", "(2 + x)*sin(x)"], &["0", "0"]],
        &["0", "0"],
        TimeDomain::HalfStrip { t0: 0.0 },
    )?;
    let rep = check_hyperbolicity(&good, &grid)?;
    println!("sign margin {:.3}, speed margin {:.3}, passed {}", rep.l1_margin, rep.l2_margin, rep.passed());
    let levy = check_levy(&good, &grid, &LevyOptions::default())?;
    println!("levy defect {:.2e}, sup |p| {:?}", levy.defect, levy.sup_p);
    let bv = check_bv_factorization(&good, &LevyOptions::default(), 256)?;
    println!("BV norms {:?}, ok {:?}", bv.bv_norms, bv.bv_ok);

    let bad = HyperbolicSystem::parse(1, &["x - 0.3"], &[&["0"]], &["0"], TimeDomain::HalfStrip { t0: 0.0 })?;
    let rep = check_hyperbolicity(&bad, &grid)?;
    println!("vanishing speed: passed {}, witness {:?}", rep.passed(), rep.l1_witness);
    Ok(())
}
