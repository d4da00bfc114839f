#![allow(dead_code)]

use std::sync::Arc;

use hyperbolic1d::boundary::BoundaryOperator;
use hyperbolic1d::fredholm::{FourierField, ModeGrid, ModeSystem, C64};
use hyperbolic1d::{HyperbolicSystem, TimeDomain};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `a = diag(1, −1)` with the given coupling and scalar reflections.
pub fn two_wave(b: [[&str; 2]; 2], r0: f64, r1: f64) -> ModeSystem {
    let sys = HyperbolicSystem::parse(1, &["1", "-1"], &[&b[0], &b[1]], &["0", "0"], TimeDomain::Periodic).unwrap();
    let bc = BoundaryOperator::LinearReflection { r0: vec![vec![r0]], r1: vec![vec![r1]] };
    ModeSystem::new(Arc::new(sys), &bc).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn cplx(r: &mut ChaCha8Rng) -> C64 {
    C64::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0))
}

/// Band-limited `u*` with quadratic modes meeting the reflection conditions,
/// and `f = (𝒜 + ℬ) u*` evaluated exactly at the grid nodes.
pub fn manufactured(ms: &ModeSystem, grid: &ModeGrid, band: i64, s_max: usize, seed: u64) -> (FourierField, FourierField) {
    let (n, m) = (ms.n(), ms.m());
    let mut r = rng(seed);
    let coef: Vec<Vec<[C64; 3]>> = (0..=band)
        .map(|s| {
            let mut c: Vec<[C64; 3]> = (0..n).map(|_| [cplx(&mut r), cplx(&mut r), cplx(&mut r)]).collect();
            if s == 0 {
                for row in c.iter_mut() {
                    for z in row.iter_mut() {
                        z.im = 0.0;
                    }
                }
            }
            for j in 0..m {
                c[j][0] = (0..n - m).map(|l| c[m + l][0] * ms.refl.r0[j][l]).sum();
            }
            for jj in 0..n - m {
                let target: C64 = (0..m).map(|k| (c[k][0] + c[k][1] + c[k][2]) * ms.refl.r1[jj][k]).sum();
                let [a, b, _] = c[m + jj];
                c[m + jj][2] = target - a - b;
            }
            c
        })
        .collect();
    let nx = grid.len();
    let u_mode = |s: i64| -> Vec<C64> {
        let mut v = vec![C64::new(0.0, 0.0); n * nx];
        if s <= band {
            for j in 0..n {
                let [a, b, c] = coef[s as usize][j];
                for (i, &x) in grid.xs.iter().enumerate() {
                    v[j * nx + i] = a + b * x + c * x * x;
                }
            }
        }
        v
    };
    let f_mode = |s: i64| -> Vec<C64> {
        let mut v = vec![C64::new(0.0, 0.0); n * nx];
        if s <= band {
            let u = u_mode(s);
            for j in 0..n {
                let [_, b, c] = coef[s as usize][j];
                for (i, &x) in grid.xs.iter().enumerate() {
                    let mut acc = (b + c * (2.0 * x)) * ms.a(j, x) + C64::new(0.0, s as f64) * u[j * nx + i];
                    for k in 0..n {
                        acc += u[k * nx + i] * ms.b(j, k, x);
                    }
                    v[j * nx + i] = acc;
                }
            }
        }
        v
    };
    let u = FourierField::from_modes_fn(n, s_max, grid.xs.clone(), grid.wx.clone(), u_mode);
    let f = FourierField::from_modes_fn(n, s_max, grid.xs.clone(), grid.wx.clone(), f_mode);
    (u, f)
}
