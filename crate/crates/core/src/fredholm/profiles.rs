use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::Serialize;

use super::{Reflection, C64};
use crate::error::{Error, Result};
use crate::quadrature::{panel_edges, GaussRule};
use crate::system::HyperbolicSystem;

/// `α_j(x) = ∫_0^x dy / a_j(y)` and `β_j(x) = ∫_0^x b_jj(y) / a_j(y) dy`.
#[derive(Debug, Clone)]
pub struct ExponentProfiles {
    sys: Arc<HyperbolicSystem>,
    rule: GaussRule,
    splits: Vec<Vec<f64>>,
    /// `(α_j(1), β_j(1))`.
    pub at_one: Vec<(f64, f64)>,
    /// `min_j inf_x |a_j(x)|` on the sample used for validation.
    pub min_speed: f64,
}

const PANELS_PER_UNIT: usize = 16;

pub fn exponent_profiles(sys: &Arc<HyperbolicSystem>) -> Result<ExponentProfiles> {
    if !sys.operator_time_independent() {
        return Err(Error::Invalid("mode analysis needs time-independent coefficients".into()));
    }
    let n = sys.n();
    let splits: Vec<Vec<f64>> = (0..n).map(|j| sys.breakpoints(j)).collect();
    let mut min_speed = f64::INFINITY;
    for (j, sp) in splits.iter().enumerate() {
        let mut xs: Vec<f64> = (0..=1024).map(|i| i as f64 / 1024.0).collect();
        for &b in sp {
            xs.extend([b - 1e-9, b + 1e-9]);
        }
        for x in xs.into_iter().filter(|x| (0.0..=1.0).contains(x)) {
            let a = sys.a(j, x, 0.0);
            if !a.is_finite() {
                return Err(Error::Evaluation { x, t: 0.0, msg: format!("a_{} is not finite", j + 1) });
            }
            min_speed = min_speed.min(a.abs());
        }
    }
    let scale = sys.speed_scale((0.0, 1.0)).max(1.0);
    if min_speed <= 1e-12 * scale {
        return Err(Error::Invalid(format!("speeds degenerate: min |a_j| = {min_speed:.3e}")));
    }
    let mut p = ExponentProfiles {
        sys: sys.clone(),
        rule: GaussRule::legendre(12),
        splits,
        at_one: Vec::new(),
        min_speed,
    };
    p.at_one = (0..n).map(|j| p.eval(j, 1.0)).collect();
    Ok(p)
}

impl ExponentProfiles {
    pub fn n(&self) -> usize {
        self.splits.len()
    }

    /// `(α_j, β_j)` increments over `[x0, x1]`.
    pub fn increment(&self, j: usize, x0: f64, x1: f64) -> (f64, f64) {
        let mut acc = (0.0, 0.0);
        for w in panel_edges(x0, x1, &self.splits[j], PANELS_PER_UNIT).windows(2) {
            for (y, wt) in self.rule.mapped(w[0], w[1]) {
                let a = self.sys.a(j, y, 0.0);
                acc.0 += wt / a;
                acc.1 += wt * self.sys.b(j, j, y, 0.0) / a;
            }
        }
        acc
    }

    /// `(α_j(x), β_j(x))`.
    pub fn eval(&self, j: usize, x: f64) -> (f64, f64) {
        self.increment(j, 0.0, x)
    }

    pub fn alpha(&self, j: usize, x: f64) -> f64 {
        self.eval(j, x).0
    }

    pub fn beta(&self, j: usize, x: f64) -> f64 {
        self.eval(j, x).1
    }

    pub fn speed(&self, j: usize, x: f64) -> f64 {
        self.sys.a(j, x, 0.0)
    }

    pub fn damping(&self, j: usize, x: f64) -> f64 {
        self.sys.b(j, j, x, 0.0)
    }

    /// Breakpoints relevant to component `j`.
    pub fn splits(&self, j: usize) -> &[f64] {
        &self.splits[j]
    }

    /// Exponent `isα_j(1) + β_j(1)`.
    pub fn phase_at_one(&self, j: usize, s: i64) -> C64 {
        let (a, b) = self.at_one[j];
        C64::new(b, s as f64 * a)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ModeReflectionMatrix {
    pub s: i64,
    #[serde(skip)]
    pub matrix: DMatrix<C64>,
    #[serde(skip)]
    pub det: C64,
    /// `|det(I − R_s)|`.
    pub margin: f64,
}

/// `R_s[j,k] = Σ_{l<m} e^{is(α_j(1)−α_l(1)) + β_j(1)−β_l(1)} r¹_jl r⁰_lk`
/// over leftward `j, k`.
pub fn mode_reflection(profiles: &ExponentProfiles, refl: &Reflection, s: i64) -> ModeReflectionMatrix {
    let (n, m) = (refl.n, refl.m);
    let q = n - m;
    let matrix = DMatrix::from_fn(q, q, |jj, kk| {
        (0..m)
            .map(|l| {
                let e = (profiles.phase_at_one(m + jj, s) - profiles.phase_at_one(l, s)).exp();
                e * refl.r1[jj][l] * refl.r0[l][kk]
            })
            .sum::<C64>()
    });
    let det = if q == 0 {
        C64::new(1.0, 0.0)
    } else {
        (DMatrix::identity(q, q) - &matrix).determinant()
    };
    ModeReflectionMatrix {
        s,
        matrix,
        det,
        margin: det.norm(),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct IsoMargins {
    /// `min_{|s| ≤ s_max} |det(I − R_s)|`.
    pub min_margin: f64,
    pub worst_s: i64,
    /// `min |det(I − R(θ))|` over independent phases; a lower bound for every `s`.
    pub torus_bound: f64,
    /// The torus minimum is exact (closed form) rather than sampled.
    pub torus_exact: bool,
    /// `min_j ess inf |a_j|`.
    pub speed_bound: f64,
    /// `Σ_j ‖b_jj‖_∞ + Σ|r⁰| + Σ|r¹|`.
    pub size_bound: f64,
    /// Largest `c` meeting all three conditions at once.
    pub joint_c: f64,
    pub passed: bool,
}

/// Entry data of `R(θ)`: `R[j,k] = Σ_l e^{i(θ_j − θ_l)} coef[j][l][k]`.
fn torus_coefficients(profiles: &ExponentProfiles, refl: &Reflection) -> Vec<Vec<Vec<f64>>> {
    let (n, m) = (refl.n, refl.m);
    (0..n - m)
        .map(|jj| {
            (0..m)
                .map(|l| {
                    let g = (profiles.at_one[m + jj].1 - profiles.at_one[l].1).exp();
                    (0..n - m).map(|kk| g * refl.r1[jj][l] * refl.r0[l][kk]).collect()
                })
                .collect()
        })
        .collect()
}

fn torus_det(coef: &[Vec<Vec<f64>>], m: usize, theta: &[f64]) -> f64 {
    let q = coef.len();
    let r = DMatrix::from_fn(q, q, |jj, kk| {
        (0..m)
            .map(|l| C64::from_polar(coef[jj][l][kk], theta[m + jj] - theta[l]))
            .sum::<C64>()
    });
    (DMatrix::identity(q, q) - r).determinant().norm()
}

/// Minimum of `|det(I − R(θ))|`; exact when `R` is scalar.
fn torus_minimum(profiles: &ExponentProfiles, refl: &Reflection) -> (f64, bool) {
    let (n, m) = (refl.n, refl.m);
    if n == m || m == 0 {
        return (1.0, true);
    }
    let coef = torus_coefficients(profiles, refl);
    if n - m == 1 {
        // {Σ_l z_l c_l : |z_l| = 1} is an annulus
        let mags: Vec<f64> = (0..m).map(|l| coef[0][l][0].abs()).collect();
        let outer: f64 = mags.iter().sum();
        let inner = (2.0 * mags.iter().cloned().fold(0.0, f64::max) - outer).max(0.0);
        let d = if outer < 1.0 {
            1.0 - outer
        } else if inner > 1.0 {
            inner - 1.0
        } else {
            0.0
        };
        return (d, true);
    }
    // θ_0 = 0 fixes the global phase
    let dims = n - 1;
    let per_axis = ((200_000f64).powf(1.0 / dims as f64).floor() as usize).clamp(4, 64);
    let mut best = (f64::INFINITY, vec![0.0; n]);
    let total = per_axis.pow(dims as u32);
    for idx in 0..total {
        let mut theta = vec![0.0; n];
        let mut r = idx;
        for th in theta.iter_mut().skip(1) {
            *th = 2.0 * PI * (r % per_axis) as f64 / per_axis as f64;
            r /= per_axis;
        }
        let d = torus_det(&coef, m, &theta);
        if d < best.0 {
            best = (d, theta);
        }
    }
    // coordinate refinement around the best sample
    let mut step = PI / per_axis as f64;
    let (mut val, mut theta) = best;
    while step > 1e-10 {
        let mut improved = false;
        for d in 1..n {
            for sign in [-1.0, 1.0] {
                let mut trial = theta.clone();
                trial[d] += sign * step;
                let v = torus_det(&coef, m, &trial);
                if v < val {
                    val = v;
                    theta = trial;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    (val, false)
}

pub fn iso_margins(sys: &HyperbolicSystem, profiles: &ExponentProfiles, refl: &Reflection, s_max: usize) -> IsoMargins {
    let (min_margin, worst_s) = (-(s_max as i64)..=s_max as i64)
        .map(|s| (mode_reflection(profiles, refl, s).margin, s))
        .fold((f64::INFINITY, 0), |acc, v| if v.0 < acc.0 { v } else { acc });
    let (torus, exact) = torus_minimum(profiles, refl);
    let torus_bound = torus.min(min_margin);
    let n = refl.n;
    let mut b_sup = 0.0;
    for j in 0..n {
        let mut sup: f64 = 0.0;
        for i in 0..=1024 {
            sup = sup.max(sys.b(j, j, i as f64 / 1024.0, 0.0).abs());
        }
        for &x in profiles.splits(j) {
            for y in [x - 1e-9, x + 1e-9] {
                if (0.0..=1.0).contains(&y) {
                    sup = sup.max(sys.b(j, j, y, 0.0).abs());
                }
            }
        }
        b_sup += sup;
    }
    let r_sum: f64 = refl.r0.iter().chain(&refl.r1).flatten().map(|r| r.abs()).sum();
    let size_bound = b_sup + r_sum;
    let joint_c = profiles
        .min_speed
        .min(torus_bound)
        .min(if size_bound > 0.0 { 1.0 / size_bound } else { f64::INFINITY });
    IsoMargins {
        min_margin,
        worst_s,
        torus_bound,
        torus_exact: exact,
        speed_bound: profiles.min_speed,
        size_bound,
        joint_c,
        passed: joint_c > 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::TimeDomain;

    fn sys(a: [&str; 2], b: [[&str; 2]; 2]) -> Arc<HyperbolicSystem> {
        Arc::new(
            HyperbolicSystem::parse(1, &a, &[&b[0], &b[1]], &["0", "0"], TimeDomain::Periodic).unwrap(),
        )
    }

    fn refl(r: f64, q: f64) -> Reflection {
        Reflection::new(2, 1, vec![vec![r]], vec![vec![q]]).unwrap()
    }

    #[test]
    fn constant_profiles() {
        let s = Arc::new(HyperbolicSystem::parse(1, &["2"], &[&["1"]], &["0"], TimeDomain::Periodic).unwrap());
        let p = exponent_profiles(&s).unwrap();
        assert!((p.alpha(0, 0.3) - 0.15).abs() < 1e-14);
        assert!((p.beta(0, 0.3) - 0.15).abs() < 1e-14);
    }

    #[test]
    fn piecewise_speed() {
        let s = Arc::new(
            HyperbolicSystem::parse(1, &["piecewise(x < 0.5, 1, 2)"], &[&["0"]], &["0"], TimeDomain::Periodic).unwrap(),
        );
        let p = exponent_profiles(&s).unwrap();
        assert!((p.at_one[0].0 - 0.75).abs() < 1e-14);
    }

    #[test]
    fn quarter_fixture() {
        let s = sys(["1", "-1"], [["0", "0"], ["0", "0"]]);
        let p = exponent_profiles(&s).unwrap();
        assert!((p.alpha(1, 0.4) + 0.4).abs() < 1e-14);
        let r = refl(0.5, 0.5);
        for s_ in -100..=100 {
            let rs = mode_reflection(&p, &r, s_);
            let expect = C64::from_polar(0.25, -2.0 * s_ as f64);
            assert!((rs.matrix[(0, 0)] - expect).norm() < 1e-12);
        }
        assert!((mode_reflection(&p, &r, 0).margin - 0.75).abs() < 1e-15);
        let iso = iso_margins(&s, &p, &r, 64);
        assert_eq!(iso.torus_bound, 0.75);
        assert!(iso.torus_exact);
        let singular = iso_margins(&s, &p, &refl(1.0, 1.0), 8);
        assert_eq!(singular.min_margin, 0.0);
        assert_eq!(singular.worst_s, 0);
        let none = iso_margins(&s, &p, &refl(0.0, 0.0), 8);
        assert_eq!(none.min_margin, 1.0);
    }

    #[test]
    fn sampled_torus_matches_scalar_case() {
        // three leftward components, one rightward, rank-one reflection
        let s = Arc::new(
            HyperbolicSystem::parse(
                1,
                &["1", "-1", "-2", "-3"],
                &[&["0"; 4], &["0"; 4], &["0"; 4], &["0"; 4]],
                &["0"; 4],
                TimeDomain::Periodic,
            )
            .unwrap(),
        );
        let p = exponent_profiles(&s).unwrap();
        let r = Reflection::new(4, 1, vec![vec![0.2, 0.1, 0.1]], vec![vec![0.5], vec![0.5], vec![0.5]]).unwrap();
        let (v, exact) = torus_minimum(&p, &r);
        assert!(!exact);
        // det(I − u vᵀ) = 1 − vᵀu, so the minimum is 1 − 0.2
        assert!((v - 0.8).abs() < 1e-8, "{v}");
    }
}
