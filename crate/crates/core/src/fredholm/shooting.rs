use nalgebra::DVector;
use serde::Serialize;

use super::linalg::{max_abs, CMat};
use super::{ModeSystem, Reflection, C64};
use crate::error::{Error, Result};
use crate::ode::{integrate_split, OdeOptions, OdeSolution};
use crate::quadrature::{panel_edges, GaussRule};

fn shooting_options() -> OdeOptions {
    OdeOptions {
        rtol: 1e-13,
        atol: 1e-15,
        h_max: 1.0 / 64.0,
        ..Default::default()
    }
}

/// Fundamental matrix `Φ(x)` of `y' = A(x) y` with `Φ(0) = I`, optionally
/// with the particular solution of `y' = A(x) y + g(x)`, `y(0) = 0`.
#[derive(Debug, Clone)]
pub struct Fundamental {
    n: usize,
    forced: bool,
    sol: OdeSolution,
}

impl Fundamental {
    pub fn compute<A, G>(n: usize, coef: A, forcing: Option<G>, splits: &[f64]) -> Result<Self>
    where
        A: Fn(f64) -> CMat,
        G: Fn(f64) -> DVector<C64>,
    {
        let cols = n + usize::from(forcing.is_some());
        let mut y0 = vec![0.0; 2 * n * cols];
        for c in 0..n {
            y0[2 * (c * n + c)] = 1.0;
        }
        let forced = forcing.is_some();
        let rhs = |x: f64, y: &[f64], dy: &mut [f64]| {
            let a = coef(x);
            let g = forcing.as_ref().map(|g| g(x));
            for c in 0..cols {
                for j in 0..n {
                    let mut acc = C64::new(0.0, 0.0);
                    for k in 0..n {
                        let yk = C64::new(y[2 * (c * n + k)], y[2 * (c * n + k) + 1]);
                        acc += a[(j, k)] * yk;
                    }
                    if c == n {
                        if let Some(g) = &g {
                            acc += g[j];
                        }
                    }
                    dy[2 * (c * n + j)] = acc.re;
                    dy[2 * (c * n + j) + 1] = acc.im;
                }
            }
        };
        let sol = integrate_split(rhs, 0.0, &y0, 1.0, splits, &shooting_options(), None::<fn(f64, &[f64]) -> f64>)
            .map_err(|e| Error::StepUnderflow { component: 0, xi: e.x })?;
        Ok(Fundamental { n, forced, sol })
    }

    fn column(&self, y: &[f64], c: usize) -> DVector<C64> {
        let n = self.n;
        DVector::from_fn(n, |j, _| C64::new(y[2 * (c * n + j)], y[2 * (c * n + j) + 1]))
    }

    pub fn phi(&self, x: f64) -> CMat {
        let y = self.sol.eval(x);
        CMat::from_columns(&(0..self.n).map(|c| self.column(&y, c)).collect::<Vec<_>>())
    }

    /// `(Φ(x), y_p(x))`.
    pub fn eval(&self, x: f64) -> (CMat, DVector<C64>) {
        let y = self.sol.eval(x);
        let phi = CMat::from_columns(&(0..self.n).map(|c| self.column(&y, c)).collect::<Vec<_>>());
        let p = if self.forced {
            self.column(&y, self.n)
        } else {
            DVector::zeros(self.n)
        };
        (phi, p)
    }
}

/// Boundary matching matrix of the mode problem: `M c = 0` iff
/// `u = Φ c` meets the reflection conditions, where `c = u(0)`.
pub fn forward_matching(refl: &Reflection, phi1: &CMat) -> CMat {
    let (n, m) = (refl.n, refl.m);
    CMat::from_fn(n, n, |j, c| {
        if j < m {
            let own = if c == j { 1.0 } else { 0.0 };
            let refl_part = if c >= m { refl.r0[j][c - m] } else { 0.0 };
            C64::new(own - refl_part, 0.0)
        } else {
            phi1[(j, c)] - (0..m).map(|k| phi1[(k, c)] * refl.r1[j - m][k]).sum::<C64>()
        }
    })
}

/// Matching matrix of the adjoint conditions for `w = a u`, with `c = w(0)`:
/// `w_j(0) = −Σ_{k<m} r⁰_kj w_k(0)` for `j ≥ m` and
/// `w_j(1) = −Σ_{k≥m} r¹_kj w_k(1)` for `j < m`.
pub fn adjoint_matching(refl: &Reflection, psi1: &CMat) -> CMat {
    let (n, m) = (refl.n, refl.m);
    CMat::from_fn(n, n, |j, c| {
        if j >= m {
            let own = if c == j { 1.0 } else { 0.0 };
            let refl_part = if c < m { refl.r0[c][j - m] } else { 0.0 };
            C64::new(own + refl_part, 0.0)
        } else {
            psi1[(j, c)] + (m..n).map(|k| psi1[(k, c)] * refl.r1[k - m][j]).sum::<C64>()
        }
    })
}

impl ModeSystem {
    /// `−a⁻¹ (is + b)`.
    pub(crate) fn forward_coef(&self, s: i64, x: f64) -> CMat {
        let n = self.n();
        CMat::from_fn(n, n, |j, k| {
            let diag = if j == k { C64::new(0.0, s as f64) } else { C64::new(0.0, 0.0) };
            -(diag + self.b(j, k, x)) / self.a(j, x)
        })
    }

    /// `(bᵀ − is) a⁻¹`, acting on `w = a u`.
    pub(crate) fn adjoint_coef(&self, s: i64, x: f64) -> CMat {
        let n = self.n();
        CMat::from_fn(n, n, |j, k| {
            let diag = if j == k { C64::new(0.0, s as f64) } else { C64::new(0.0, 0.0) };
            (C64::new(self.b(k, j, x), 0.0) - diag) / self.a(k, x)
        })
    }

    pub fn forward_fundamental(&self, s: i64) -> Result<Fundamental> {
        Fundamental::compute(
            self.n(),
            |x| self.forward_coef(s, x),
            None::<fn(f64) -> DVector<C64>>,
            &self.breakpoints(),
        )
    }

    pub fn adjoint_fundamental(&self, s: i64) -> Result<Fundamental> {
        Fundamental::compute(
            self.n(),
            |x| self.adjoint_coef(s, x),
            None::<fn(f64) -> DVector<C64>>,
            &self.breakpoints(),
        )
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ModeSolution {
    pub s: i64,
    pub xs: Vec<f64>,
    /// `u[j * nx + i] = û_j(x_i)`.
    #[serde(skip)]
    pub u: Vec<C64>,
    /// Defect of the reflection conditions.
    pub bc_residual: f64,
    /// Largest defect of `û(x₁) − û(x₀) = ∫ a⁻¹(f̂ − (is + b)û)` over subintervals.
    pub ode_residual: Option<f64>,
    /// The matching matrix was numerically singular; `u` is a least-squares solution.
    pub singular: bool,
    pub matching_sigma_ratio: f64,
}

/// Solves `a û' + (is + b) û = f̂` with the reflection conditions by
/// shooting with the fundamental matrix.
pub fn solve_mode_full<F>(ms: &ModeSystem, s: i64, f: F, xs: &[f64]) -> Result<ModeSolution>
where
    F: Fn(f64) -> DVector<C64>,
{
    let n = ms.n();
    let inv_a = |x: f64| DVector::from_fn(n, |j, _| C64::new(1.0 / ms.a(j, x), 0.0));
    let fund = Fundamental::compute(
        n,
        |x| ms.forward_coef(s, x),
        Some(|x: f64| f(x).component_mul(&inv_a(x))),
        &ms.breakpoints(),
    )?;
    let (phi1, p1) = fund.eval(1.0);
    let mmat = forward_matching(&ms.refl, &phi1);
    // the particular part enters only the rows at x = 1
    let rhs = DVector::from_fn(n, |j, _| {
        if j < ms.m() {
            C64::new(0.0, 0.0)
        } else {
            (0..ms.m()).map(|k| p1[k] * ms.refl.r1[j - ms.m()][k]).sum::<C64>() - p1[j]
        }
    });
    let svd = mmat.clone().svd(true, true);
    let sv = &svd.singular_values;
    let (smax, smin) = (sv.max(), sv.min());
    let ratio = if smax > 0.0 { smin / smax } else { 0.0 };
    let singular = ratio < 1e-10;
    let c = if singular {
        svd.solve(&rhs, 1e-10 * smax).map_err(|e| Error::Invalid(e.to_string()))?
    } else {
        mmat.clone().lu().solve(&rhs).ok_or(Error::SingularMode { s, margin: ratio })?
    };
    let eval = |x: f64| {
        let (phi, p) = fund.eval(x);
        phi * &c + p
    };
    let nx = xs.len();
    let mut u = vec![C64::new(0.0, 0.0); n * nx];
    for (i, &x) in xs.iter().enumerate() {
        let v = eval(x);
        for j in 0..n {
            u[j * nx + i] = v[j];
        }
    }
    let (u0, u1) = (eval(0.0), eval(1.0));
    let mut bc: f64 = 0.0;
    for j in 0..n {
        let d = if j < ms.m() {
            u0[j] - (ms.m()..n).map(|k| u0[k] * ms.refl.r0[j][k - ms.m()]).sum::<C64>()
        } else {
            u1[j] - (0..ms.m()).map(|k| u1[k] * ms.refl.r1[j - ms.m()][k]).sum::<C64>()
        };
        bc = bc.max(d.norm());
    }
    let rule = GaussRule::legendre(10);
    let mut ode: f64 = 0.0;
    for w in panel_edges(0.0, 1.0, &ms.breakpoints(), 64).windows(2) {
        let mut integral = DVector::<C64>::zeros(n);
        for (y, wt) in rule.mapped(w[0], w[1]) {
            let uy = eval(y);
            let fy = f(y);
            for j in 0..n {
                let mut r = fy[j] - C64::new(0.0, s as f64) * uy[j];
                for k in 0..n {
                    r -= uy[k] * ms.b(j, k, y);
                }
                integral[j] += r * (wt / ms.a(j, y));
            }
        }
        ode = ode.max(max_abs((eval(w[1]) - eval(w[0]) - integral).iter()));
    }
    Ok(ModeSolution {
        s,
        xs: xs.to_vec(),
        u,
        bc_residual: bc,
        ode_residual: Some(ode),
        singular,
        matching_sigma_ratio: ratio,
    })
}
