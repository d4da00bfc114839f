use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::linalg::{max_abs, CMat};
use super::profiles::iso_margins;
use super::{FourierField, ModeSystem, C64};
use crate::error::{Error, Result};
use crate::quadrature::{panel_edges, GaussRule};

const SINGULAR_MARGIN: f64 = 1e-12;

/// Composite Gauss–Legendre nodes on `[0, 1]`, split at coefficient
/// breakpoints, with panelwise Lagrange interpolation and cumulative
/// integration.
#[derive(Debug, Clone, Serialize)]
pub struct ModeGrid {
    pub order: usize,
    pub panels_per_unit: usize,
    pub edges: Vec<f64>,
    pub xs: Vec<f64>,
    pub wx: Vec<f64>,
    /// `cum[p][(i, l)] = ∫_{e_p}^{x_i} L_l`, local to panel `p`.
    #[serde(skip)]
    cum: Vec<DMatrix<f64>>,
}

impl ModeGrid {
    pub fn new(order: usize, panels_per_unit: usize, breakpoints: &[f64]) -> Result<Self> {
        if order < 2 || panels_per_unit == 0 {
            return Err(Error::Invalid("mode grid needs order ≥ 2 and at least one panel".into()));
        }
        let rule = GaussRule::legendre(order);
        let edges = panel_edges(0.0, 1.0, breakpoints, panels_per_unit);
        let mut xs = Vec::new();
        let mut wx = Vec::new();
        let mut cum = Vec::new();
        for w in edges.windows(2) {
            let nodes: Vec<(f64, f64)> = rule.mapped(w[0], w[1]).collect();
            let local: Vec<f64> = nodes.iter().map(|p| p.0).collect();
            let c = DMatrix::from_fn(order, order, |i, l| {
                rule.integrate(w[0], local[i], |y| lagrange(&local, l, y))
            });
            xs.extend(local);
            wx.extend(nodes.iter().map(|p| p.1));
            cum.push(c);
        }
        Ok(ModeGrid { order, panels_per_unit, edges, xs, wx, cum })
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    /// `(Cg)_i ≈ ∫_0^{x_i} g`.
    pub fn cumulative_matrix(&self) -> DMatrix<f64> {
        let (q, n) = (self.order, self.len());
        let mut c = DMatrix::zeros(n, n);
        for p in 0..self.cum.len() {
            for i in 0..q {
                let row = p * q + i;
                for pp in 0..p {
                    for l in 0..q {
                        c[(row, pp * q + l)] = self.wx[pp * q + l];
                    }
                }
                for l in 0..q {
                    c[(row, p * q + l)] = self.cum[p][(i, l)];
                }
            }
        }
        c
    }

    pub fn cumulative(&self, g: &[f64]) -> Vec<f64> {
        let q = self.order;
        let mut out = vec![0.0; self.len()];
        let mut base = 0.0;
        for (p, c) in self.cum.iter().enumerate() {
            let seg = &g[p * q..(p + 1) * q];
            for i in 0..q {
                out[p * q + i] = base + (0..q).map(|l| c[(i, l)] * seg[l]).sum::<f64>();
            }
            base += (0..q).map(|l| self.wx[p * q + l] * seg[l]).sum::<f64>();
        }
        out
    }

    pub fn integral(&self, g: &[f64]) -> f64 {
        g.iter().zip(&self.wx).map(|(a, w)| a * w).sum()
    }

    /// Panelwise polynomial interpolation of nodal values at `x`.
    pub fn interpolate(&self, values: &[C64], x: f64) -> C64 {
        let q = self.order;
        let p = self
            .edges
            .windows(2)
            .position(|w| x <= w[1])
            .unwrap_or(self.edges.len() - 2);
        let local = &self.xs[p * q..(p + 1) * q];
        (0..q).map(|l| values[p * q + l] * lagrange(local, l, x)).sum()
    }

    /// Mode field sampled at the grid nodes from `nt` time samples.
    pub fn field_from_fn<F>(&self, n: usize, s_max: usize, nt: usize, f: F) -> Result<FourierField>
    where
        F: Fn(usize, f64, f64) -> f64,
    {
        FourierField::from_fn(n, s_max, self.xs.clone(), self.wx.clone(), nt, f)
    }

    /// Mode field on this grid, interpolating each mode linearly when `f`
    /// lives on other nodes.
    pub fn resample(&self, f: &FourierField) -> FourierField {
        if f.xs == self.xs {
            return f.clone();
        }
        let mut out = FourierField::zeros(f.n, f.s_max, self.xs.clone(), self.wx.clone());
        let (nx, nn) = (f.nx(), self.len());
        for s in f.s_range() {
            let src = f.mode(s);
            let mut v = vec![C64::new(0.0, 0.0); f.n * nn];
            for j in 0..f.n {
                for (i, &x) in self.xs.iter().enumerate() {
                    let k = f.xs.partition_point(|&y| y < x).clamp(1, nx - 1);
                    let (x0, x1) = (f.xs[k - 1], f.xs[k]);
                    let th = ((x - x0) / (x1 - x0)).clamp(0.0, 1.0);
                    v[j * nn + i] = src[j * nx + k - 1] * (1.0 - th) + src[j * nx + k] * th;
                }
            }
            out.set_mode(s, &v);
        }
        out
    }
}

fn lagrange(nodes: &[f64], l: usize, y: f64) -> f64 {
    nodes
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != l)
        .map(|(_, &xk)| (y - xk) / (nodes[l] - xk))
        .product()
}

/// Algebraic checks on one assembled block.
#[derive(Debug, Clone, Serialize)]
pub struct ParametrixCheck {
    pub s: i64,
    /// `max |(I−D)(I+D) − (I−D²)|` over `max (|I−D||I+D|)`, in units of machine epsilon.
    pub identity_defect_eps: f64,
    /// Dimension of the block; the rounding bound of a dense product is this many epsilons.
    pub dimension: usize,
    /// `‖D_s‖₂` in the weighted `L²` norm.
    pub d_norm: f64,
    /// Singular values of `D_s²` in the weighted `L²` norm, descending.
    pub d2_singular_values: Vec<f64>,
    /// `σ_1 / σ_{N_x/2}` of `D_s²`.
    pub d2_decay: f64,
}

/// The discretized operators `𝒜_s⁻¹` and `𝒟_s = b¹ 𝒜_s⁻¹` for every mode.
#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    pub ms: ModeSystem,
    pub grid: ModeGrid,
    pub s_max: usize,
    /// `α_j(x_i)`, `β_j(x_i)` and their totals.
    alpha: Vec<Vec<f64>>,
    beta: Vec<Vec<f64>>,
    alpha1: Vec<f64>,
    beta1: Vec<f64>,
    speed: Vec<Vec<f64>>,
    /// `b_jk(x_i)`.
    coupling: Vec<Vec<Vec<f64>>>,
    cum: DMatrix<f64>,
}

/// Assembles the discrete family after checking that every sampled margin is positive.
#[allow(non_snake_case)]
pub fn build_discrete_D(ms: &ModeSystem, s_max: usize, grid: ModeGrid) -> Result<DiscreteOperator> {
    let iso = iso_margins(&ms.sys, &ms.profiles, &ms.refl, s_max);
    if iso.min_margin <= SINGULAR_MARGIN {
        return Err(Error::SingularMode { s: iso.worst_s, margin: iso.min_margin });
    }
    Ok(DiscreteOperator::new(ms, s_max, grid))
}

impl DiscreteOperator {
    /// Assembly data without the margin check; singular modes are then
    /// only reachable through [`DiscreteOperator::k_system`].
    pub fn new(ms: &ModeSystem, s_max: usize, grid: ModeGrid) -> Self {
        let n = ms.n();
        let xs = &grid.xs;
        let speed: Vec<Vec<f64>> = (0..n).map(|j| xs.iter().map(|&x| ms.a(j, x)).collect()).collect();
        let coupling = (0..n)
            .map(|j| (0..n).map(|k| xs.iter().map(|&x| ms.b(j, k, x)).collect()).collect())
            .collect::<Vec<Vec<Vec<f64>>>>();
        let inv: Vec<Vec<f64>> = speed.iter().map(|a| a.iter().map(|v| 1.0 / v).collect()).collect();
        let damp: Vec<Vec<f64>> = (0..n)
            .map(|j| inv[j].iter().zip(&coupling[j][j]).map(|(i, b)| i * b).collect())
            .collect();
        let alpha = inv.iter().map(|g| grid.cumulative(g)).collect();
        let beta = damp.iter().map(|g| grid.cumulative(g)).collect();
        let alpha1 = inv.iter().map(|g| grid.integral(g)).collect();
        let beta1 = damp.iter().map(|g| grid.integral(g)).collect();
        let cum = grid.cumulative_matrix();
        DiscreteOperator {
            ms: ms.clone(),
            grid,
            s_max,
            alpha,
            beta,
            alpha1,
            beta1,
            speed,
            coupling,
            cum,
        }
    }

    pub fn n(&self) -> usize {
        self.ms.n()
    }

    pub fn nx(&self) -> usize {
        self.grid.len()
    }

    pub fn dim(&self) -> usize {
        self.n() * self.nx()
    }

    /// Node weights repeated per component.
    pub fn weights(&self) -> Vec<f64> {
        (0..self.n()).flat_map(|_| self.grid.wx.iter().copied()).collect()
    }

    fn phi(&self, j: usize, i: usize, s: i64) -> C64 {
        C64::new(self.beta[j][i], s as f64 * self.alpha[j][i])
    }

    fn phi1(&self, j: usize, s: i64) -> C64 {
        C64::new(self.beta1[j], s as f64 * self.alpha1[j])
    }

    /// `P[jj][k] = e^{φ_{m+jj}(1) − φ_k(1)} r¹_{jj,k}`.
    fn transfer(&self, s: i64) -> CMat {
        let (n, m) = (self.n(), self.ms.m());
        CMat::from_fn(n - m, m, |jj, k| {
            (self.phi1(m + jj, s) - self.phi1(k, s)).exp() * self.ms.refl.r1[jj][k]
        })
    }

    /// Discrete `I − R_s` and its determinant modulus.
    pub fn reflection_system(&self, s: i64) -> (CMat, f64) {
        let (n, m) = (self.n(), self.ms.m());
        let p = self.transfer(s);
        let r0 = CMat::from_fn(m, n - m, |j, ll| C64::new(self.ms.refl.r0[j][ll], 0.0));
        let lhs = CMat::identity(n - m, n - m) - &p * r0;
        let det = if n == m { 1.0 } else { lhs.determinant().norm() };
        (lhs, det)
    }

    /// `J1[j][(j, l)] = w_l e^{φ_j(x_l)} / a_j(x_l)`: the map `v ↦ J_j(1)`.
    fn totals(&self, s: i64) -> CMat {
        let (n, nx) = (self.n(), self.nx());
        let mut t = CMat::zeros(n, n * nx);
        for j in 0..n {
            for l in 0..nx {
                t[(j, j * nx + l)] = self.phi(j, l, s).exp() * (self.grid.wx[l] / self.speed[j][l]);
            }
        }
        t
    }

    /// Block `j` of the map `v ↦ e^{−φ_j} J_j`.
    fn local_inverse(&self, j: usize, s: i64) -> CMat {
        let nx = self.nx();
        let e: Vec<C64> = (0..nx).map(|l| self.phi(j, l, s).exp() / self.speed[j][l]).collect();
        CMat::from_fn(nx, nx, |i, l| (-self.phi(j, i, s)).exp() * e[l] * self.cum[(i, l)])
    }

    /// `𝒜_s⁻¹` on nodal values.
    pub fn inverse_a(&self, s: i64) -> Result<CMat> {
        let (n, m, nx) = (self.n(), self.ms.m(), self.nx());
        let (lhs, margin) = self.reflection_system(s);
        if margin <= SINGULAR_MARGIN {
            return Err(Error::SingularMode { s, margin });
        }
        let j1 = self.totals(s);
        let p = self.transfer(s);
        // traces c = û(0) as linear maps of v
        let mut cmap = CMat::zeros(n, n * nx);
        if n > m {
            let rhs = &p * j1.rows(0, m) - j1.rows(m, n - m);
            let left = lhs.lu().solve(&rhs).ok_or(Error::SingularMode { s, margin })?;
            cmap.rows_mut(m, n - m).copy_from(&left);
            for j in 0..m {
                for ll in 0..n - m {
                    let r = self.ms.refl.r0[j][ll];
                    let row = left.row(ll) * C64::new(r, 0.0);
                    let mut dst = cmap.row_mut(j);
                    dst += row;
                }
            }
        }
        let mut g = CMat::zeros(n * nx, n * nx);
        for j in 0..n {
            let local = self.local_inverse(j, s);
            for i in 0..nx {
                let decay = (-self.phi(j, i, s)).exp();
                let mut row = cmap.row(j) * decay;
                for l in 0..nx {
                    row[j * nx + l] += local[(i, l)];
                }
                g.row_mut(j * nx + i).copy_from(&row);
            }
        }
        Ok(g)
    }

    /// `b¹` as a nodal matrix.
    pub fn coupling_matrix(&self) -> CMat {
        let (n, nx) = (self.n(), self.nx());
        let mut b = CMat::zeros(n * nx, n * nx);
        for j in 0..n {
            for k in (0..n).filter(|&k| k != j) {
                for i in 0..nx {
                    b[(j * nx + i, k * nx + i)] = C64::new(self.coupling[j][k][i], 0.0);
                }
            }
        }
        b
    }

    /// `𝒟_s = b¹ 𝒜_s⁻¹`.
    pub fn block(&self, s: i64) -> Result<CMat> {
        Ok(self.coupling_matrix() * self.inverse_a(s)?)
    }

    /// The coupled mode problem in the unknowns `(û, û(0))`, valid for every `s`:
    /// returns `(K, T)` with `K z = T f̂`.
    pub fn k_system(&self, s: i64) -> (CMat, CMat) {
        let (n, m, nx) = (self.n(), self.ms.m(), self.nx());
        let dim = n * nx;
        let b = self.coupling_matrix();
        let j1 = self.totals(s);
        let p = self.transfer(s);
        let mut jmat = CMat::zeros(dim, dim);
        for j in 0..n {
            jmat.view_mut((j * nx, j * nx), (nx, nx)).copy_from(&self.local_inverse(j, s));
        }
        let mut k = CMat::zeros(dim + n, dim + n);
        let mut t = CMat::zeros(dim + n, dim);
        let jb = &jmat * &b;
        k.view_mut((0, 0), (dim, dim)).copy_from(&(CMat::identity(dim, dim) + jb));
        t.view_mut((0, 0), (dim, dim)).copy_from(&jmat);
        for j in 0..n {
            for i in 0..nx {
                k[(j * nx + i, dim + j)] = -(-self.phi(j, i, s)).exp();
            }
        }
        for j in 0..m {
            k[(dim + j, dim + j)] = C64::new(1.0, 0.0);
            for ll in 0..n - m {
                k[(dim + j, dim + m + ll)] = C64::new(-self.ms.refl.r0[j][ll], 0.0);
            }
        }
        let j1b = &j1 * &b;
        for jj in 0..n - m {
            let row = dim + m + jj;
            k[(row, dim + m + jj)] += C64::new(1.0, 0.0);
            let mut ku = -j1b.row(m + jj);
            let mut tu = -j1.row(m + jj);
            for kk in 0..m {
                k[(row, dim + kk)] -= p[(jj, kk)];
                ku += j1b.row(kk) * p[(jj, kk)];
                tu += j1.row(kk) * p[(jj, kk)];
            }
            k.view_mut((row, 0), (1, dim)).copy_from(&ku);
            t.view_mut((row, 0), (1, dim)).copy_from(&tu);
        }
        (k, t)
    }

    /// Identity and decay diagnostics of block `s`.
    pub fn parametrix(&self, s: i64) -> Result<ParametrixCheck> {
        let d = self.block(s)?;
        let dim = d.nrows();
        let id = CMat::identity(dim, dim);
        let d2 = &d * &d;
        let lhs = (&id - &d) * (&id + &d);
        let rhs = &id - &d2;
        let defect = max_abs((&lhs - &rhs).iter());
        let abs = |m: &CMat| m.map(|z| z.norm());
        let scale = (abs(&(&id - &d)) * abs(&(&id + &d))).max();
        let sw: Vec<f64> = self.weights().iter().map(|w| w.sqrt()).collect();
        let weigh = |m: &CMat| CMat::from_fn(dim, dim, |i, l| m[(i, l)] * (sw[i] / sw[l]));
        let d_norm = weigh(&d).singular_values().max();
        let mut sv: Vec<f64> = weigh(&d2).singular_values().iter().copied().collect();
        sv.sort_by(|a, b| b.total_cmp(a));
        let mid = (self.nx() / 2).clamp(1, sv.len()) - 1;
        let d2_decay = if sv[mid] > 0.0 { sv[0] / sv[mid] } else { f64::INFINITY };
        Ok(ParametrixCheck {
            s,
            identity_defect_eps: if scale > 0.0 { defect / scale / f64::EPSILON } else { 0.0 },
            dimension: dim,
            d_norm,
            d2_singular_values: sv,
            d2_decay,
        })
    }

    /// Nodal vector of a mode field on this grid.
    pub fn mode_vector(&self, f: &FourierField, s: i64) -> DVector<C64> {
        DVector::from_column_slice(f.mode(s))
    }
}
