use std::f64::consts::PI;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize, Serializer};

use super::discrete::{DiscreteOperator, ModeGrid, ParametrixCheck};
use super::linalg::{largest_principal_angle, max_abs, nullity, CMat, NullityOptions, NullityVerdict};
use super::profiles::{iso_margins, IsoMargins};
use super::shooting::{adjoint_matching, forward_matching, solve_mode_full, Fundamental};
use super::{FourierField, ModeSystem, C64};
use crate::error::{Error, Result};
use crate::grid::GridFunction;

#[derive(Debug, Clone, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct FredholmConfig {
    pub s_max: usize,
    /// Gauss points per panel of the mode grid.
    pub order: usize,
    pub panels_per_unit: usize,
    pub nullity: NullityOptions,
    /// Discrete `|det(I − R_s)|` below which a mode is solved through the coupled system.
    pub singular_margin: f64,
    /// Residual and obstruction threshold of the solvability verdict.
    pub tol: f64,
    /// Compare each solved mode with the shooting solver.
    pub cross_check: bool,
    /// Exponents of the `W^γ` checks on kernel vectors.
    pub gammas: Vec<f64>,
}

impl Default for FredholmConfig {
    fn default() -> Self {
        FredholmConfig {
            s_max: 64,
            order: 8,
            panels_per_unit: 8,
            nullity: NullityOptions::default(),
            singular_margin: 1e-8,
            tol: 1e-8,
            cross_check: true,
            gammas: vec![1.0, 2.0, 3.0],
        }
    }
}

impl FredholmConfig {
    pub fn grid(&self, ms: &ModeSystem) -> Result<ModeGrid> {
        ModeGrid::new(self.order, self.panels_per_unit, &ms.breakpoints())
    }
}

fn complex_pairs<S: Serializer>(v: &[C64], ser: S) -> std::result::Result<S::Ok, S::Error> {
    ser.collect_seq(v.iter().map(|z| [z.re, z.im]))
}

/// A nodal vector on the mode grid belonging to mode `s`.
#[derive(Debug, Clone, Serialize)]
pub struct ModeVector {
    pub s: i64,
    /// `values[j * nx + i]`, serialized as `[re, im]` pairs.
    #[serde(serialize_with = "complex_pairs")]
    pub values: Vec<C64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ModeNullity {
    pub s: i64,
    /// Discrete `|det(I − R_s)|`.
    pub margin: f64,
    /// Boundary matching of the mode problem.
    pub forward: NullityVerdict,
    /// Boundary matching of the adjoint mode problem.
    pub adjoint: NullityVerdict,
    /// The assembled coupled system on the mode grid.
    pub discrete: NullityVerdict,
    /// Angle between the adjoint-derived and transpose-derived cokernels.
    pub cokernel_angle: Option<f64>,
    /// Angle between the shooting kernel and the discrete kernel.
    pub kernel_angle: Option<f64>,
    /// Forward nullity with the block scaled by `(1+s²)^{γ/2}`, per configured `γ`.
    pub gamma_nullities: Vec<Option<usize>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FredholmReport {
    pub s_max: usize,
    pub grid_nodes: usize,
    pub iso: IsoMargins,
    pub modes: Vec<ModeNullity>,
    pub dim_ker: Option<usize>,
    pub dim_coker: Option<usize>,
    /// `dim ker − dim coker`. When some nullity is indeterminate, the common
    /// value of `index_scan` if it is constant, else `None`.
    pub index: Option<i64>,
    /// `(τ, Σ_s #{σ/σ_max < τ}_forward − #{σ/σ_max < τ}_adjoint)` at
    /// log-spaced `τ` across the indeterminate band.
    pub index_scan: Vec<(f64, i64)>,
    pub kernel: Vec<ModeVector>,
    pub cokernel: Vec<ModeVector>,
    /// Largest forward gap ratio across modes with a rank drop.
    pub min_gap_ratio: Option<f64>,
    pub max_cokernel_angle: f64,
    /// Nullities agree across `γ` and kernel vectors have finite `W^γ` norms.
    pub gamma_invariant: bool,
    /// `‖u‖_{W^γ}` of each kernel vector, per configured `γ`.
    pub kernel_w_norms: Vec<Vec<f64>>,
    pub parametrix: Vec<ParametrixCheck>,
    pub max_block_norm: f64,
    pub max_identity_defect_eps: f64,
    pub min_d2_decay: Option<f64>,
}

fn sample(fund: &Fundamental, xs: &[f64], c: &DVector<C64>, scale: impl Fn(usize, f64) -> f64) -> Vec<C64> {
    let n = c.len();
    let nx = xs.len();
    let mut out = vec![C64::new(0.0, 0.0); n * nx];
    for (i, &x) in xs.iter().enumerate() {
        let v = fund.phi(x) * c;
        for j in 0..n {
            out[j * nx + i] = v[j] * scale(j, x);
        }
    }
    out
}

/// Cokernel of mode `s` from the adjoint problem, sampled on the grid:
/// `û = Ψ(x) c / a` with `Ψ` the adjoint fundamental matrix of `w = a û`.
fn mode_cokernel(ms: &ModeSystem, s: i64, xs: &[f64], opts: &NullityOptions) -> Result<(NullityVerdict, Vec<Vec<C64>>)> {
    let fund = ms.adjoint_fundamental(s)?;
    let verdict = nullity(&adjoint_matching(&ms.refl, &fund.phi(1.0)), opts);
    let basis = verdict
        .right
        .iter()
        .map(|c| sample(&fund, xs, c, |j, x| 1.0 / ms.a(j, x)))
        .collect();
    Ok((verdict, basis))
}

fn weighted_inner(a: &[C64], b: &[C64], w: &[f64]) -> C64 {
    a.iter().zip(b).zip(w).map(|((x, y), w)| x * y.conj() * *w).sum()
}

/// Weighted Gram–Schmidt.
fn orthonormalize(vectors: &[Vec<C64>], w: &[f64]) -> Vec<Vec<C64>> {
    let mut out: Vec<Vec<C64>> = Vec::new();
    for v in vectors {
        let mut u = v.clone();
        for e in &out {
            let c = weighted_inner(&u, e, w);
            for (ui, ei) in u.iter_mut().zip(e) {
                *ui -= c * ei;
            }
        }
        let norm = weighted_inner(&u, &u, w).re.sqrt();
        if norm > 0.0 {
            out.push(u.iter().map(|z| z / norm).collect());
        }
    }
    out
}

fn mode_w_norm(v: &[C64], w: &[f64], s: i64, gamma: f64) -> f64 {
    ((1.0 + (s * s) as f64).powf(gamma) * weighted_inner(v, v, w).re).sqrt()
}

fn analyze_mode(ms: &ModeSystem, dop: &DiscreteOperator, s: i64, cfg: &FredholmConfig) -> Result<(ModeNullity, Vec<Vec<C64>>, Vec<Vec<C64>>)> {
    let xs = &dop.grid.xs;
    let weights = dop.weights();
    let fund = ms.forward_fundamental(s)?;
    let matching = forward_matching(&ms.refl, &fund.phi(1.0));
    let forward = nullity(&matching, &cfg.nullity);
    let kernel: Vec<Vec<C64>> = forward.right.iter().map(|c| sample(&fund, xs, c, |_, _| 1.0)).collect();
    let (adjoint, cokernel) = mode_cokernel(ms, s, xs, &cfg.nullity)?;

    let (k, t) = dop.k_system(s);
    let discrete = nullity(&k, &cfg.nullity);
    let dim = dop.dim();
    let transpose: Vec<DVector<C64>> = discrete
        .left
        .iter()
        .map(|y| {
            let q = t.adjoint() * y;
            DVector::from_fn(dim, |i, _| q[i] / weights[i])
        })
        .collect();
    let as_vec = |v: &Vec<C64>| DVector::from_column_slice(v);
    let cokernel_angle = (!cokernel.is_empty() || !transpose.is_empty())
        .then(|| largest_principal_angle(&cokernel.iter().map(as_vec).collect::<Vec<_>>(), &transpose, &weights));
    let discrete_kernel: Vec<DVector<C64>> = discrete.right.iter().map(|z| z.rows(0, dim).into_owned()).collect();
    let kernel_angle = (!kernel.is_empty() || !discrete_kernel.is_empty())
        .then(|| largest_principal_angle(&kernel.iter().map(as_vec).collect::<Vec<_>>(), &discrete_kernel, &weights));
    let gamma_nullities = cfg
        .gammas
        .iter()
        .map(|g| {
            let scaled: CMat = &matching * C64::new((1.0 + (s * s) as f64).powf(0.5 * g), 0.0);
            nullity(&scaled, &cfg.nullity).nullity
        })
        .collect();
    Ok((
        ModeNullity {
            s,
            margin: dop.reflection_system(s).1,
            forward,
            adjoint,
            discrete,
            cokernel_angle,
            kernel_angle,
            gamma_nullities,
        },
        kernel,
        cokernel,
    ))
}

fn count_below(sv: &[f64], tau: f64) -> i64 {
    let top = sv.first().copied().unwrap_or(0.0);
    if top == 0.0 {
        return sv.len() as i64;
    }
    sv.iter().filter(|&&v| v / top < tau).count() as i64
}

fn index_scan(modes: &[ModeNullity], opts: &NullityOptions) -> Vec<(f64, i64)> {
    const POINTS: usize = 7;
    let (lo, hi) = (opts.gap.ln(), opts.full_rank.ln());
    (0..POINTS)
        .map(|k| {
            let tau = (lo + (hi - lo) * k as f64 / (POINTS - 1) as f64).exp();
            let idx = modes
                .iter()
                .map(|m| count_below(&m.forward.singular_values, tau) - count_below(&m.adjoint.singular_values, tau))
                .sum();
            (tau, idx)
        })
        .collect()
}

/// Per-mode nullities of the mode operator and its adjoint, their bases and the index.
pub fn kernel_and_index(ms: &ModeSystem, cfg: &FredholmConfig) -> Result<FredholmReport> {
    let grid = cfg.grid(ms)?;
    let dop = DiscreteOperator::new(ms, cfg.s_max, grid);
    let weights = dop.weights();
    let iso = iso_margins(&ms.sys, &ms.profiles, &ms.refl, cfg.s_max);
    let s_max = cfg.s_max as i64;
    let results: Vec<_> = (-s_max..=s_max)
        .into_par_iter()
        .map(|s| analyze_mode(ms, &dop, s, cfg))
        .collect::<Result<Vec<_>>>()?;
    let coupled = !ms.off_diagonal_zero();
    let parametrix: Vec<ParametrixCheck> = if coupled {
        (-s_max..=s_max)
            .into_par_iter()
            .filter(|&s| dop.reflection_system(s).1 > cfg.singular_margin)
            .map(|s| dop.parametrix(s))
            .collect::<Result<Vec<_>>>()?
    } else {
        Vec::new()
    };

    let mut modes = Vec::new();
    let mut kernel = Vec::new();
    let mut cokernel = Vec::new();
    for (m, k, c) in results {
        kernel.extend(k.into_iter().map(|values| ModeVector { s: m.s, values }));
        cokernel.extend(c.into_iter().map(|values| ModeVector { s: m.s, values }));
        modes.push(m);
    }
    let sum = |f: &dyn Fn(&ModeNullity) -> Option<usize>| modes.iter().map(f).sum::<Option<usize>>();
    let dim_ker = sum(&|m| m.forward.nullity);
    let dim_coker = sum(&|m| m.adjoint.nullity);
    let index_scan = index_scan(&modes, &cfg.nullity);
    let index = match dim_ker.zip(dim_coker) {
        Some((k, c)) => Some(k as i64 - c as i64),
        None => {
            let first = index_scan[0].1;
            index_scan.iter().all(|&(_, i)| i == first).then_some(first)
        }
    };
    let min_gap_ratio = modes
        .iter()
        .filter(|m| m.forward.nullity.is_some_and(|k| k > 0))
        .map(|m| m.forward.gap_ratio)
        .reduce(f64::min);
    let max_cokernel_angle = modes.iter().filter_map(|m| m.cokernel_angle).fold(0.0, f64::max);
    let kernel_w_norms: Vec<Vec<f64>> = kernel
        .iter()
        .map(|v| cfg.gammas.iter().map(|&g| mode_w_norm(&v.values, &weights, v.s, g)).collect())
        .collect();
    let gamma_invariant = modes
        .iter()
        .all(|m| m.gamma_nullities.iter().all(|g| *g == m.forward.nullity))
        && kernel_w_norms.iter().flatten().all(|x| x.is_finite());
    Ok(FredholmReport {
        s_max: cfg.s_max,
        grid_nodes: dop.nx(),
        iso,
        modes,
        dim_ker,
        dim_coker,
        index,
        index_scan,
        kernel,
        cokernel,
        min_gap_ratio,
        max_cokernel_angle,
        gamma_invariant,
        kernel_w_norms,
        max_block_norm: parametrix.iter().map(|p| p.d_norm).fold(0.0, f64::max),
        max_identity_defect_eps: parametrix.iter().map(|p| p.identity_defect_eps).fold(0.0, f64::max),
        min_d2_decay: parametrix.iter().map(|p| p.d2_decay).reduce(f64::min),
        parametrix,
    })
}

/// Cokernel basis, mode by mode, from the adjoint boundary value problem.
pub fn adjoint_solve(ms: &ModeSystem, cfg: &FredholmConfig) -> Result<Vec<ModeVector>> {
    let grid = cfg.grid(ms)?;
    let s_max = cfg.s_max as i64;
    let per_mode = (-s_max..=s_max)
        .into_par_iter()
        .map(|s| {
            let (verdict, basis) = mode_cokernel(ms, s, &grid.xs, &cfg.nullity)?;
            if verdict.nullity.is_none() {
                return Err(Error::Invalid(format!(
                    "adjoint nullity of mode {s} is indeterminate (gap ratio {:.3e})",
                    verdict.gap_ratio
                )));
            }
            Ok(basis.into_iter().map(|values| ModeVector { s, values }).collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_mode.into_iter().flatten().collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolvePath {
    /// `(I + 𝒟_s) v = f̂_s` by LU, then `û = 𝒜_s⁻¹ v`.
    Parametrix,
    /// Least squares on the coupled system in `(û, û(0))`.
    LeastSquares,
}

#[derive(Debug, Clone, Serialize)]
pub struct ModeSolveLog {
    pub s: i64,
    pub path: SolvePath,
    pub margin: f64,
    /// Relative residual of the linear system actually solved.
    pub residual: f64,
    /// `‖P f̂_s‖` with `P` the projection on the mode cokernel, in the `L²` pairing.
    pub obstruction: f64,
    pub cokernel_dim: Option<usize>,
    /// `max |û − û_shoot| / max(1, max |û|)` against the shooting solver.
    pub cross_check: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FredholmSolution {
    /// Modes of the solution at the grid nodes.
    #[serde(skip)]
    pub u: FourierField,
    pub modes: Vec<ModeSolveLog>,
    pub residual: f64,
    /// `(Σ_s obstruction_s²)^{1/2}`.
    pub obstruction: f64,
    pub f_norm: f64,
    pub solvable: bool,
    pub max_cross_check: Option<f64>,
    pub reality_defect: f64,
}

impl FredholmSolution {
    pub fn to_grid(&self, nt: usize) -> GridFunction {
        super::from_modes(&self.u, nt)
    }
}

fn solve_one(
    ms: &ModeSystem,
    dop: &DiscreteOperator,
    f: &FourierField,
    s: i64,
    cfg: &FredholmConfig,
) -> Result<(Vec<C64>, ModeSolveLog)> {
    let dim = dop.dim();
    let weights = dop.weights();
    let fs = DVector::from_column_slice(f.mode(s));
    let (coverdict, cobasis) = mode_cokernel(ms, s, &dop.grid.xs, &cfg.nullity)?;
    let ortho = orthonormalize(&cobasis, &weights);
    let obstruction = ortho
        .iter()
        .map(|e| weighted_inner(f.mode(s), e, &weights).norm_sqr())
        .sum::<f64>()
        .sqrt()
        / (2.0 * PI);
    let margin = dop.reflection_system(s).1;
    let wnorm = |v: &DVector<C64>| v.iter().zip(&weights).map(|(z, w)| z.norm_sqr() * w).sum::<f64>().sqrt();

    let mut attempt = None;
    if margin >= cfg.singular_margin && coverdict.nullity == Some(0) {
        let g = dop.inverse_a(s)?;
        let d = dop.coupling_matrix() * &g;
        let lhs = CMat::identity(dim, dim) + &d;
        if let Some(v) = lhs.clone().lu().solve(&fs) {
            let res = wnorm(&(&lhs * &v - &fs)) / wnorm(&fs).max(f64::MIN_POSITIVE);
            attempt = Some(((g * v).iter().copied().collect::<Vec<_>>(), SolvePath::Parametrix, res));
        }
    }
    let (u, path, residual) = match attempt {
        Some(a) => a,
        None => {
            let (k, t) = dop.k_system(s);
            let rhs = &t * &fs;
            let svd = k.clone().svd(true, true);
            let cut = cfg.nullity.gap * svd.singular_values.max();
            let z = svd.solve(&rhs, cut).map_err(|e| Error::Invalid(e.to_string()))?;
            let res = (&k * &z - &rhs).norm() / rhs.norm().max(f64::MIN_POSITIVE);
            (z.rows(0, dim).iter().copied().collect(), SolvePath::LeastSquares, res)
        }
    };
    let cross_check = if cfg.cross_check && path == SolvePath::Parametrix && max_abs(fs.iter()) > 0.0 {
        let n = dop.n();
        let nx = dop.nx();
        let grid = &dop.grid;
        let fmode = f.mode(s);
        let interp = |x: f64| DVector::from_fn(n, |j, _| grid.interpolate(&fmode[j * nx..(j + 1) * nx], x));
        let full = solve_mode_full(ms, s, interp, &grid.xs)?;
        let scale = u.iter().map(|z| z.norm()).fold(1.0, f64::max);
        Some(u.iter().zip(&full.u).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max) / scale)
    } else {
        None
    };
    Ok((
        u,
        ModeSolveLog {
            s,
            path,
            margin,
            residual,
            obstruction,
            cokernel_dim: coverdict.nullity,
            cross_check,
        },
    ))
}

/// Solves `(𝒜 + ℬ) u = f` mode by mode through the parametrix, falling back to
/// least squares on singular modes, and tests solvability against the cokernel.
pub fn fredholm_solve(ms: &ModeSystem, f: &FourierField, cfg: &FredholmConfig) -> Result<FredholmSolution> {
    if f.n != ms.n() {
        return Err(Error::Invalid(format!("forcing has {} components, system has {}", f.n, ms.n())));
    }
    let grid = cfg.grid(ms)?;
    let f = grid.resample(f);
    let dop = DiscreteOperator::new(ms, f.s_max, grid);
    let s_max = f.s_max as i64;
    let solved = (-s_max..=s_max)
        .into_par_iter()
        .map(|s| solve_one(ms, &dop, &f, s, cfg))
        .collect::<Result<Vec<_>>>()?;
    let mut u = FourierField::zeros(f.n, f.s_max, f.xs.clone(), f.wx.clone());
    let mut modes = Vec::new();
    for (s, (v, log)) in (-s_max..=s_max).zip(solved) {
        u.set_mode(s, &v);
        modes.push(log);
    }
    let residual = modes.iter().map(|m| m.residual).fold(0.0, f64::max);
    let obstruction = modes.iter().map(|m| m.obstruction * m.obstruction).sum::<f64>().sqrt();
    let f_norm = f.l2_pairing(&f)?.sqrt();
    let max_cross_check = modes.iter().filter_map(|m| m.cross_check).reduce(f64::max);
    let solvable = residual <= cfg.tol && obstruction <= cfg.tol * f_norm.max(1.0);
    Ok(FredholmSolution {
        reality_defect: u.reality_defect(),
        u,
        modes,
        residual,
        obstruction,
        f_norm,
        solvable,
        max_cross_check,
    })
}
