//! Fixed-point solvers for the characteristic integral system
//! `u = B S u + D u + F f` on a half strip (time slabs) and on the periodic
//! strip (full-period iteration).

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boundary::{local_value, BoundaryOperator};
use crate::characteristics::{ExitKind, ExitPoint, TraceOptions, Tracer};
use crate::coefficient::CoefficientField;
use crate::error::{Error, Result};
use crate::grid::{linspace, GridFunction, Interpolation};
use crate::operators::{ExitData, Forcing, OperatorContext};
use crate::population::{AgeModel, BirthRow};
use crate::system::{HyperbolicSystem, TimeDomain, PERIOD};

/// A system together with its boundary operator and initial data.
#[derive(Debug, Clone)]
pub struct Problem {
    pub sys: Arc<HyperbolicSystem>,
    pub bc: BoundaryOperator,
    /// `φ_j(x)`, required on a half strip.
    pub initial: Option<Vec<CoefficientField>>,
}

impl Problem {
    pub fn new(sys: HyperbolicSystem, bc: BoundaryOperator, initial: Option<Vec<CoefficientField>>) -> Result<Self> {
        bc.validate(&sys)?;
        if let Some(phi) = &initial {
            if phi.len() != sys.n() {
                return Err(Error::Invalid(format!("initial data needs {} components", sys.n())));
            }
        }
        Ok(Problem {
            sys: Arc::new(sys),
            bc,
            initial,
        })
    }

    pub fn with_initial(&self, initial: Option<Vec<CoefficientField>>) -> Result<Self> {
        Problem::new((*self.sys).clone(), self.bc.clone(), initial)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct SolveConfig {
    pub nx: usize,
    pub nt: usize,
    /// Sup-norm change at which the fixed-point iteration stops.
    pub tol: f64,
    pub max_iter: usize,
    pub relaxation: f64,
    /// Defaults to 0.9 × the minimal boundary-to-boundary transit time.
    pub slab_width: Option<f64>,
    pub interpolation: Interpolation,
    pub gauss_points: usize,
    pub panels_per_unit: usize,
    pub trace_tol: f64,
    /// Size of the shifted verification grid; `None` skips the certificate.
    pub verify: Option<[usize; 2]>,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            nx: 101,
            nt: 101,
            tol: 1e-10,
            max_iter: 500,
            relaxation: 1.0,
            slab_width: None,
            interpolation: Interpolation::Bilinear,
            gauss_points: 4,
            panels_per_unit: 16,
            trace_tol: 1e-11,
            verify: Some([16, 16]),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SlabLog {
    pub index: usize,
    pub t_start: f64,
    pub t_end: f64,
    pub iterations: usize,
    pub last_change: f64,
    /// Geometric mean of the last successive-change ratios.
    pub contraction: f64,
    pub relaxation: f64,
    /// Every characteristic from this slab exits laterally.
    pub all_lateral: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolutionBundle {
    #[serde(skip)]
    pub u: GridFunction,
    /// `max |u − (BSu + Du + Ff)|` over the grid nodes.
    pub residual: f64,
    /// The same defect on a shifted verification grid.
    pub verification_residual: Option<f64>,
    pub iterations: usize,
    pub slabs: Vec<SlabLog>,
    /// Start of the first slab that no longer sees the initial data.
    pub t1: Option<f64>,
    pub warnings: Vec<String>,
}

struct NodeStencil {
    exit: ExitPoint,
    c_exit: f64,
    f_val: f64,
    q_start: usize,
    q_len: usize,
}

/// Precomputed characteristic data for every grid node.
struct Stencils {
    n: usize,
    nx: usize,
    nt: usize,
    nodes: Vec<NodeStencil>,
    q_xi: Vec<f64>,
    q_omega: Vec<f64>,
    /// `−w·d_j·b_jk` for each node and `k` (zero for `k = j`).
    q_coef: Vec<f64>,
}

impl Stencils {
    fn index(&self, j: usize, i: usize, k: usize) -> usize {
        (j * self.nt + k) * self.nx + i
    }
}

/// Solver state shared by both strip types.
pub struct Solver {
    problem: Problem,
    ctx: OperatorContext,
    cfg: SolveConfig,
    age: Option<AgeModel>,
    age_rows: Vec<BirthRow>,
}

impl Solver {
    pub fn new(problem: &Problem, cfg: &SolveConfig) -> Result<Self> {
        if cfg.nx < 2 || cfg.nt < 2 {
            return Err(Error::Invalid("solver grid needs at least 2 points per axis".into()));
        }
        if !(cfg.relaxation > 0.0 && cfg.relaxation <= 1.0) {
            return Err(Error::Invalid("relaxation must lie in (0, 1]".into()));
        }
        let tracer = Tracer::with_options(
            problem.sys.clone(),
            TraceOptions {
                tol: cfg.trace_tol,
                ..Default::default()
            },
        );
        let ctx = OperatorContext::new(Arc::new(tracer)).with_resolution(cfg.gauss_points, cfg.panels_per_unit);
        let age = match &problem.bc {
            BoundaryOperator::IntegralAge { h, gamma } => Some(AgeModel::new(
                ctx.clone(),
                gamma.clone(),
                h.clone(),
                problem.initial.as_ref().map(|p| p[0].clone()),
                cfg.panels_per_unit,
            )?),
            _ => None,
        };
        Ok(Solver {
            problem: problem.clone(),
            ctx,
            cfg: cfg.clone(),
            age,
            age_rows: Vec::new(),
        })
    }

    pub fn context(&self) -> &OperatorContext {
        &self.ctx
    }

    pub fn problem(&self) -> &Problem {
        &self.problem
    }

    fn sys(&self) -> &HyperbolicSystem {
        &self.problem.sys
    }

    fn build_stencils(&self, grid: &GridFunction) -> Result<Stencils> {
        let sys = self.sys();
        let (n, nx, nt) = (sys.n(), grid.nx(), grid.nt());
        let xs = grid.xs().to_vec();
        let ts = grid.ts().to_vec();
        let forcing = !sys.forcing_is_zero();
        let built: Vec<_> = (0..n * nt * nx)
            .into_par_iter()
            .map(|idx| -> Result<_> {
                let j = idx / (nt * nx);
                let k = (idx / nx) % nt;
                let i = idx % nx;
                let (x, t) = (xs[i], ts[k]);
                let (exit, c_exit, nodes) = self.ctx.nodes(j, x, t)?;
                let f_val = if forcing {
                    nodes.iter().map(|q| q.wd * sys.f(j, q.xi, q.omega)).sum()
                } else {
                    0.0
                };
                let coupled: Vec<usize> = (0..n).filter(|&k| k != j && !sys.b_field(j, k).is_zero()).collect();
                let mut qs = Vec::new();
                if !coupled.is_empty() {
                    for q in &nodes {
                        let mut coef = vec![0.0; n];
                        for &kk in &coupled {
                            coef[kk] = -q.wd * sys.b(j, kk, q.xi, q.omega);
                        }
                        qs.push((q.xi, q.omega, coef));
                    }
                }
                Ok((exit, c_exit, f_val, qs))
            })
            .collect::<Result<_>>()?;
        let mut st = Stencils {
            n,
            nx,
            nt,
            nodes: Vec::with_capacity(built.len()),
            q_xi: Vec::new(),
            q_omega: Vec::new(),
            q_coef: Vec::new(),
        };
        for (exit, c_exit, f_val, qs) in built {
            let q_start = st.q_xi.len();
            for (xi, om, coef) in &qs {
                st.q_xi.push(*xi);
                st.q_omega.push(*om);
                st.q_coef.extend_from_slice(coef);
            }
            st.nodes.push(NodeStencil {
                exit,
                c_exit,
                f_val,
                q_start,
                q_len: qs.len(),
            });
        }
        Ok(st)
    }

    fn build_age_rows(&mut self, grid: &GridFunction) -> Result<()> {
        if let Some(age) = &self.age {
            let ts = grid.ts();
            let hist: Vec<f64> = if grid.is_periodic() {
                (-(grid.nt() as i64)..grid.nt() as i64)
                    .map(|k| PERIOD * k as f64 / grid.nt() as f64)
                    .collect()
            } else {
                ts.to_vec()
            };
            self.age_rows = ts
                .par_iter()
                .map(|&t| age.row(t, &hist, grid.xs()))
                .collect::<Result<_>>()?;
        }
        Ok(())
    }

    /// `(R u)_j(τ)` for a lateral exit; `row` marks an exit at a grid node
    /// on the boundary, where the birth integral is evaluated directly.
    fn lateral(&self, u: &GridFunction, j: usize, tau: f64, row: Option<usize>) -> f64 {
        let sys = self.sys();
        match &self.problem.bc {
            BoundaryOperator::ClassicalTrace { .. } => local_value(&self.problem.bc, sys.m(), j, tau, &[], &[]),
            BoundaryOperator::IntegralAge { .. } => match (row, &self.age) {
                (Some(k), Some(age)) if k < self.age_rows.len() => {
                    let z = self.age_rows[k].integral(|s| u.eval(0, 0.0, s));
                    age.birth(tau, z)
                }
                _ => u.eval(0, 0.0, tau),
            },
            bc => {
                let n = sys.n();
                let left: Vec<f64> = (0..n).map(|k| u.eval(k, 0.0, tau)).collect();
                let right: Vec<f64> = (0..n).map(|k| u.eval(k, 1.0, tau)).collect();
                local_value(bc, sys.m(), j, tau, &left, &right)
            }
        }
    }

    fn exit_value(&self, u: &GridFunction, j: usize, exit: &ExitPoint, row: Option<usize>) -> Result<f64> {
        match exit.kind {
            ExitKind::Initial => Ok(self
                .problem
                .initial
                .as_ref()
                .ok_or(Error::MissingInitialData)?[j]
                .eval(exit.x, exit.tau)),
            ExitKind::Lateral => Ok(self.lateral(u, j, exit.tau, row)),
        }
    }

    /// `(BSu + Du + Ff)` at node `(j, i, k)`.
    fn apply_at(&self, st: &Stencils, u: &GridFunction, j: usize, i: usize, k: usize) -> Result<f64> {
        let node = &st.nodes[st.index(j, i, k)];
        let at_node = node.exit.x == u.xs()[i] && node.exit.tau == u.ts()[k];
        let s = self.exit_value(u, j, &node.exit, at_node.then_some(k))?;
        let mut v = node.c_exit * s + node.f_val;
        for q in node.q_start..node.q_start + node.q_len {
            let (xi, om) = (st.q_xi[q], st.q_omega[q]);
            let coef = &st.q_coef[q * st.n..(q + 1) * st.n];
            for (kk, c) in coef.iter().enumerate() {
                if *c != 0.0 {
                    v += c * u.eval(kk, xi, om);
                }
            }
        }
        Ok(v)
    }

    fn apply_rows(&self, st: &Stencils, u: &GridFunction, rows: std::ops::Range<usize>) -> Result<Vec<f64>> {
        let (n, nx) = (st.n, st.nx);
        let nr = rows.len();
        (0..n * nr * nx)
            .into_par_iter()
            .map(|idx| {
                let j = idx / (nr * nx);
                let k = rows.start + (idx / nx) % nr;
                let i = idx % nx;
                self.apply_at(st, u, j, i, k)
            })
            .collect()
    }

    fn write_rows(u: &mut GridFunction, rows: std::ops::Range<usize>, vals: &[f64], relax: f64) -> f64 {
        let (n, nx) = (u.n(), u.nx());
        let nr = rows.len();
        let mut change: f64 = 0.0;
        for j in 0..n {
            for (r, k) in rows.clone().enumerate() {
                for i in 0..nx {
                    let new = vals[(j * nr + r) * nx + i];
                    let old = u.get(j, i, k);
                    let upd = relax * new + (1.0 - relax) * old;
                    change = change.max((new - old).abs());
                    u.set(j, i, k, upd);
                }
            }
        }
        change
    }

    /// Picard iteration on `rows`, halving the relaxation twice on divergence.
    fn iterate_rows(
        &self,
        st: &Stencils,
        u: &mut GridFunction,
        rows: std::ops::Range<usize>,
        slab: usize,
    ) -> Result<(usize, f64, f64, f64)> {
        let snapshot: Vec<Vec<f64>> = (0..u.n())
            .map(|j| rows.clone().flat_map(|k| u.row(j, k).to_vec()).collect())
            .collect();
        let mut relax = self.cfg.relaxation;
        let mut last_ratio = f64::NAN;
        for _attempt in 0..3 {
            let mut changes: Vec<f64> = Vec::new();
            let mut diverged = false;
            for it in 0..self.cfg.max_iter {
                let vals = self.apply_rows(st, u, rows.clone())?;
                let change = Self::write_rows(u, rows.clone(), &vals, relax);
                if !change.is_finite() {
                    diverged = true;
                    break;
                }
                changes.push(change);
                if change <= self.cfg.tol {
                    return Ok((it + 1, change, contraction_estimate(&changes), relax));
                }
                let first = changes[0].max(1e-300);
                let growing = changes.len() > 6 && changes[changes.len() - 6..].windows(2).all(|w| w[1] > w[0]);
                if change > 1e6 * first.max(1.0) || growing {
                    diverged = true;
                    break;
                }
            }
            last_ratio = contraction_estimate(&changes);
            if !diverged {
                return Err(Error::NonConvergence {
                    slab,
                    iterations: self.cfg.max_iter,
                    ratio: last_ratio,
                });
            }
            // restore and retry with a smaller step
            for (j, saved) in snapshot.iter().enumerate() {
                let nx = u.nx();
                for (r, k) in rows.clone().enumerate() {
                    for i in 0..nx {
                        u.set(j, i, k, saved[r * nx + i]);
                    }
                }
            }
            relax *= 0.5;
        }
        Err(Error::NonConvergence {
            slab,
            iterations: self.cfg.max_iter,
            ratio: last_ratio,
        })
    }

    fn nodal_defect(&self, st: &Stencils, u: &GridFunction) -> Result<f64> {
        let vals = self.apply_rows(st, u, 0..u.nt())?;
        let (n, nx, nt) = (u.n(), u.nx(), u.nt());
        let mut d: f64 = 0.0;
        for j in 0..n {
            for k in 0..nt {
                for i in 0..nx {
                    d = d.max((vals[(j * nt + k) * nx + i] - u.get(j, i, k)).abs());
                }
            }
        }
        Ok(d)
    }

    /// Initial-boundary problem on `[T, t_end]`.
    pub fn solve_ibvp(&mut self, t_end: f64, warm: Option<&GridFunction>) -> Result<SolutionBundle> {
        let Some(t0) = self.sys().domain().start() else {
            return Err(Error::Invalid("initial-boundary solve needs a half-strip domain".into()));
        };
        if self.problem.initial.is_none() {
            return Err(Error::MissingInitialData);
        }
        if t_end <= t0 {
            return Err(Error::Invalid("end time must exceed the initial time".into()));
        }
        let cfg = self.cfg.clone();
        let mut u = GridFunction::zeros(self.sys().n(), linspace(0.0, 1.0, cfg.nx), linspace(t0, t_end, cfg.nt))
            .with_interpolation(cfg.interpolation);
        let st = self.build_stencils(&u)?;
        self.build_age_rows(&u)?;
        let width = match cfg.slab_width {
            Some(w) => w,
            None => 0.9 * self.ctx.tracer.min_transit_time((t0, t_end))?,
        };
        let dt = (t_end - t0) / (cfg.nt - 1) as f64;
        let per_slab = ((width / dt).floor() as usize).max(1);
        if let Some(w) = warm {
            u = w.resample(&u);
            u.set_interpolation(cfg.interpolation);
        } else {
            let phi = self.problem.initial.as_ref().expect("checked above");
            for j in 0..u.n() {
                for i in 0..u.nx() {
                    let x = u.xs()[i];
                    u.set(j, i, 0, phi[j].eval(x, t0));
                }
            }
        }
        let mut slabs = Vec::new();
        let mut total = 0;
        let mut t1 = None;
        let mut start = 0;
        while start < cfg.nt {
            let end = (start + per_slab).min(cfg.nt);
            if warm.is_none() && start > 0 {
                // constant extrapolation of the last known row
                for j in 0..u.n() {
                    let prev = u.row(j, start - 1).to_vec();
                    for k in start..end {
                        for (i, v) in prev.iter().enumerate() {
                            u.set(j, i, k, *v);
                        }
                    }
                }
            }
            let index = slabs.len();
            let (its, change, contraction, relax) = self.iterate_rows(&st, &mut u, start..end, index)?;
            total += its;
            let all_lateral = (0..st.n).all(|j| {
                (start..end).all(|k| (0..st.nx).all(|i| st.nodes[st.index(j, i, k)].exit.kind == ExitKind::Lateral))
            });
            if all_lateral && t1.is_none() {
                t1 = Some(u.ts()[start]);
            }
            slabs.push(SlabLog {
                index,
                t_start: u.ts()[start],
                t_end: u.ts()[end - 1],
                iterations: its,
                last_change: change,
                contraction,
                relaxation: relax,
                all_lateral,
            });
            start = end;
        }
        let residual = self.nodal_defect(&st, &u)?;
        let mut bundle = SolutionBundle {
            u,
            residual,
            verification_residual: None,
            iterations: total,
            slabs,
            t1,
            warnings: Vec::new(),
        };
        self.attach_certificate(&mut bundle)?;
        Ok(bundle)
    }

    /// Time-periodic problem on the full strip.
    pub fn solve_periodic(&mut self, warm: Option<&GridFunction>) -> Result<SolutionBundle> {
        if self.sys().domain() != TimeDomain::Periodic {
            return Err(Error::Invalid("periodic solve needs a periodic domain".into()));
        }
        let cfg = self.cfg.clone();
        let mut u = GridFunction::periodic(self.sys().n(), cfg.nx, cfg.nt).with_interpolation(cfg.interpolation);
        if let Some(w) = warm {
            u = w.resample(&u);
            u.set_interpolation(cfg.interpolation);
        }
        let st = self.build_stencils(&u)?;
        self.build_age_rows(&u)?;
        let (its, change, contraction, relax) = self.iterate_rows(&st, &mut u, 0..cfg.nt, 0)?;
        let residual = self.nodal_defect(&st, &u)?;
        let mut bundle = SolutionBundle {
            u,
            residual,
            verification_residual: None,
            iterations: its,
            slabs: vec![SlabLog {
                index: 0,
                t_start: 0.0,
                t_end: PERIOD,
                iterations: its,
                last_change: change,
                contraction,
                relaxation: relax,
                all_lateral: true,
            }],
            t1: None,
            warnings: Vec::new(),
        };
        self.attach_certificate(&mut bundle)?;
        Ok(bundle)
    }

    fn attach_certificate(&self, bundle: &mut SolutionBundle) -> Result<()> {
        if let Some([vx, vt]) = self.cfg.verify {
            bundle.verification_residual = Some(self.abstr_residual(&bundle.u, vx, vt)?);
        }
        Ok(())
    }

    /// Exit data `S u` built from a solution grid.
    pub fn state_data<'a>(&'a self, u: &'a GridFunction) -> StateData<'a> {
        StateData { solver: self, u }
    }

    /// Points strictly between grid nodes, `vx × vt` of them.
    pub fn verification_points(&self, u: &GridFunction, vx: usize, vt: usize) -> Vec<(f64, f64)> {
        let (t_lo, t_hi) = if u.is_periodic() {
            (0.0, PERIOD)
        } else {
            (u.ts()[0], *u.ts().last().expect("non-empty"))
        };
        let mut pts = Vec::with_capacity(vx * vt);
        for k in 0..vt {
            let t = t_lo + (t_hi - t_lo) * (k as f64 + 0.5) / vt as f64;
            for i in 0..vx {
                pts.push(((i as f64 + 0.5) / vx as f64, t));
            }
        }
        pts
    }

    /// `max |u − (BSu + Du + Ff)|` on shifted points.
    pub fn abstr_residual(&self, u: &GridFunction, vx: usize, vt: usize) -> Result<f64> {
        let data = self.state_data(u);
        let sys = self.sys();
        let pts = self.verification_points(u, vx, vt);
        let ctx = &self.ctx;
        let vals: Vec<f64> = (0..sys.n())
            .flat_map(|j| pts.iter().map(move |&p| (j, p)))
            .collect::<Vec<_>>()
            .into_par_iter()
            .map(|(j, (x, t))| -> Result<f64> {
                let rhs = ctx.b_at(j, x, t, &data)? + ctx.d_at(j, x, t, u)? + ctx.f_at(j, x, t, &Forcing(sys))?;
                Ok((u.eval(j, x, t) - rhs).abs())
            })
            .collect::<Result<_>>()?;
        Ok(vals.into_iter().fold(0.0, f64::max))
    }

    /// `max |u − (BSu + (DBS + D²)u + (I + D)Ff)|` on shifted points, with
    /// `Du` and `Ff` materialized on the solution grid.
    pub fn io_residual(&self, u: &GridFunction, vx: usize, vt: usize) -> Result<f64> {
        let data = self.state_data(u);
        let sys = self.sys();
        let ctx = &self.ctx;
        let du = ctx.apply_d(u, u)?;
        let ff = ctx.apply_f(&Forcing(sys), u)?;
        let pts = self.verification_points(u, vx, vt);
        let vals: Vec<f64> = (0..sys.n())
            .flat_map(|j| pts.iter().map(move |&p| (j, p)))
            .collect::<Vec<_>>()
            .into_par_iter()
            .map(|(j, (x, t))| -> Result<f64> {
                let rhs = ctx.b_at(j, x, t, &data)?
                    + ctx.db_at(j, x, t, &data)?
                    + ctx.d_at(j, x, t, &du)?
                    + ctx.f_at(j, x, t, &Forcing(sys))?
                    + ctx.d_at(j, x, t, &ff)?;
                Ok((u.eval(j, x, t) - rhs).abs())
            })
            .collect::<Result<_>>()?;
        Ok(vals.into_iter().fold(0.0, f64::max))
    }
}

/// `S u` for the solver's boundary operator; lateral integral-age values
/// are read from the boundary trace of `u`.
pub struct StateData<'a> {
    solver: &'a Solver,
    u: &'a GridFunction,
}

impl ExitData for StateData<'_> {
    fn value(&self, j: usize, exit: &ExitPoint) -> Result<f64> {
        self.solver.exit_value(self.u, j, exit, None)
    }
}

fn contraction_estimate(changes: &[f64]) -> f64 {
    let ratios: Vec<f64> = changes
        .windows(2)
        .filter(|w| w[0] > 0.0 && w[1] > 0.0)
        .map(|w| w[1] / w[0])
        .collect();
    if ratios.is_empty() {
        return 0.0;
    }
    let tail = &ratios[ratios.len().saturating_sub(5)..];
    (tail.iter().map(|r| r.ln()).sum::<f64>() / tail.len() as f64).exp()
}

/// `solve_ibvp` with a fresh solver.
pub fn solve_ibvp(problem: &Problem, t_end: f64, cfg: &SolveConfig) -> Result<SolutionBundle> {
    Solver::new(problem, cfg)?.solve_ibvp(t_end, None)
}

/// `solve_periodic_strip` with a fresh solver.
pub fn solve_periodic_strip(problem: &Problem, cfg: &SolveConfig) -> Result<SolutionBundle> {
    Solver::new(problem, cfg)?.solve_periodic(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::ZMap;

    fn transport(h: &str, phi: &str) -> Problem {
        let sys = HyperbolicSystem::parse(1, &["1"], &[&["0"]], &["0"], TimeDomain::HalfStrip { t0: 0.0 }).unwrap();
        Problem::new(
            sys,
            BoundaryOperator::ClassicalTrace {
                h: vec![CoefficientField::parse(h).unwrap()],
            },
            Some(vec![CoefficientField::parse(phi).unwrap()]),
        )
        .unwrap()
    }

    #[test]
    fn pure_transport_is_exact_on_nodes() {
        let p = transport("sin(t)", "sin(-x)");
        let cfg = SolveConfig {
            nx: 41,
            nt: 41,
            verify: None,
            ..Default::default()
        };
        let b = solve_ibvp(&p, 2.0, &cfg).unwrap();
        let mut err: f64 = 0.0;
        for (k, &t) in b.u.ts().iter().enumerate() {
            for (i, &x) in b.u.xs().iter().enumerate() {
                err = err.max((b.u.get(0, i, k) - (t - x).sin()).abs());
            }
        }
        assert!(err < 1e-9, "{err}");
        assert!(b.residual <= 1e-10);
        assert!(b.t1.is_some_and(|t| t >= 1.0 - 0.2));
    }

    #[test]
    fn zero_data_gives_zero() {
        let p = transport("0", "0");
        let b = solve_ibvp(&p, 1.0, &SolveConfig { nx: 11, nt: 11, ..Default::default() }).unwrap();
        assert_eq!(b.u.sup_norm(), 0.0);
    }

    #[test]
    fn steady_population() {
        let sys = HyperbolicSystem::parse(1, &["1"], &[&["0"]], &["0"], TimeDomain::HalfStrip { t0: 0.0 }).unwrap();
        let p = Problem::new(
            sys,
            BoundaryOperator::IntegralAge {
                h: ZMap::parse("z").unwrap(),
                gamma: CoefficientField::constant(1.0),
            },
            Some(vec![CoefficientField::constant(1.0)]),
        )
        .unwrap();
        let cfg = SolveConfig {
            nx: 21,
            nt: 41,
            tol: 1e-13,
            ..Default::default()
        };
        let b = solve_ibvp(&p, 2.0, &cfg).unwrap();
        assert!(b.residual <= 1e-10);
        let dev = b.u.component(0).iter().fold(0.0f64, |m, v| m.max((v - 1.0).abs()));
        assert!(dev <= 1e-10, "{dev}");
    }

    #[test]
    fn periodic_boundary_transport() {
        let sys = HyperbolicSystem::parse(1, &["1"], &[&["0"]], &["0"], TimeDomain::Periodic).unwrap();
        let p = Problem::new(
            sys,
            BoundaryOperator::ClassicalTrace {
                h: vec![CoefficientField::parse("cos(t)").unwrap()],
            },
            None,
        )
        .unwrap();
        let b = solve_periodic_strip(&p, &SolveConfig { nx: 21, nt: 64, ..Default::default() }).unwrap();
        for (k, &t) in b.u.ts().iter().enumerate() {
            for (i, &x) in b.u.xs().iter().enumerate() {
                assert!((b.u.get(0, i, k) - (t - x).cos()).abs() < 1e-9);
            }
        }
    }
}
