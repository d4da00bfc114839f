//! Age-structured population boundary `u(0,t) = h(∫_0^1 γ(x) u(x,t) dx)`.
//!
//! The birth integral at time `t` is evaluated on the pointwise
//! representation `u(x,t) = c(x_e; x, t)·S + (F f)(x, t)`, with the
//! boundary history `u(0,·)` interpolated linearly in time and panels split
//! where the integrand has kinks or jumps.

use std::sync::Arc;

use serde::Serialize;

use crate::boundary::ZMap;
use crate::characteristics::{ExitKind, Tracer};
use crate::coefficient::CoefficientField;
use crate::error::{Error, Result};
use crate::operators::{Forcing, OperatorContext};
use crate::quadrature::{self, GaussRule};
use crate::system::HyperbolicSystem;

#[derive(Debug, Clone, Copy)]
enum Source {
    /// Boundary history at this ordinate.
    History(f64),
    /// Fixed contribution (initial data).
    Fixed(f64),
}

#[derive(Debug, Clone, Copy)]
struct AgeNode {
    weight: f64,
    source: Source,
}

/// Quadrature of the birth integral at one time.
#[derive(Debug, Clone)]
pub struct BirthRow {
    pub t: f64,
    nodes: Vec<AgeNode>,
    fixed: f64,
}

impl BirthRow {
    /// `∫ γ u(·, t)` given the boundary history.
    pub fn integral<H: Fn(f64) -> f64>(&self, history: H) -> f64 {
        self.fixed
            + self
                .nodes
                .iter()
                .map(|n| match n.source {
                    Source::History(tau) => n.weight * history(tau),
                    Source::Fixed(v) => n.weight * v,
                })
                .sum::<f64>()
    }

    /// Largest history ordinate referenced.
    pub fn latest_history(&self) -> Option<f64> {
        self.nodes
            .iter()
            .filter_map(|n| match n.source {
                Source::History(t) => Some(t),
                Source::Fixed(_) => None,
            })
            .reduce(f64::max)
    }
}

/// Boundary operator data plus the quadrature machinery.
pub struct AgeModel {
    ctx: OperatorContext,
    gamma: CoefficientField,
    h: ZMap,
    phi: Option<CoefficientField>,
    /// `A(ξ) = ∫_0^ξ 1/a` when the speed is time-independent.
    speed_path: Option<crate::characteristics::CharacteristicPath>,
    rule: GaussRule,
    panels_per_unit: usize,
}

impl AgeModel {
    pub fn new(
        ctx: OperatorContext,
        gamma: CoefficientField,
        h: ZMap,
        phi: Option<CoefficientField>,
        panels_per_unit: usize,
    ) -> Result<Self> {
        let sys = ctx.system();
        if sys.n() != 1 || sys.m() != 1 {
            return Err(Error::Invalid("integral-age boundary requires n = m = 1".into()));
        }
        if sys.domain().start().is_some() && phi.is_none() {
            return Err(Error::MissingInitialData);
        }
        let speed_path = if sys.transport_time_independent(0) {
            let base = sys.domain().start().unwrap_or(0.0);
            Some(ctx.tracer.trace(0, 0.0, base, (0.0, 1.0))?)
        } else {
            None
        };
        Ok(AgeModel {
            rule: GaussRule::legendre(4),
            ctx,
            gamma,
            h,
            phi,
            speed_path,
            panels_per_unit: panels_per_unit.max(1),
        })
    }

    pub fn system(&self) -> &HyperbolicSystem {
        self.ctx.system()
    }

    pub fn tracer(&self) -> &Arc<Tracer> {
        &self.ctx.tracer
    }

    /// `u(0,t) = h(t, z)` with `z` the birth integral.
    pub fn birth(&self, t: f64, z: f64) -> f64 {
        self.h.eval(t, &[z])
    }

    /// Abscissa reached at time `t` by the forward characteristic from `(p, s)`,
    /// or `None` if it is still inside at `x = 1`.
    fn forward_hit(&self, p: f64, s: f64, t: f64) -> Result<Option<f64>> {
        if t <= s {
            return Ok(Some(p));
        }
        if let Some(path) = &self.speed_path {
            // ω(ξ; p, s) = s + A(ξ) − A(p)
            let a = |xi: f64| path.omega(xi) - path.anchor.1;
            let target = t - s + a(p);
            if a(1.0) < target {
                return Ok(None);
            }
            return Ok(Some(bisect(|xi| a(xi) - target, p, 1.0)));
        }
        let path = self.ctx.tracer.trace(0, p, s, (p, 1.0))?;
        if path.omega(1.0) < t {
            return Ok(None);
        }
        Ok(Some(bisect(|xi| path.omega(xi) - t, p, 1.0)))
    }

    /// Panel splits of the birth integrand at time `t`; `history` are the
    /// time nodes of the interpolated boundary trace.
    fn splits(&self, t: f64, history: &[f64], xs: &[f64]) -> Result<Vec<f64>> {
        let sys = self.system();
        let mut out: Vec<f64> = sys.all_breakpoints();
        out.extend_from_slice(self.gamma.breakpoints());
        if let Some(t0) = sys.domain().start() {
            if let Some(x) = self.forward_hit(0.0, t0, t)? {
                out.push(x);
            }
            if let Some(phi) = &self.phi {
                for &p in phi.breakpoints() {
                    if let Some(x) = self.forward_hit(p, t0, t)? {
                        out.push(x);
                    }
                }
            }
        }
        if self.speed_path.is_some() {
            for &s in history.iter().filter(|&&s| s < t) {
                if let Some(x) = self.forward_hit(0.0, s, t)? {
                    out.push(x);
                }
            }
        } else {
            out.extend_from_slice(xs);
        }
        out.retain(|x| *x > 0.0 && *x < 1.0);
        out.sort_by(f64::total_cmp);
        out.dedup_by(|a, b| (*a - *b).abs() < 1e-13);
        Ok(out)
    }

    /// Quadrature for the birth integral at time `t`.
    pub fn row(&self, t: f64, history: &[f64], xs: &[f64]) -> Result<BirthRow> {
        let splits = self.splits(t, history, xs)?;
        let sys = self.system();
        let forcing = !sys.forcing_is_zero();
        let mut nodes = Vec::new();
        let mut fixed = 0.0;
        for (x, w) in quadrature::composite(&self.rule, 0.0, 1.0, &splits, self.panels_per_unit) {
            let g = self.gamma.eval(x, t);
            if g == 0.0 {
                continue;
            }
            let (path, exit) = self.ctx.tracer.to_exit(0, x, t)?;
            let c = path.c(self.ctx.order, exit.x);
            let source = match exit.kind {
                ExitKind::Lateral => Source::History(exit.tau),
                ExitKind::Initial => Source::Fixed(
                    self.phi
                        .as_ref()
                        .ok_or(Error::MissingInitialData)?
                        .eval(exit.x, exit.tau),
                ),
            };
            nodes.push(AgeNode {
                weight: w * g * c,
                source,
            });
            if forcing {
                fixed += w * g * self.ctx.f_at(0, x, t, &Forcing(sys))?;
            }
        }
        Ok(BirthRow { t, nodes, fixed })
    }
}

fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> f64 {
    // f(lo) ≤ 0 ≤ f(hi)
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Linear interpolation of samples `(ts, vs)`; `ts` sorted ascending.
pub fn interp_linear(ts: &[f64], vs: &[f64], t: f64) -> f64 {
    let n = ts.len();
    if n == 1 || t <= ts[0] {
        return vs[0];
    }
    if t >= ts[n - 1] {
        return vs[n - 1];
    }
    let i = ts.partition_point(|&s| s <= t).saturating_sub(1).min(n - 2);
    let th = (t - ts[i]) / (ts[i + 1] - ts[i]);
    (1.0 - th) * vs[i] + th * vs[i + 1]
}

/// Boundary trace `u(0, t_k)` on a time grid.
#[derive(Debug, Clone, Serialize)]
pub struct BoundaryTrace {
    pub ts: Vec<f64>,
    pub values: Vec<f64>,
    /// Largest fixed-point correction at the last inner iteration of any step.
    pub max_inner_change: f64,
}

impl BoundaryTrace {
    pub fn eval(&self, t: f64) -> f64 {
        interp_linear(&self.ts, &self.values, t)
    }
}

/// Marches the renewal equation `u(0,t_k) = h(∫ γ u(·,t_k))` on `ts`,
/// resolving the implicit dependence through the last cell by scalar
/// fixed-point iteration.
pub fn renewal_boundary(model: &AgeModel, ts: &[f64], xs: &[f64], tol: f64, max_iter: usize) -> Result<BoundaryTrace> {
    if model.system().domain().start().is_none() {
        return Err(Error::Invalid("renewal marching needs a half strip".into()));
    }
    let mut values: Vec<f64> = Vec::with_capacity(ts.len());
    let mut max_change: f64 = 0.0;
    for (k, &t) in ts.iter().enumerate() {
        let row = model.row(t, &ts[..k], xs)?;
        let known_ts = &ts[..=k];
        let mut guess = values.last().copied().unwrap_or(0.0);
        let mut converged = false;
        let mut last = f64::INFINITY;
        for _ in 0..max_iter {
            let mut vs = values.clone();
            vs.push(guess);
            let z = row.integral(|tau| interp_linear(known_ts, &vs, tau));
            let next = model.birth(t, z);
            last = (next - guess).abs();
            guess = next;
            if last <= tol {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::NonConvergence {
                slab: k,
                iterations: max_iter,
                ratio: last,
            });
        }
        max_change = max_change.max(last);
        values.push(guess);
    }
    Ok(BoundaryTrace {
        ts: ts.to_vec(),
        values,
        max_inner_change: max_change,
    })
}

/// `(B R B u)(x,t) = c(0; x, t) · h(∫_0^1 γ(y) c(0; y, τ) u_0(ω(0; y, τ)) dy)`
/// with `τ = ω(0; x, t)`, for a full boundary history `u_0`.
pub fn apply_brb<H: Fn(f64) -> f64>(model: &AgeModel, x: f64, t: f64, history: H, window: (f64, f64)) -> Result<f64> {
    let (path, exit) = model.tracer().to_exit(0, x, t)?;
    if exit.kind != ExitKind::Lateral {
        return Err(Error::Invalid("BRB needs a lateral exit".into()));
    }
    let tau = exit.tau;
    let mut z = 0.0;
    let splits = model.gamma.breakpoints().to_vec();
    for (y, w) in quadrature::composite(&model.rule, 0.0, 1.0, &splits, model.panels_per_unit) {
        let (p, e) = model.tracer().to_exit(0, y, tau)?;
        if e.kind != ExitKind::Lateral {
            return Err(Error::Invalid("BRB needs a lateral exit".into()));
        }
        if e.tau < window.0 - 1e-12 || e.tau > window.1 + 1e-12 {
            return Err(Error::WindowUnderflow {
                needed: e.tau,
                lo: window.0,
                hi: window.1,
            });
        }
        z += w * model.gamma.eval(y, tau) * p.c(0, e.x) * history(e.tau);
    }
    Ok(path.c(0, exit.x) * model.birth(tau, z))
}
