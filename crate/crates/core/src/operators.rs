//! The integral operators of the characteristic representation
//!
//! ```text
//! (B v)_j(x,t) = c_j(x_j, x, t) v_j(x_j, ω_j(x_j; x, t))
//! (D u)_j(x,t) = −∫_{x_j}^x d_j(ξ,x,t) Σ_{k≠j} b_jk(ξ,ω_j) u_k(ξ,ω_j) dξ
//! (F f)_j(x,t) =  ∫_{x_j}^x d_j(ξ,x,t) f_j(ξ,ω_j) dξ
//! ```
//!
//! evaluated pointwise along traced characteristics and assembled on grids
//! in parallel. Weights of order `l` give the operators acting on `∂_t^l u`.

use std::sync::Arc;

use rayon::prelude::*;

use crate::characteristics::{CharacteristicPath, ExitKind, ExitPoint, Tracer};
use crate::coefficient::CoefficientField;
use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::quadrature::{self, GaussRule};
use crate::system::HyperbolicSystem;

/// An `n`-component function of `(x, t)`.
pub trait Field: Sync {
    fn n(&self) -> usize;
    fn value(&self, j: usize, x: f64, t: f64) -> f64;
    /// Time interval on which the field is defined.
    fn window(&self) -> (f64, f64) {
        (f64::NEG_INFINITY, f64::INFINITY)
    }
}

impl Field for GridFunction {
    fn n(&self) -> usize {
        GridFunction::n(self)
    }
    fn value(&self, j: usize, x: f64, t: f64) -> f64 {
        self.eval(j, x, t)
    }
    fn window(&self) -> (f64, f64) {
        GridFunction::window(self)
    }
}

/// Closure-backed field.
pub struct FnField<F> {
    n: usize,
    f: F,
}

impl<F: Fn(usize, f64, f64) -> f64 + Sync> FnField<F> {
    pub fn new(n: usize, f: F) -> Self {
        FnField { n, f }
    }
}

impl<F: Fn(usize, f64, f64) -> f64 + Sync> Field for FnField<F> {
    fn n(&self) -> usize {
        self.n
    }
    fn value(&self, j: usize, x: f64, t: f64) -> f64 {
        (self.f)(j, x, t)
    }
}

/// The forcing `f` of a system viewed as a field.
pub struct Forcing<'a>(pub &'a HyperbolicSystem);

impl Field for Forcing<'_> {
    fn n(&self) -> usize {
        self.0.n()
    }
    fn value(&self, j: usize, x: f64, t: f64) -> f64 {
        self.0.f(j, x, t)
    }
}

/// Source of the equation satisfied by `∂_t u`:
/// `G_j = ∂_t f_j − Σ_k ∂_t b_jk u_k + (∂_t a_j / a_j)(Σ_k b_jk u_k − f_j)`.
pub struct FirstOrderSource<'a> {
    pub sys: &'a HyperbolicSystem,
    pub u: &'a dyn Field,
}

impl Field for FirstOrderSource<'_> {
    fn n(&self) -> usize {
        self.sys.n()
    }
    fn value(&self, j: usize, x: f64, t: f64) -> f64 {
        let s = self.sys;
        let mut dbu = 0.0;
        let mut bu = 0.0;
        for k in 0..s.n() {
            let uk = self.u.value(k, x, t);
            dbu += s.b_field(j, k).dt(x, t) * uk;
            bu += s.b(j, k, x, t) * uk;
        }
        s.f_field(j).dt(x, t) - dbu + s.a_dt(j, x, t) / s.a(j, x, t) * (bu - s.f(j, x, t))
    }
    fn window(&self) -> (f64, f64) {
        self.u.window()
    }
}

/// Data prescribed on the exit boundary of each characteristic (the `S`
/// operator's output).
pub trait ExitData: Sync {
    fn value(&self, j: usize, exit: &ExitPoint) -> Result<f64>;
}

/// Lateral traces `g_j(τ)` on the exit boundary plus initial data `φ_j(x)`.
pub struct TraceData<G> {
    pub lateral: G,
    pub initial: Option<Vec<CoefficientField>>,
    /// Ordinates outside this interval are rejected.
    pub window: (f64, f64),
}

impl<G: Fn(usize, f64) -> f64 + Sync> TraceData<G> {
    pub fn new(lateral: G) -> Self {
        TraceData {
            lateral,
            initial: None,
            window: (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    pub fn with_initial(mut self, phi: Vec<CoefficientField>) -> Self {
        self.initial = Some(phi);
        self
    }

    pub fn with_window(mut self, window: (f64, f64)) -> Self {
        self.window = window;
        self
    }
}

impl<G: Fn(usize, f64) -> f64 + Sync> ExitData for TraceData<G> {
    fn value(&self, j: usize, exit: &ExitPoint) -> Result<f64> {
        match exit.kind {
            ExitKind::Lateral => {
                if exit.tau < self.window.0 - 1e-12 || exit.tau > self.window.1 + 1e-12 {
                    return Err(Error::WindowUnderflow {
                        needed: exit.tau,
                        lo: self.window.0,
                        hi: self.window.1,
                    });
                }
                Ok((self.lateral)(j, exit.tau))
            }
            ExitKind::Initial => match &self.initial {
                Some(phi) => Ok(phi[j].eval(exit.x, exit.tau)),
                None => Err(Error::MissingInitialData),
            },
        }
    }
}

/// Quadrature node on a characteristic: `(ξ, ω, w·d_j)`.
#[derive(Debug, Clone, Copy)]
pub struct CharNode {
    pub xi: f64,
    pub omega: f64,
    pub wd: f64,
}

#[derive(Clone)]
pub struct OperatorContext {
    pub tracer: Arc<Tracer>,
    pub order: u32,
    pub rule: GaussRule,
    pub panels_per_unit: usize,
}

fn check_window(field: &dyn Field, t: f64) -> Result<()> {
    let (lo, hi) = field.window();
    if t < lo - 1e-9 || t > hi + 1e-9 {
        return Err(Error::WindowUnderflow { needed: t, lo, hi });
    }
    Ok(())
}

impl OperatorContext {
    pub fn new(tracer: Arc<Tracer>) -> Self {
        OperatorContext {
            tracer,
            order: 0,
            rule: GaussRule::legendre(4),
            panels_per_unit: 32,
        }
    }

    pub fn with_order(mut self, l: u32) -> Self {
        self.order = l;
        self
    }

    pub fn with_resolution(mut self, gauss_points: usize, panels_per_unit: usize) -> Self {
        if gauss_points >= 1 {
            self.rule = GaussRule::legendre(gauss_points);
        }
        self.panels_per_unit = panels_per_unit.max(1);
        self
    }

    pub fn system(&self) -> &HyperbolicSystem {
        self.tracer.system()
    }

    /// Exit point, `c_j^(l)` at the exit, and weighted quadrature nodes on
    /// the characteristic from the exit to the anchor.
    pub fn nodes(&self, j: usize, x: f64, t: f64) -> Result<(ExitPoint, f64, Vec<CharNode>)> {
        let (path, exit) = self.tracer.to_exit(j, x, t)?;
        let c_exit = path.c(self.order, exit.x);
        let nodes = self.char_nodes(&path, j, exit.x, x);
        Ok((exit, c_exit, nodes))
    }

    fn char_nodes(&self, path: &CharacteristicPath, j: usize, from: f64, to: f64) -> Vec<CharNode> {
        if from == to {
            return Vec::new();
        }
        let splits = self.system().breakpoints(j);
        quadrature::composite(&self.rule, from, to, &splits, self.panels_per_unit)
            .into_iter()
            .map(|(xi, w)| {
                let (_, d) = path.weights(self.order, xi);
                CharNode {
                    xi,
                    omega: path.omega(xi),
                    wd: w * d,
                }
            })
            .collect()
    }

    /// `(B v)_j(x, t)`.
    pub fn b_at(&self, j: usize, x: f64, t: f64, data: &dyn ExitData) -> Result<f64> {
        let (path, exit) = self.tracer.to_exit(j, x, t)?;
        Ok(path.c(self.order, exit.x) * data.value(j, &exit)?)
    }

    fn coupled(&self, j: usize) -> bool {
        let sys = self.system();
        (0..sys.n()).any(|k| k != j && !sys.b_field(j, k).is_zero())
    }

    /// `−∫ d_j Σ_{k≠j} b_jk v(k, ξ, ω_j) dξ` for a pointwise integrand `v`.
    fn coupling_integral(
        &self,
        j: usize,
        x: f64,
        t: f64,
        v: &dyn Fn(usize, f64, f64) -> Result<f64>,
    ) -> Result<f64> {
        if !self.coupled(j) {
            return Ok(0.0);
        }
        let sys = self.system();
        let (_, _, nodes) = self.nodes(j, x, t)?;
        let mut acc = 0.0;
        for q in &nodes {
            let mut s = 0.0;
            for k in 0..sys.n() {
                if k != j && !sys.b_field(j, k).is_zero() {
                    s += sys.b(j, k, q.xi, q.omega) * v(k, q.xi, q.omega)?;
                }
            }
            acc -= q.wd * s;
        }
        Ok(acc)
    }

    /// `(D u)_j(x, t)`.
    pub fn d_at(&self, j: usize, x: f64, t: f64, u: &dyn Field) -> Result<f64> {
        self.coupling_integral(j, x, t, &|k, xi, w| {
            check_window(u, w)?;
            Ok(u.value(k, xi, w))
        })
    }

    /// `(F g)_j(x, t)` for a source field `g`.
    pub fn f_at(&self, j: usize, x: f64, t: f64, g: &dyn Field) -> Result<f64> {
        let (_, _, nodes) = self.nodes(j, x, t)?;
        let mut acc = 0.0;
        for q in &nodes {
            acc += q.wd * g.value(j, q.xi, q.omega);
        }
        Ok(acc)
    }

    /// `(D (D u))_j(x, t)` as a nested double integral; the inner operator
    /// is evaluated along freshly traced characteristics.
    pub fn d2_nested_at(&self, j: usize, x: f64, t: f64, u: &dyn Field) -> Result<f64> {
        self.coupling_integral(j, x, t, &|k, xi, w| self.d_at(k, xi, w, u))
    }

    /// `(D B v)_j(x, t)` as a single integral with pointwise inner `B`.
    pub fn db_at(&self, j: usize, x: f64, t: f64, data: &dyn ExitData) -> Result<f64> {
        self.coupling_integral(j, x, t, &|k, xi, w| self.b_at(k, xi, w, data))
    }

    /// Evaluates `op(j, x, t)` at every node of `template`.
    pub fn assemble<Op>(&self, template: &GridFunction, op: Op) -> Result<GridFunction>
    where
        Op: Fn(usize, f64, f64) -> Result<f64> + Sync,
    {
        let (n, nx, nt) = (template.n(), template.nx(), template.nt());
        let xs = template.xs();
        let ts = template.ts();
        let vals: Vec<f64> = (0..n * nt * nx)
            .into_par_iter()
            .map(|idx| {
                let j = idx / (nt * nx);
                let k = (idx / nx) % nt;
                let i = idx % nx;
                op(j, xs[i], ts[k])
            })
            .collect::<Result<_>>()?;
        let mut out = template.clone();
        for j in 0..n {
            out.component_mut(j).copy_from_slice(&vals[j * nt * nx..(j + 1) * nt * nx]);
        }
        Ok(out)
    }

    pub fn apply_b(&self, data: &dyn ExitData, template: &GridFunction) -> Result<GridFunction> {
        self.assemble(template, |j, x, t| self.b_at(j, x, t, data))
    }

    pub fn apply_d(&self, u: &dyn Field, template: &GridFunction) -> Result<GridFunction> {
        self.assemble(template, |j, x, t| self.d_at(j, x, t, u))
    }

    pub fn apply_f(&self, g: &dyn Field, template: &GridFunction) -> Result<GridFunction> {
        self.assemble(template, |j, x, t| self.f_at(j, x, t, g))
    }

    /// `D²u` either as `D(Du)` through a materialized `Du` on `template`
    /// (default) or as the nested double integral.
    pub fn apply_d2(&self, u: &dyn Field, template: &GridFunction, nested: bool) -> Result<GridFunction> {
        if nested {
            self.assemble(template, |j, x, t| self.d2_nested_at(j, x, t, u))
        } else {
            let du = self.apply_d(u, template)?;
            self.apply_d(&du, template)
        }
    }

    pub fn apply_db(&self, data: &dyn ExitData, template: &GridFunction) -> Result<GridFunction> {
        self.assemble(template, |j, x, t| self.db_at(j, x, t, data))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::TimeDomain;

    fn ctx(sys: HyperbolicSystem) -> OperatorContext {
        OperatorContext::new(Arc::new(Tracer::new(Arc::new(sys))))
    }

    #[test]
    fn unit_speed_transport_of_boundary_data() {
        let c = ctx(HyperbolicSystem::parse(1, &["1"], &[&["0"]], &["0"], TimeDomain::FullStrip).unwrap());
        let h = TraceData::new(|_, t: f64| (3.0 * t).sin());
        let v = c.b_at(0, 0.4, 2.0, &h).unwrap();
        assert!((v - (3.0 * 1.6f64).sin()).abs() < 1e-12);
    }

    #[test]
    fn mortality_weight_in_b() {
        let c = ctx(HyperbolicSystem::parse(1, &["1"], &[&["0.7"]], &["0"], TimeDomain::FullStrip).unwrap());
        let h = TraceData::new(|_, t: f64| 1.0 + t);
        let v = c.b_at(0, 0.5, 3.0, &h).unwrap();
        assert!((v - (-0.35f64).exp() * 3.5).abs() < 1e-12);
    }

    #[test]
    fn leftward_component_of_b() {
        let sys =
            HyperbolicSystem::parse(1, &["1", "-1"], &[&["0", "0"], &["0", "0"]], &["0", "0"], TimeDomain::FullStrip)
                .unwrap();
        let c = ctx(sys);
        let h = TraceData::new(|j, t: f64| if j == 1 { t * t } else { 0.0 });
        let v = c.b_at(1, 0.25, 2.0, &h).unwrap();
        assert!((v - 1.25f64.powi(2)).abs() < 1e-12);
    }

    #[test]
    fn d_of_constant_field() {
        let sys =
            HyperbolicSystem::parse(1, &["1", "-1"], &[&["0", "2"], &["0", "0"]], &["0", "0"], TimeDomain::FullStrip)
                .unwrap();
        let c = ctx(sys);
        let u = FnField::new(2, |j, _, _| if j == 1 { 1.0 } else { 0.0 });
        for x in [0.0, 0.3, 1.0] {
            assert!((c.d_at(0, x, 1.0, &u).unwrap() + 2.0 * x).abs() < 1e-13);
        }
        assert_eq!(c.d_at(1, 0.3, 1.0, &u).unwrap(), 0.0);
    }

    #[test]
    fn f_closed_forms() {
        let c = ctx(HyperbolicSystem::parse(1, &["1"], &[&["0"]], &["sin(t)"], TimeDomain::FullStrip).unwrap());
        let sys = c.system().clone();
        let (x, t) = (0.6, 1.3);
        let v = c.f_at(0, x, t, &Forcing(&sys)).unwrap();
        assert!((v - ((t - x).cos() - t.cos())).abs() < 1e-12);
        let one = FnField::new(1, |_, _, _| 1.0);
        assert!((c.f_at(0, x, t, &one).unwrap() - x).abs() < 1e-14);
    }

    #[test]
    fn missing_initial_data_is_reported() {
        let c = ctx(HyperbolicSystem::parse(1, &["1"], &[&["0"]], &["0"], TimeDomain::HalfStrip { t0: 0.0 }).unwrap());
        let h = TraceData::new(|_, _| 0.0);
        assert!(matches!(c.b_at(0, 0.8, 0.2, &h), Err(Error::MissingInitialData)));
        let h = h.with_window((0.5, 2.0));
        assert!(matches!(c.b_at(0, 0.1, 0.3, &h), Err(Error::WindowUnderflow { .. })));
    }
}
