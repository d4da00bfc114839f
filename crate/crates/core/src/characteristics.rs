//! Characteristic curves `dω/dξ = 1/a_j(ξ, ω)`, `ω(x; x, t) = t`, their exit
//! points and the exponential weights carried along them.
//!
//! Each curve is integrated together with
//! `I0(ξ) = ∫_x^ξ b_jj/a_j` and `I1(ξ) = −∫_x^ξ ∂_t a_j/a_j²`,
//! so that `c_j^(l) = exp(I0 + l·I1)` and `∂_t ω_j = exp(I1)`.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ode::{self, OdeOptions, OdeSolution};
use crate::system::{HyperbolicSystem, TimeDomain, PERIOD};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExitKind {
    Lateral,
    Initial,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExitPoint {
    pub x: f64,
    pub tau: f64,
    pub kind: ExitKind,
}

#[derive(Debug, Clone, Copy)]
pub struct TraceOptions {
    pub tol: f64,
    pub h_max: f64,
    /// Memoize exit paths when the curve family is shift-invariant in `t`.
    pub cache: bool,
}

impl Default for TraceOptions {
    fn default() -> Self {
        TraceOptions {
            tol: 1e-10,
            h_max: 1.0 / 16.0,
            cache: true,
        }
    }
}

/// Integrated curve pieces starting at the anchor abscissa.
#[derive(Debug)]
struct Pieces {
    x: f64,
    t: f64,
    down: Option<OdeSolution>,
    up: Option<OdeSolution>,
}

impl Pieces {
    fn state(&self, xi: f64) -> [f64; 3] {
        let seg = if xi < self.x { &self.down } else { &self.up };
        match seg {
            Some(s) => {
                let mut out = [0.0; 3];
                s.eval_into(xi, &mut out);
                out
            }
            None => [self.t, 0.0, 0.0],
        }
    }
}

/// A traced characteristic `ξ ↦ ω_j(ξ; x, t)`.
#[derive(Debug, Clone)]
pub struct CharacteristicPath {
    pub j: usize,
    pub anchor: (f64, f64),
    /// Covered `ξ` interval, ordered.
    pub xi_range: (f64, f64),
    /// The curve left the domain before covering the requested range.
    pub clipped: bool,
    pub tol: f64,
    pieces: Arc<Pieces>,
    /// Added to the stored ordinate (time-shift reuse).
    shift: f64,
    sys: Arc<HyperbolicSystem>,
}

impl CharacteristicPath {
    fn raw(&self, xi: f64) -> [f64; 3] {
        if xi == self.anchor.0 {
            return [self.anchor.1, 0.0, 0.0];
        }
        let mut s = self.pieces.state(xi);
        s[0] += self.shift;
        s
    }

    pub fn omega(&self, xi: f64) -> f64 {
        self.raw(xi)[0]
    }

    /// `c_j^(l)(ξ, x, t)`.
    pub fn c(&self, l: u32, xi: f64) -> f64 {
        let s = self.raw(xi);
        (s[1] + l as f64 * s[2]).exp()
    }

    /// `(c_j^(l), d_j^(l))` at `ξ`.
    pub fn weights(&self, l: u32, xi: f64) -> (f64, f64) {
        let s = self.raw(xi);
        let c = (s[1] + l as f64 * s[2]).exp();
        (c, c / self.sys.a(self.j, xi, s[0]))
    }

    /// `(∂_x ω_j, ∂_t ω_j)` at `ξ`.
    pub fn omega_derivatives(&self, xi: f64) -> (f64, f64) {
        let dt = self.raw(xi)[2].exp();
        let (x, t) = self.anchor;
        (-dt / self.sys.a(self.j, x, t), dt)
    }

    /// Monotone `(ξ, ω)` samples at the integrator mesh.
    pub fn samples(&self) -> Vec<(f64, f64)> {
        let mut xs: Vec<f64> = Vec::new();
        for s in [&self.pieces.down, &self.pieces.up].into_iter().flatten() {
            xs.extend(s.mesh());
        }
        xs.push(self.anchor.0);
        xs.retain(|&x| x >= self.xi_range.0 && x <= self.xi_range.1);
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        xs.into_iter().map(|x| (x, self.omega(x))).collect()
    }
}

type CacheKey = (usize, u64, u64);

/// Traces characteristics of one system, memoizing exit paths.
pub struct Tracer {
    sys: Arc<HyperbolicSystem>,
    opts: TraceOptions,
    cache: RwLock<HashMap<CacheKey, (Arc<Pieces>, f64)>>,
}

const CACHE_CAP: usize = 1 << 18;

impl Tracer {
    pub fn new(sys: Arc<HyperbolicSystem>) -> Self {
        Self::with_options(sys, TraceOptions::default())
    }

    pub fn with_options(sys: Arc<HyperbolicSystem>, opts: TraceOptions) -> Self {
        Tracer {
            sys,
            opts,
            cache: RwLock::new(HashMap::new()),
        }
    }

    pub fn system(&self) -> &Arc<HyperbolicSystem> {
        &self.sys
    }

    pub fn options(&self) -> &TraceOptions {
        &self.opts
    }

    /// Lateral boundary abscissa reached by tracing component `j` backwards in time.
    pub fn lateral_exit(&self, j: usize) -> f64 {
        if self.sys.is_rightward(j) {
            0.0
        } else {
            1.0
        }
    }

    fn ode_opts(&self) -> OdeOptions {
        OdeOptions {
            rtol: self.opts.tol * 0.1,
            atol: self.opts.tol * 0.1,
            h_max: self.opts.h_max,
            ..Default::default()
        }
    }

    fn integrate(&self, j: usize, x: f64, t: f64, to: f64, floor: Option<f64>) -> Result<OdeSolution> {
        let sys = &self.sys;
        let rhs = |xi: f64, y: &[f64], dy: &mut [f64]| {
            let w = y[0];
            let a = sys.a(j, xi, w);
            dy[0] = 1.0 / a;
            dy[1] = sys.b(j, j, xi, w) / a;
            dy[2] = -sys.a_dt(j, xi, w) / (a * a);
        };
        let splits = sys.breakpoints(j);
        let res = match floor {
            Some(t0) => ode::integrate_split(
                rhs,
                x,
                &[t, 0.0, 0.0],
                to,
                &splits,
                &self.ode_opts(),
                Some(move |_: f64, y: &[f64]| y[0] - t0),
            ),
            None => ode::integrate_split(
                rhs,
                x,
                &[t, 0.0, 0.0],
                to,
                &splits,
                &self.ode_opts(),
                None::<fn(f64, &[f64]) -> f64>,
            ),
        };
        res.map_err(|e| Error::StepUnderflow { component: j, xi: e.x })
    }

    fn check_anchor(&self, j: usize, x: f64, t: f64) -> Result<()> {
        if j >= self.sys.n() {
            return Err(Error::Invalid(format!("component {j} out of range")));
        }
        if !(0.0..=1.0).contains(&x) || !t.is_finite() {
            return Err(Error::Invalid(format!("anchor ({x}, {t}) outside the strip")));
        }
        if let Some(t0) = self.sys.domain().start() {
            if t < t0 {
                return Err(Error::Invalid(format!("anchor time {t} precedes the initial line {t0}")));
            }
        }
        Ok(())
    }

    /// Characteristic through `(x, t)` over `ξ ∈ xi_range`, clipped at the
    /// initial line of a half strip.
    pub fn trace(&self, j: usize, x: f64, t: f64, xi_range: (f64, f64)) -> Result<CharacteristicPath> {
        self.check_anchor(j, x, t)?;
        let (lo, hi) = (xi_range.0.min(xi_range.1).max(0.0), xi_range.0.max(xi_range.1).min(1.0));
        let floor = self.sys.domain().start();
        let rightward = self.sys.is_rightward(j);
        // ω decreases towards the exit side
        let down_floor = if rightward { floor } else { None };
        let up_floor = if rightward { None } else { floor };
        let down = if lo < x { Some(self.integrate(j, x, t, lo, down_floor)?) } else { None };
        let up = if hi > x { Some(self.integrate(j, x, t, hi, up_floor)?) } else { None };
        let cov_lo = down.as_ref().map_or(x.min(lo.max(x)), |s| s.x_end);
        let cov_hi = up.as_ref().map_or(x.max(hi.min(x)), |s| s.x_end);
        let clipped = cov_lo > lo || cov_hi < hi;
        Ok(CharacteristicPath {
            j,
            anchor: (x, t),
            xi_range: (cov_lo, cov_hi),
            clipped,
            tol: self.opts.tol,
            pieces: Arc::new(Pieces { x, t, down, up }),
            shift: 0.0,
            sys: self.sys.clone(),
        })
    }

    fn cache_key(&self, j: usize, x: f64, t: f64) -> Option<(CacheKey, f64)> {
        if !self.opts.cache {
            return None;
        }
        if self.sys.transport_time_independent(j) {
            return Some(((j, x.to_bits(), 0), t));
        }
        if self.sys.domain() == TimeDomain::Periodic {
            let red = t.rem_euclid(PERIOD);
            return Some(((j, x.to_bits(), red.to_bits()), t - red));
        }
        None
    }

    /// Path from the anchor to its lateral boundary, without an initial-line
    /// cut; reused across time shifts where possible.
    fn lateral_pieces(&self, j: usize, x: f64, t: f64) -> Result<(Arc<Pieces>, f64)> {
        let target = self.lateral_exit(j);
        let key = self.cache_key(j, x, t);
        if let Some((k, shift)) = key {
            if let Some((p, base_shift)) = self.cache.read().expect("cache lock").get(&k) {
                return Ok((p.clone(), shift - base_shift));
            }
            let base_t = t - shift;
            let sol = self.integrate(j, x, base_t, target, None)?;
            let pieces = Arc::new(Pieces::from_exit(x, base_t, target, sol));
            let mut cache = self.cache.write().expect("cache lock");
            if cache.len() < CACHE_CAP {
                cache.insert(k, (pieces.clone(), 0.0));
            }
            return Ok((pieces, shift));
        }
        let sol = self.integrate(j, x, t, target, None)?;
        Ok((Arc::new(Pieces::from_exit(x, t, target, sol)), 0.0))
    }

    /// Path from the anchor back to its exit point.
    pub fn to_exit(&self, j: usize, x: f64, t: f64) -> Result<(CharacteristicPath, ExitPoint)> {
        self.check_anchor(j, x, t)?;
        let target = self.lateral_exit(j);
        let floor = self.sys.domain().start();
        let shift_invariant = self.cache_key(j, x, t).is_some();
        let (pieces, shift) = if floor.is_some() && !shift_invariant {
            let sol = self.integrate(j, x, t, target, floor)?;
            (Arc::new(Pieces::from_exit(x, t, target, sol)), 0.0)
        } else {
            self.lateral_pieces(j, x, t)?
        };
        let mut path = CharacteristicPath {
            j,
            anchor: (x, t),
            xi_range: (x.min(target), x.max(target)),
            clipped: false,
            tol: self.opts.tol,
            pieces,
            shift,
            sys: self.sys.clone(),
        };
        let lateral = ExitPoint {
            x: target,
            tau: path.omega(target),
            kind: ExitKind::Lateral,
        };
        let exit = match floor {
            None => lateral,
            _ if x == target => lateral,
            Some(t0) if t <= t0 => ExitPoint {
                x,
                tau: t,
                kind: ExitKind::Initial,
            },
            Some(t0) => {
                let seg_end = path.pieces_end();
                if seg_end.is_some_and(|e| e != target) || path.omega(target) < t0 {
                    let xe = match seg_end {
                        Some(e) if e != target => e,
                        _ => bisect_crossing(&path, x, target, t0),
                    };
                    ExitPoint {
                        x: xe,
                        tau: t0,
                        kind: ExitKind::Initial,
                    }
                } else {
                    lateral
                }
            }
        };
        path.xi_range = (x.min(exit.x), x.max(exit.x));
        Ok((path, exit))
    }

    pub fn exit_point(&self, j: usize, x: f64, t: f64) -> Result<ExitPoint> {
        Ok(self.to_exit(j, x, t)?.1)
    }

    /// `(c_j^(l), d_j^(l))(ξ, x, t)` for `ξ` between the anchor and its exit.
    pub fn weight(&self, j: usize, l: u32, xi: f64, x: f64, t: f64) -> Result<(f64, f64)> {
        let (path, exit) = self.to_exit(j, x, t)?;
        if !within(xi, x, exit.x) {
            return Err(Error::Invalid(format!("ξ={xi} is not between the anchor {x} and the exit {}", exit.x)));
        }
        Ok(path.weights(l, xi))
    }

    pub fn omega_derivatives(&self, j: usize, xi: f64, x: f64, t: f64) -> Result<(f64, f64)> {
        let (path, exit) = self.to_exit(j, x, t)?;
        if !within(xi, x, exit.x) {
            return Err(Error::Invalid(format!("ξ={xi} is not between the anchor {x} and the exit {}", exit.x)));
        }
        Ok(path.omega_derivatives(xi))
    }

    /// Minimal boundary-to-boundary transit time over a coarse sample of
    /// starting times in `window`.
    pub fn min_transit_time(&self, window: (f64, f64)) -> Result<f64> {
        let mut best = f64::INFINITY;
        let free = Tracer::with_options(
            Arc::new(self.sys.with_domain(TimeDomain::FullStrip)?),
            TraceOptions {
                cache: false,
                ..self.opts
            },
        );
        for j in 0..self.sys.n() {
            let far = 1.0 - self.lateral_exit(j);
            for k in 0..9 {
                let t = window.0 + (window.1 - window.0) * k as f64 / 8.0;
                let (_, e) = free.to_exit(j, far, t)?;
                best = best.min(t - e.tau);
            }
        }
        Ok(best)
    }
}

fn within(xi: f64, a: f64, b: f64) -> bool {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    xi >= lo - 1e-14 && xi <= hi + 1e-14
}

impl Pieces {
    fn from_exit(x: f64, t: f64, target: f64, sol: OdeSolution) -> Self {
        if target < x {
            Pieces {
                x,
                t,
                down: Some(sol),
                up: None,
            }
        } else if target > x {
            Pieces {
                x,
                t,
                down: None,
                up: Some(sol),
            }
        } else {
            Pieces {
                x,
                t,
                down: None,
                up: None,
            }
        }
    }
}

impl CharacteristicPath {
    /// Where an event cut the stored integration, if it did.
    fn pieces_end(&self) -> Option<f64> {
        [&self.pieces.down, &self.pieces.up]
            .into_iter()
            .flatten()
            .find_map(|s| s.event.map(|_| s.x_end))
    }
}

/// Abscissa where the path crosses `t0`, with `ω(x) ≥ t0 > ω(target)`.
fn bisect_crossing(path: &CharacteristicPath, x: f64, target: f64, t0: f64) -> f64 {
    let (mut inside, mut outside) = (x, target);
    for _ in 0..200 {
        let mid = 0.5 * (inside + outside);
        if mid == inside || mid == outside {
            break;
        }
        if path.omega(mid) >= t0 {
            inside = mid;
        } else {
            outside = mid;
        }
    }
    inside
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tracer(a: &str, m: usize, domain: TimeDomain) -> Tracer {
        let sys = HyperbolicSystem::parse(m, &[a], &[&["0"]], &["0"], domain).unwrap();
        Tracer::new(Arc::new(sys))
    }

    #[test]
    fn constant_speeds() {
        let tr = tracer("2", 1, TimeDomain::FullStrip);
        let p = tr.trace(0, 0.0, 0.0, (0.0, 1.0)).unwrap();
        assert!((p.omega(1.0) - 0.5).abs() < 1e-13);
        let tr = tracer("-1", 0, TimeDomain::FullStrip);
        let p = tr.trace(0, 1.0, 1.0, (0.0, 1.0)).unwrap();
        assert!((p.omega(0.0) - 2.0).abs() < 1e-13);
    }

    #[test]
    fn half_strip_exits() {
        let tr = tracer("1", 1, TimeDomain::HalfStrip { t0: 0.0 });
        let e = tr.exit_point(0, 0.7, 0.3).unwrap();
        assert_eq!(e.kind, ExitKind::Initial);
        assert!((e.x - 0.4).abs() < 1e-10);
        let e = tr.exit_point(0, 0.3, 0.7).unwrap();
        assert_eq!(e.kind, ExitKind::Lateral);
        assert_eq!(e.x, 0.0);
        assert!((e.tau - 0.4).abs() < 1e-12);
    }

    #[test]
    fn leftward_lateral_exit() {
        let tr = tracer("-1", 0, TimeDomain::FullStrip);
        let e = tr.exit_point(0, 0.3, 5.0).unwrap();
        assert_eq!(e.x, 1.0);
        assert!((e.tau - 4.3).abs() < 1e-12);
    }

    #[test]
    fn population_weight() {
        let sys = HyperbolicSystem::parse(1, &["1"], &[&["1"]], &["0"], TimeDomain::FullStrip).unwrap();
        let tr = Tracer::new(Arc::new(sys));
        let (c, d) = tr.weight(0, 0, 0.2, 0.9, 3.0).unwrap();
        assert!((c - (0.2f64 - 0.9).exp()).abs() < 1e-12);
        assert_eq!(c, d);
    }

    #[test]
    fn time_independent_derivatives() {
        let tr = tracer("2", 1, TimeDomain::FullStrip);
        let (dx, dt) = tr.omega_derivatives(0, 0.1, 0.8, 1.0).unwrap();
        assert_eq!(dt, 1.0);
        assert_eq!(dx, -0.5);
        for l in 0..3 {
            assert_eq!(tr.weight(0, l, 0.3, 0.8, 1.0).unwrap().0, 1.0);
        }
    }

    #[test]
    fn shifted_cache_hits_agree_with_fresh_traces() {
        let tr = tracer("1 + 0.5*x", 1, TimeDomain::FullStrip);
        let a = tr.to_exit(0, 0.6, 0.0).unwrap().1;
        let b = tr.to_exit(0, 0.6, 7.25).unwrap().1;
        assert!((b.tau - a.tau - 7.25).abs() < 1e-13);
        // closed form: ω(0) = t − 2 ln(1 + x/2)
        assert!((a.tau + 2.0 * 1.3f64.ln()).abs() < 1e-10);
    }

    #[test]
    fn breakpoint_speed() {
        let tr = tracer("piecewise(x < 0.5, 1, 2)", 1, TimeDomain::FullStrip);
        let e = tr.exit_point(0, 1.0, 0.0).unwrap();
        assert!((e.tau + 0.75).abs() < 1e-12);
    }
}
