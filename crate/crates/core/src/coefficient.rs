use std::fmt;
use std::sync::Arc;

use crate::error::Result;
use crate::expr::{Env, Expr, Var};

type ScalarFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Repr {
    Expr { value: Expr, dt: Expr },
    Func(ScalarFn),
}

/// A scalar field of `(x, t)` with optional breakpoints in `x`.
#[derive(Clone)]
pub struct CoefficientField {
    repr: Repr,
    breakpoints: Vec<f64>,
    time_independent: bool,
    zero: bool,
}

/// Step used for the central-difference time derivative of closure-backed fields.
pub const DT_STEP: f64 = 1e-5;

impl CoefficientField {
    pub fn parse(src: &str) -> Result<Self> {
        Ok(Self::from_expr(Expr::parse(src)?))
    }

    pub fn from_expr(value: Expr) -> Self {
        let value = value.simplify();
        let dt = value.diff(Var::T);
        let mut breakpoints: Vec<f64> = value
            .x_breakpoints()
            .into_iter()
            .filter(|b| *b > 0.0 && *b < 1.0)
            .collect();
        breakpoints.sort_by(f64::total_cmp);
        breakpoints.dedup();
        let time_independent = !value.depends_on(Var::T);
        let zero = value.is_zero();
        CoefficientField {
            repr: Repr::Expr { value, dt },
            breakpoints,
            time_independent,
            zero,
        }
    }

    pub fn constant(c: f64) -> Self {
        Self::from_expr(Expr::Const(c))
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    /// Wraps a closure. `time_independent` is taken on trust and can be
    /// verified with [`CoefficientField::sampled_time_independent`].
    pub fn from_fn<F>(f: F, time_independent: bool) -> Self
    where
        F: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        CoefficientField {
            repr: Repr::Func(Arc::new(f)),
            breakpoints: Vec::new(),
            time_independent,
            zero: false,
        }
    }

    pub fn with_breakpoints(mut self, mut bps: Vec<f64>) -> Self {
        bps.retain(|b| *b > 0.0 && *b < 1.0);
        self.breakpoints.extend(bps);
        self.breakpoints.sort_by(f64::total_cmp);
        self.breakpoints.dedup();
        self
    }

    #[inline]
    pub fn eval(&self, x: f64, t: f64) -> f64 {
        match &self.repr {
            Repr::Expr { value, .. } => value.eval(&Env::xt(x, t)),
            Repr::Func(f) => f(x, t),
        }
    }

    /// Time derivative: symbolic for expressions, central differences otherwise.
    #[inline]
    pub fn dt(&self, x: f64, t: f64) -> f64 {
        match &self.repr {
            Repr::Expr { dt, .. } => dt.eval(&Env::xt(x, t)),
            Repr::Func(f) => {
                if self.time_independent {
                    0.0
                } else {
                    (f(x, t + DT_STEP) - f(x, t - DT_STEP)) / (2.0 * DT_STEP)
                }
            }
        }
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn is_time_independent(&self) -> bool {
        self.time_independent
    }

    pub fn is_zero(&self) -> bool {
        self.zero
    }

    pub fn expr(&self) -> Option<&Expr> {
        match &self.repr {
            Repr::Expr { value, .. } => Some(value),
            Repr::Func(_) => None,
        }
    }

    /// Checks time independence by sampling `n × n` points of `[0,1] × window`.
    pub fn sampled_time_independent(&self, window: (f64, f64), n: usize) -> bool {
        let n = n.max(2);
        (0..n).all(|i| {
            let x = i as f64 / (n - 1) as f64;
            let v0 = self.eval(x, window.0);
            (1..n).all(|k| {
                let t = window.0 + (window.1 - window.0) * k as f64 / (n - 1) as f64;
                self.eval(x, t) == v0
            })
        })
    }
}

impl fmt::Debug for CoefficientField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.repr {
            Repr::Expr { value, .. } => write!(f, "CoefficientField({value})"),
            Repr::Func(_) => write!(f, "CoefficientField(<fn>)"),
        }
    }
}

impl From<f64> for CoefficientField {
    fn from(c: f64) -> Self {
        CoefficientField::constant(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_and_breakpoints() {
        let c = CoefficientField::parse("piecewise(x < 0.5, 1, 2)").unwrap();
        assert!(c.is_time_independent());
        assert_eq!(c.breakpoints(), &[0.5]);
        assert!(c.sampled_time_independent((0.0, 5.0), 8));
        assert!(CoefficientField::parse("0*x").unwrap().is_zero());
        let s = CoefficientField::parse("2 + sin(t)").unwrap();
        assert!(!s.is_time_independent());
        assert!(!s.sampled_time_independent((0.0, 1.0), 8));
        assert!((s.dt(0.3, 0.4) - 0.4f64.cos()).abs() < 1e-15);
    }

    #[test]
    fn closure_time_derivative_by_differences() {
        let c = CoefficientField::from_fn(|_, t| 2.0 + t.sin(), false);
        assert!((c.dt(0.0, 1.0) - 1f64.cos()).abs() < 1e-9);
    }
}
