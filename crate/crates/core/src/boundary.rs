//! Boundary operators `R` and the contraction test for nonlinear reflections.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::characteristics::Tracer;
use crate::coefficient::CoefficientField;
use crate::error::{Error, Result};
use crate::expr::{Env, Expr};
use crate::system::HyperbolicSystem;

type ZFn = Arc<dyn Fn(f64, &[f64]) -> f64 + Send + Sync>;

/// A scalar map `(t, z) ↦ h(t, z)`.
#[derive(Clone)]
pub enum ZMap {
    Expr(Expr),
    Func(ZFn),
}

impl ZMap {
    pub fn parse(src: &str) -> Result<Self> {
        Ok(ZMap::Expr(Expr::parse(src)?.simplify()))
    }

    pub fn from_fn<F: Fn(f64, &[f64]) -> f64 + Send + Sync + 'static>(f: F) -> Self {
        ZMap::Func(Arc::new(f))
    }

    #[inline]
    pub fn eval(&self, t: f64, z: &[f64]) -> f64 {
        match self {
            ZMap::Expr(e) => e.eval(&Env { x: 0.0, t, z }),
            ZMap::Func(f) => f(t, z),
        }
    }
}

impl fmt::Debug for ZMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ZMap::Expr(e) => write!(f, "ZMap({e})"),
            ZMap::Func(_) => write!(f, "ZMap(<fn>)"),
        }
    }
}

#[derive(Debug, Clone)]
pub enum BoundaryOperator {
    /// `u_j(0,t) = h_j(t)` for `j < m`, `u_j(1,t) = h_j(t)` for `j ≥ m`.
    ClassicalTrace { h: Vec<CoefficientField> },
    /// `u_j(0,t) = Σ_{k≥m} r0[j][k−m] u_k(0,t)`, `u_j(1,t) = Σ_{k<m} r1[j−m][k] u_k(1,t)`.
    LinearReflection { r0: Vec<Vec<f64>>, r1: Vec<Vec<f64>> },
    /// `u(0,t) = h(∫_0^1 γ(x) u(x,t) dx)` for a scalar rightward equation.
    IntegralAge { h: ZMap, gamma: CoefficientField },
    /// `u_j = h_j(t, z(t))` with `z = (u_1(1,t),…,u_m(1,t), u_{m+1}(0,t),…,u_n(0,t))`.
    DissipativeNonlinear { h: Vec<ZMap> },
}

impl BoundaryOperator {
    pub fn kind(&self) -> &'static str {
        match self {
            BoundaryOperator::ClassicalTrace { .. } => "classical",
            BoundaryOperator::LinearReflection { .. } => "reflection",
            BoundaryOperator::IntegralAge { .. } => "integral_age",
            BoundaryOperator::DissipativeNonlinear { .. } => "dissipative",
        }
    }

    /// Checks dimensions against the `m`-split of `sys`.
    pub fn validate(&self, sys: &HyperbolicSystem) -> Result<()> {
        let (n, m) = (sys.n(), sys.m());
        match self {
            BoundaryOperator::ClassicalTrace { h } if h.len() != n => {
                Err(Error::Invalid(format!("classical boundary data needs {n} traces")))
            }
            BoundaryOperator::LinearReflection { r0, r1 } => {
                let ok0 = r0.len() == m && r0.iter().all(|r| r.len() == n - m);
                let ok1 = r1.len() == n - m && r1.iter().all(|r| r.len() == m);
                if ok0 && ok1 {
                    Ok(())
                } else {
                    Err(Error::Invalid(format!(
                        "reflection matrices must be r0: {m}x{}, r1: {}x{m}",
                        n - m,
                        n - m
                    )))
                }
            }
            BoundaryOperator::IntegralAge { .. } if n != 1 || m != 1 => {
                Err(Error::Invalid("integral-age boundary requires n = m = 1".into()))
            }
            BoundaryOperator::DissipativeNonlinear { h } if h.len() != n => {
                Err(Error::Invalid(format!("dissipative boundary needs {n} maps")))
            }
            _ => Ok(()),
        }
    }

    /// Whether `R u` depends on `u`.
    pub fn is_state_dependent(&self) -> bool {
        !matches!(self, BoundaryOperator::ClassicalTrace { .. })
    }
}

/// Outgoing traces `z(t)` from boundary values.
pub fn outgoing_traces(m: usize, left: &[f64], right: &[f64]) -> Vec<f64> {
    let n = left.len();
    (0..n).map(|k| if k < m { right[k] } else { left[k] }).collect()
}

/// Lateral boundary value `(R u)_j(t)` for the local operators, given
/// `u(0,t)` and `u(1,t)`.
pub fn local_value(bc: &BoundaryOperator, m: usize, j: usize, t: f64, left: &[f64], right: &[f64]) -> f64 {
    match bc {
        BoundaryOperator::ClassicalTrace { h } => h[j].eval(if j < m { 0.0 } else { 1.0 }, t),
        BoundaryOperator::LinearReflection { r0, r1 } => {
            if j < m {
                r0[j].iter().enumerate().map(|(q, r)| r * left[m + q]).sum()
            } else {
                r1[j - m].iter().enumerate().map(|(q, r)| r * right[q]).sum()
            }
        }
        BoundaryOperator::DissipativeNonlinear { h } => h[j].eval(t, &outgoing_traces(m, left, right)),
        BoundaryOperator::IntegralAge { .. } => f64::NAN,
    }
}

/// Reading of the contraction condition for nonlinear reflections.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, serde::Deserialize, schemars::JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum ContractionReading {
    /// `Σ_k |∂_k h_j(z)|`.
    #[default]
    JacobianRowSum,
    /// `Σ_k |∂_k ∂_j h_j(z)|`.
    SecondDerivative,
}

#[derive(Debug, Clone)]
pub struct ContractionOptions {
    /// Per-component sampling interval for `z`.
    pub z_box: Vec<(f64, f64)>,
    pub z_samples: usize,
    pub nx: usize,
    pub nt: usize,
    pub window: (f64, f64),
    pub fd_step: f64,
    pub reading: ContractionReading,
}

impl ContractionOptions {
    pub fn new(n: usize, window: (f64, f64)) -> Self {
        ContractionOptions {
            z_box: vec![(-1.0, 1.0); n],
            z_samples: 5,
            nx: 21,
            nt: 21,
            window,
            fd_step: 1e-5,
            reading: ContractionReading::JacobianRowSum,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ContractionMargin {
    pub component: usize,
    pub order: u32,
    pub weight_sup: f64,
    pub jacobian_sup: f64,
    pub margin: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ContractionReport {
    pub margins: Vec<ContractionMargin>,
    pub reading: ContractionReading,
    pub passed: bool,
}

impl ContractionReport {
    pub fn min_margin(&self) -> f64 {
        self.margins.iter().map(|m| m.margin).fold(f64::INFINITY, f64::min)
    }
}

fn z_points(opts: &ContractionOptions) -> Vec<Vec<f64>> {
    let s = opts.z_samples.max(1);
    let mut pts = vec![Vec::new()];
    for &(lo, hi) in &opts.z_box {
        let axis: Vec<f64> = (0..s)
            .map(|i| if s == 1 { 0.5 * (lo + hi) } else { lo + (hi - lo) * i as f64 / (s - 1) as f64 })
            .collect();
        pts = pts
            .into_iter()
            .flat_map(|p| {
                axis.iter().map(move |&v| {
                    let mut q = p.clone();
                    q.push(v);
                    q
                })
            })
            .collect();
    }
    pts
}

fn partial(h: &ZMap, t: f64, z: &[f64], k: usize, step: f64) -> f64 {
    let mut zp = z.to_vec();
    let mut zm = z.to_vec();
    zp[k] += step;
    zm[k] -= step;
    (h.eval(t, &zp) - h.eval(t, &zm)) / (2.0 * step)
}

fn second_partial(h: &ZMap, t: f64, z: &[f64], k: usize, j: usize, step: f64) -> f64 {
    let mut zp = z.to_vec();
    let mut zm = z.to_vec();
    zp[k] += step;
    zm[k] -= step;
    (partial(h, t, &zp, j, step) - partial(h, t, &zm, j, step)) / (2.0 * step)
}

/// Margins `1 − sup c_j^(l)(x_j, x, t) · sup_z S_j(z)` for `l = 0..=r`, where
/// `S_j` is the selected derivative sum of `h_j`.
pub fn contraction_check(
    tracer: &Tracer,
    bc: &BoundaryOperator,
    r: u32,
    opts: &ContractionOptions,
) -> Result<ContractionReport> {
    let sys = tracer.system();
    let BoundaryOperator::DissipativeNonlinear { h } = bc else {
        return Err(Error::Invalid("contraction check applies to dissipative boundaries".into()));
    };
    bc.validate(sys)?;
    let n = sys.n();
    if opts.z_box.len() != n {
        return Err(Error::Invalid(format!("z box needs {n} intervals")));
    }
    let zs = z_points(opts);
    let step = opts.fd_step;
    let mut margins = Vec::new();
    for j in 0..n {
        let mut jac_sup: f64 = 0.0;
        for kt in 0..opts.nt.max(1) {
            let t = opts.window.0 + (opts.window.1 - opts.window.0) * kt as f64 / (opts.nt.max(2) - 1) as f64;
            for z in &zs {
                let s: f64 = (0..n)
                    .map(|k| match opts.reading {
                        ContractionReading::JacobianRowSum => partial(&h[j], t, z, k, step).abs(),
                        ContractionReading::SecondDerivative => second_partial(&h[j], t, z, k, j, step).abs(),
                    })
                    .sum();
                if !s.is_finite() {
                    return Err(Error::Evaluation {
                        x: f64::NAN,
                        t,
                        msg: format!("Jacobian of h_{} is not finite at z={z:?}", j + 1),
                    });
                }
                jac_sup = jac_sup.max(s);
            }
        }
        for l in 0..=r {
            let mut w_sup: f64 = 0.0;
            for i in 0..opts.nx.max(2) {
                let x = i as f64 / (opts.nx.max(2) - 1) as f64;
                for kt in 0..opts.nt.max(2) {
                    let t = opts.window.0 + (opts.window.1 - opts.window.0) * kt as f64 / (opts.nt.max(2) - 1) as f64;
                    let (path, exit) = tracer.to_exit(j, x, t)?;
                    w_sup = w_sup.max(path.c(l, exit.x));
                }
            }
            margins.push(ContractionMargin {
                component: j,
                order: l,
                weight_sup: w_sup,
                jacobian_sup: jac_sup,
                margin: 1.0 - w_sup * jac_sup,
            });
        }
    }
    let passed = margins.iter().all(|m| m.margin > 0.0);
    Ok(ContractionReport {
        margins,
        reading: opts.reading,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::TimeDomain;

    fn scalar(b: &str, h: &str) -> (Tracer, BoundaryOperator) {
        let sys = HyperbolicSystem::parse(1, &["1"], &[&[b]], &["0"], TimeDomain::Periodic).unwrap();
        let bc = BoundaryOperator::DissipativeNonlinear {
            h: vec![ZMap::parse(h).unwrap()],
        };
        (Tracer::new(Arc::new(sys)), bc)
    }

    #[test]
    fn linear_map_margin() {
        let (tr, bc) = scalar("0", "0.5*z1");
        let rep = contraction_check(&tr, &bc, 2, &ContractionOptions::new(1, (0.0, 6.0))).unwrap();
        for m in &rep.margins {
            assert!((m.margin - 0.5).abs() < 1e-8);
        }
        assert!(rep.passed);
    }

    #[test]
    fn constant_map_margin() {
        let (tr, bc) = scalar("0", "3 + cos(t)");
        let rep = contraction_check(&tr, &bc, 0, &ContractionOptions::new(1, (0.0, 6.0))).unwrap();
        assert_eq!(rep.min_margin(), 1.0);
    }

    #[test]
    fn growth_weight_breaks_contraction() {
        let (tr, bc) = scalar("-1", "0.5*z1");
        let rep = contraction_check(&tr, &bc, 0, &ContractionOptions::new(1, (0.0, 6.0))).unwrap();
        assert!((rep.min_margin() - (1.0 - std::f64::consts::E / 2.0)).abs() < 1e-8);
        assert!(!rep.passed);
    }

    #[test]
    fn second_derivative_reading() {
        let (tr, bc) = scalar("0", "0.5*z1");
        let mut opts = ContractionOptions::new(1, (0.0, 6.0));
        opts.reading = ContractionReading::SecondDerivative;
        let rep = contraction_check(&tr, &bc, 0, &opts).unwrap();
        assert!((rep.min_margin() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn reflection_index_pattern() {
        let bc = BoundaryOperator::LinearReflection {
            r0: vec![vec![0.5]],
            r1: vec![vec![0.25]],
        };
        let (left, right) = ([1.0, 2.0], [3.0, 4.0]);
        assert_eq!(local_value(&bc, 1, 0, 0.0, &left, &right), 1.0);
        assert_eq!(local_value(&bc, 1, 1, 0.0, &left, &right), 0.75);
    }
}
