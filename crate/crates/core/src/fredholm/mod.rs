//! Mode-by-mode analysis of time-periodic reflection problems
//!
//! ```text
//! ∂_t u + a(x) ∂_x u + b(x) u = f,   u(x, t + 2π) = u(x, t),
//! u_j(0,t) = Σ_{k≥m} r⁰_jk u_k(0,t) (j < m),   u_j(1,t) = Σ_{k<m} r¹_jk u_k(1,t) (j ≥ m).
//! ```
//!
//! Mode integrals are unnormalized, `f̂_s(x) = ∫_0^{2π} f(x,t) e^{−ist} dt`, and the
//! `L²` pairing carries the factor `1/2π`; see `docs/conventions.md`.

mod analysis;
mod diagonal;
mod discrete;
mod linalg;
mod modes;
mod profiles;
mod shooting;

pub use analysis::{
    adjoint_solve, fredholm_solve, kernel_and_index, FredholmConfig, FredholmReport, FredholmSolution, ModeNullity,
    ModeSolveLog, ModeVector, SolvePath,
};
pub use diagonal::solve_mode_diagonal;
pub use discrete::{build_discrete_D, DiscreteOperator, ModeGrid, ParametrixCheck};
pub use linalg::{largest_principal_angle, nullity, CMat, NullityOptions, NullityVerdict};
pub use modes::{from_modes, to_modes, w_norm, FourierField};
pub use profiles::{exponent_profiles, iso_margins, mode_reflection, ExponentProfiles, IsoMargins, ModeReflectionMatrix};
pub use shooting::{adjoint_matching, forward_matching, solve_mode_full, Fundamental, ModeSolution};

use std::sync::Arc;

use num_complex::Complex64;

use crate::boundary::BoundaryOperator;
use crate::error::{Error, Result};
use crate::system::HyperbolicSystem;

pub type C64 = Complex64;

/// Reflection coefficients `r⁰` (`m × (n−m)`) and `r¹` (`(n−m) × m`).
#[derive(Debug, Clone, PartialEq)]
pub struct Reflection {
    pub n: usize,
    pub m: usize,
    pub r0: Vec<Vec<f64>>,
    pub r1: Vec<Vec<f64>>,
}

impl Reflection {
    pub fn new(n: usize, m: usize, r0: Vec<Vec<f64>>, r1: Vec<Vec<f64>>) -> Result<Self> {
        let ok0 = r0.len() == m && r0.iter().all(|r| r.len() == n - m);
        let ok1 = r1.len() == n - m && r1.iter().all(|r| r.len() == m);
        if !(ok0 && ok1) {
            return Err(Error::Invalid(format!("reflection matrices must be r0: {m}x{}, r1: {}x{m}", n - m, n - m)));
        }
        Ok(Reflection { n, m, r0, r1 })
    }

    pub fn from_bc(sys: &HyperbolicSystem, bc: &BoundaryOperator) -> Result<Self> {
        match bc {
            BoundaryOperator::LinearReflection { r0, r1 } => Reflection::new(sys.n(), sys.m(), r0.clone(), r1.clone()),
            other => Err(Error::Invalid(format!(
                "mode analysis needs linear reflection boundary conditions, got {}",
                other.kind()
            ))),
        }
    }
}

/// A time-independent system with reflection boundary conditions.
#[derive(Debug, Clone)]
pub struct ModeSystem {
    pub sys: Arc<HyperbolicSystem>,
    pub refl: Reflection,
    pub profiles: ExponentProfiles,
}

impl ModeSystem {
    pub fn new(sys: Arc<HyperbolicSystem>, bc: &BoundaryOperator) -> Result<Self> {
        let refl = Reflection::from_bc(&sys, bc)?;
        let profiles = exponent_profiles(&sys)?;
        Ok(ModeSystem { sys, refl, profiles })
    }

    pub fn n(&self) -> usize {
        self.refl.n
    }

    pub fn m(&self) -> usize {
        self.refl.m
    }

    pub fn a(&self, j: usize, x: f64) -> f64 {
        self.sys.a(j, x, 0.0)
    }

    pub fn b(&self, j: usize, k: usize, x: f64) -> f64 {
        self.sys.b(j, k, x, 0.0)
    }

    /// Whether the off-diagonal part `b¹` vanishes identically.
    pub fn off_diagonal_zero(&self) -> bool {
        let n = self.n();
        (0..n).all(|j| (0..n).all(|k| j == k || self.sys.b_field(j, k).is_zero()))
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        self.sys.all_breakpoints()
    }
}
