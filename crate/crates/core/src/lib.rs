//! Characteristic-integral solvers for first-order hyperbolic systems
//!
//! ```text
//! ∂_t u + a(x,t) ∂_x u + b(x,t) u = f(x,t),   0 < x < 1,
//! ```
//!
//! with diagonal `a`, together with empirical smoothing diagnostics and a
//! mode-by-mode Fredholm analysis of time-periodic reflection problems.

pub mod error;
pub mod expr;
pub mod coefficient;
pub mod system;
pub mod quadrature;
pub mod ode;
pub mod characteristics;
pub mod grid;
pub mod boundary;
pub mod operators;
pub mod population;
pub mod solver;
pub mod smoothing;
pub mod fredholm;
pub mod scenario;
pub mod report;
pub mod cli;

pub use coefficient::CoefficientField;
pub use error::{Error, Result};
pub use system::{HyperbolicSystem, TimeDomain};
