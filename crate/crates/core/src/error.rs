use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },

    #[error("unknown variable `{0}`")]
    UnknownVariable(String),

    #[error("coefficient evaluation failed at (x={x}, t={t}): {msg}")]
    Evaluation { x: f64, t: f64, msg: String },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("step size underflow while tracing component {component} at xi={xi}")]
    StepUnderflow { component: usize, xi: f64 },

    #[error("characteristic ordinate {needed} outside the available window [{lo}, {hi}]")]
    WindowUnderflow { needed: f64, lo: f64, hi: f64 },

    #[error("missing initial data on a half strip")]
    MissingInitialData,

    #[error("fixed-point iteration did not converge in slab {slab} after {iterations} iterations (last ratio {ratio:.3e})")]
    NonConvergence {
        slab: usize,
        iterations: usize,
        ratio: f64,
    },

    #[error("singular mode s={s}: |det(I - R_s)| = {margin:.3e}")]
    SingularMode { s: i64, margin: f64 },

    #[error("aliasing: S_max={s_max} requires more than {nt} time samples")]
    Aliasing { s_max: usize, nt: usize },

    #[error("{0}")]
    Io(#[from] std::io::Error),

    #[error("{0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
