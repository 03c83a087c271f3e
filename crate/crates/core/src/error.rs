use thiserror::Error;

/// Everything that can go wrong in the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid configuration: `{field}` {reason}")]
    Config { field: &'static str, reason: String },

    #[error(
        "decay certificate violated ({envelope}): ratio {ratio:.6e} exceeds declared constant \
         {constant:.6e} at (x = {x}, y = {y})"
    )]
    DecayCertificate {
        envelope: &'static str,
        ratio: f64,
        constant: f64,
        x: f64,
        y: f64,
    },

    #[error(
        "dimension {dim} exceeds the dense limit {limit}; use a smaller grid \
         (no sparse/iterative path is implemented)"
    )]
    Capacity { dim: usize, limit: usize },

    #[error("z = {re}{im:+}i is within {tol:e} of the eigenvalue {eigenvalue}")]
    NearSingular {
        re: f64,
        im: f64,
        eigenvalue: f64,
        tol: f64,
    },

    #[error("support [{lo}, {hi}] of the test function leaves the resolved window [{a}, {b}]")]
    Window { lo: f64, hi: f64, a: f64, b: f64 },

    #[error("no gap of margin {requested} in [{lo}, {hi}]; the largest available margin is {available}")]
    GapNotFound {
        requested: f64,
        available: f64,
        lo: f64,
        hi: f64,
    },

    #[error("truncation radius {radius} too large: needs 2R <= min(lx, ly) = {limit}")]
    Geometry { radius: f64, limit: f64 },

    #[error("support [{lo}, {hi}] meets the localized spectrum of Q at {eigenvalue} (margin {margin})")]
    SupportOverlap {
        lo: f64,
        hi: f64,
        eigenvalue: f64,
        margin: f64,
    },

    #[error("dense linear algebra failed: {0}")]
    Linalg(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn config(field: &'static str, reason: impl Into<String>) -> Error {
    Error::Config {
        field,
        reason: reason.into(),
    }
}
