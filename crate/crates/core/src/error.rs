use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("operation requires {required}, got {got}")]
    UnsupportedSet {
        required: &'static str,
        got: &'static str,
    },
    #[error("unsupported order {0}")]
    UnsupportedOrder(usize),
    #[error("grid too small: need at least {need} points along an axis, have {have}")]
    GridTooSmall { need: usize, have: usize },
    #[error("need at least {need} snapshots, got {got}")]
    Snapshots { need: usize, got: usize },
    #[error("ghost-fed boundary needs ghost layers of length {expected}, got {got}")]
    MissingGhosts { expected: usize, got: usize },
    #[error("coefficients were derived for {stored}, not {requested}")]
    Fingerprint { stored: String, requested: String },
    #[error("time-derivative term cannot be applied in a lift; use the spatial part")]
    TimeTerm,
    #[error("linear system is singular or ill-conditioned (condition estimate {0:e})")]
    Singular(f64),
    #[error("degenerate test density: {0}")]
    DegenerateDensity(String),
    #[error("nullspace extraction failed: {0}")]
    Nullspace(String),
    #[error(
        "Newton iteration did not converge after {iterations} iterations (last step {last_step:e})"
    )]
    NoConvergence { iterations: usize, last_step: f64 },
    #[error("sum of time coefficients is zero; summation extraction undefined")]
    ZeroGammaSum,
    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },
    #[error("io error on {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
}
