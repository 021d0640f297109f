use thiserror::Error;

/// Errors raised while building meshes, spaces, operators or solving.
#[derive(Debug, Error)]
pub enum Error {
    #[error("coordinate {name} = {value} is not resolvable at level {level} (2^{level} * {value} is not an integer)")]
    UnresolvableCoordinate { name: &'static str, value: f64, level: u32 },
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("mesh construction failed: {0}")]
    Mesh(String),
    #[error("trace-incompatible spaces between subdomain {lower} and subdomain {upper}: {reason}")]
    TraceIncompatible { lower: usize, upper: usize, reason: String },
    #[error("unsupported finite element space: {0}")]
    UnsupportedSpace(String),
    #[error("invalid trace request: {0}")]
    InvalidTrace(String),
    #[error("unsupported ambient dimension {0} (only n = 2 is meshed)")]
    UnsupportedDimension(usize),
    #[error("factorization failed: {0}")]
    Factorization(String),
    #[error("solve residual too large: relative residual {residual:.3e} exceeds {tolerance:.1e}")]
    Residual { residual: f64, tolerance: f64 },
    #[error("{method} at level {level}: {source}")]
    Study {
        method: String,
        level: u32,
        #[source]
        source: Box<Error>,
    },
    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
