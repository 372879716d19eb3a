use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid agent partition: {0}")]
    InvalidPartition(String),

    #[error("invalid game: {0}")]
    InvalidGame(String),

    #[error("shape mismatch: expected length {expected}, got {actual}")]
    ShapeMismatch { expected: usize, actual: usize },

    #[error("agent index {index} out of range for {agents} agents")]
    AgentOutOfRange { index: usize, agents: usize },

    #[error("not a polymatrix consolidated matrix: {0}")]
    NotPolymatrix(String),

    #[error("cannot pivot on zero coefficient")]
    ZeroPivot,

    #[error("reduction would empty agent {0}")]
    EmptyAgent(usize),

    #[error("determinant oracle limited to dimension {cap}, got {dim}")]
    DimensionCap { dim: usize, cap: usize },

    #[error("invalid construction: {0}")]
    InvalidConstruction(String),

    #[error("witness check failed: {0}")]
    WitnessFailed(String),

    #[error("invalid sampler config: {0}")]
    InvalidSampler(String),

    #[error("invalid integrator config: {0}")]
    InvalidIntegrator(String),

    #[error("unbounded drift: no equilibrium exists")]
    NoEquilibrium,

    #[error("operation requires a zero-sum game")]
    NotZeroSum,

    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
