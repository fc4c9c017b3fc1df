use thiserror::Error;

/// Errors raised while building or integrating an eddy-current system.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid materials: {0}")]
    InvalidMaterials(String),

    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("no conducting region: the mass matrix has no positive entries")]
    NoConductingRegion,

    #[error("no algebraic block: every degree of freedom is conducting, integrate the ODE directly")]
    NoAlgebraicBlock,

    #[error("gauge/regularity error: non-conducting stiffness block is singular ({0})")]
    SingularStiffnessBlock(String),

    #[error("singular implicit operator ({0})")]
    SingularImplicitOperator(String),

    #[error("explicit step {step:e} s exceeds stability limit {limit:e} s")]
    StabilityLimit { step: f64, limit: f64 },

    #[error(
        "power iteration did not converge after {iterations} iterations (best eigenvalue estimate {lambda_max:e})"
    )]
    PowerIteration { iterations: usize, lambda_max: f64 },

    #[error("invalid excitation: {0}")]
    InvalidExcitation(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid time grid: {0}")]
    InvalidTimeGrid(String),

    #[error("invalid parareal configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
