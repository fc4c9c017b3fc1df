use thiserror::Error;

/// Process exit codes of the `eddy-pint` binary.
pub mod exit_code {
    pub const SUCCESS: i32 = 0;
    pub const FAILURE: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const STABILITY: i32 = 3;
    pub const NOT_CONVERGED: i32 = 4;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("{0}")]
    Solver(#[from] eddy_pint::Error),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        use eddy_pint::Error as E;
        match self {
            CliError::Config(_) => exit_code::CONFIG,
            CliError::Solver(E::StabilityLimit { .. }) => exit_code::STABILITY,
            CliError::Solver(
                E::InvalidGrid(_)
                | E::InvalidMaterials(_)
                | E::InvalidExcitation(_)
                | E::InvalidConfig(_)
                | E::InvalidTimeGrid(_),
            ) => exit_code::CONFIG,
            _ => exit_code::FAILURE,
        }
    }
}
