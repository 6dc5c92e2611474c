use thiserror::Error;

pub type CliResult<T> = std::result::Result<T, CliError>;

pub const EXIT_OK: i32 = 0;
/// Ran to completion but the verified result failed its check.
pub const EXIT_MISMATCH: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DIVERGENCE: i32 = 3;
pub const EXIT_ORACLE: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Solver(#[from] resus_gne::Error),

    #[error("cannot write {path}: {source}")]
    Output {
        path: String,
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use resus_gne::Error as E;
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Solver(E::Configuration(_) | E::Parameter(_)) => EXIT_CONFIG,
            CliError::Solver(E::Divergence { .. }) => EXIT_DIVERGENCE,
            CliError::Solver(E::OracleFailure { .. }) => EXIT_ORACLE,
            _ => EXIT_MISMATCH,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use resus_gne::Error as E;

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Config("x".into()).exit_code(), 2);
        assert_eq!(CliError::from(E::Parameter("x".into())).exit_code(), 2);
        assert_eq!(
            CliError::from(E::Divergence { iteration: 3 }).exit_code(),
            3
        );
        let oracle = E::OracleFailure {
            iterations: 10,
            tol: 1e-9,
            residual: 1.0,
        };
        assert_eq!(CliError::from(oracle).exit_code(), 4);
        assert_eq!(CliError::from(E::Parse("x".into())).exit_code(), 1);
    }
}
