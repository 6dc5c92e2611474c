use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("index {index} out of range for {len} players")]
    Index { index: usize, len: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("invalid configuration: {0}")]
    Configuration(String),

    #[error("non-finite state at iteration {iteration}")]
    Divergence { iteration: usize },

    #[error("oracle did not reach tolerance {tol} within {iterations} iterations (kkt residual {residual})")]
    OracleFailure {
        iterations: usize,
        tol: f64,
        residual: f64,
    },

    #[error("malformed record: {0}")]
    Parse(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn check_index(index: usize, len: usize) -> Result<()> {
    if index < len {
        Ok(())
    } else {
        Err(Error::Index { index, len })
    }
}
