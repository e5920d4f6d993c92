use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("integrity error: {0}")]
    Integrity(String),

    /// A value outside the mathematical domain of an operation, e.g. a
    /// non-positive price or a constant return series.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    /// The eigenportfolio normalizer `sum_j u_j` is too close to zero.
    #[error("degenerate eigenportfolio for rank {rank}: component sum {sum:e} below threshold {threshold:e}")]
    DegeneratePortfolio { rank: usize, sum: f64, threshold: f64 },

    #[error("invalid synthetic specification: {0}")]
    Spec(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            location: location.into(),
            message: message.into(),
        }
    }
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        let location = match err.position() {
            Some(pos) => format!("line {}", pos.line()),
            None => "csv".to_string(),
        };
        Error::parse(location, err.to_string())
    }
}
