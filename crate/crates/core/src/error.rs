use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("row {row}, column '{column}': cannot parse '{value}' as a number")]
    Parse {
        row: usize,
        column: String,
        value: String,
    },

    #[error("column '{name}' not found; available columns: {}", available.join(", "))]
    MissingColumn { name: String, available: Vec<String> },

    #[error("empty candidate subset: {0}")]
    EmptySupport(String),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("zero denominator: {0}")]
    ZeroDenominator(&'static str),

    #[error("not enough data: {0}")]
    InsufficientData(String),
}

impl Error {
    /// True for errors caused by the input data rather than by configuration.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::NonFinite(_)
                | Error::Io { .. }
                | Error::Csv(_)
                | Error::Parse { .. }
                | Error::MissingColumn { .. }
                | Error::DimensionMismatch(_)
                | Error::Singular(_)
                | Error::ZeroDenominator(_)
                | Error::EmptySupport(_)
                | Error::InsufficientData(_)
        )
    }
}
