use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("numerical overflow: {0}")]
    NumericalOverflow(String),

    #[error("degenerate posterior: {0}")]
    DegeneratePosterior(String),

    #[error("at timepoint {index}: {source}")]
    AtTimepoint {
        index: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn at(index: usize, source: Error) -> Self {
        Error::AtTimepoint {
            index,
            source: Box::new(source),
        }
    }

    /// Innermost error, with timepoint wrappers stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtTimepoint { source, .. } => source.root(),
            other => other,
        }
    }
}
