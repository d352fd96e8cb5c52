use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error("certificate error: {0}")]
    Certificate(String),
    #[error("overlap {modulus} lies outside the closed unit disk")]
    Domain { modulus: f64 },
}

impl Error {
    pub(crate) fn dim_mismatch(expected: usize, found: usize) -> Self {
        Error::Dimension(format!("expected dimension {expected}, found {found}"))
    }
}
