use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("normal matrix is singular or numerically rank deficient; use lambda > 0 or add rows")]
    Singular,

    #[error("degenerate matrix-inversion-lemma denominator {0:e}")]
    DegenerateDenominator(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("window {window} failed: {source}")]
    Window {
        window: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("reference model is identically zero")]
    ZeroReference,

    #[error("malformed grid file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// True for failures of the numerical machinery rather than of the inputs' shape.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonFinite(_)
                | Error::Singular
                | Error::DegenerateDenominator(_)
                | Error::Window { .. }
        )
    }
}

pub(crate) fn check_len(context: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            got,
        })
    }
}

pub(crate) fn check_finite(context: &'static str, values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(context))
    }
}
