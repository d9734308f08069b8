use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    /// A Cholesky factorization failed. `matrix` names the offending matrix.
    #[error("matrix `{matrix}` is not positive definite")]
    NotPositiveDefinite { matrix: String },

    #[error("matrix `{matrix}` is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { matrix: String, asymmetry: f64 },

    #[error("improper product: combined precision is not positive definite")]
    ImproperProduct,

    #[error("invalid {what}: {reason}")]
    Invalid { what: &'static str, reason: String },

    #[error("regime enumeration needs {required} paths but the cap is {cap}")]
    EnumerationCap { required: u128, cap: u64 },

    #[error("all regime weights vanished")]
    DegenerateWeights,

    #[error("at time {t}: {source}")]
    AtTime {
        t: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("config: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn invalid(what: &'static str, reason: impl Into<String>) -> Self {
        Error::Invalid {
            what,
            reason: reason.into(),
        }
    }

    pub(crate) fn not_pd(matrix: impl Into<String>) -> Self {
        Error::NotPositiveDefinite {
            matrix: matrix.into(),
        }
    }

    /// Tags the error with the time index it occurred at.
    pub fn at(self, t: usize) -> Self {
        match self {
            e @ Error::AtTime { .. } => e,
            e => Error::AtTime {
                t,
                source: Box::new(e),
            },
        }
    }

    /// Time index attached by [`Error::at`], if any.
    pub fn time_index(&self) -> Option<usize> {
        match self {
            Error::AtTime { t, .. } => Some(*t),
            _ => None,
        }
    }
}

pub(crate) trait AtTime<T> {
    fn at(self, t: usize) -> Result<T>;
}

impl<T> AtTime<T> for Result<T> {
    fn at(self, t: usize) -> Result<T> {
        self.map_err(|e| e.at(t))
    }
}
