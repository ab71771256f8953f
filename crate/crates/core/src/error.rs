use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Broad failure category, used by the command-line tool to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Data,
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("undefined concordance: no usable pairs")]
    UndefinedConcordance,

    #[error("no weighted events: {0}")]
    NoEvents(String),

    #[error("cross-validation fold {fold} has no weighted events; use a smaller number of folds")]
    EmptyFold { fold: usize },

    #[error("subgroup '{label}' has {size} members, fewer than the {folds} folds requested; use fewer folds")]
    SmallSubgroup { label: String, size: usize, folds: usize },

    #[error("stratum {0} is too small to split into training and test parts")]
    EmptyStratum(String),

    #[error("class {0} is absent from the training data")]
    MissingClass(usize),

    #[error("unknown classifier '{0}'")]
    UnknownClassifier(String),

    #[error("solver did not converge at lambda index {index} (lambda = {lambda:e})")]
    NonConvergence { index: usize, lambda: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },

    #[error("config: {0}")]
    Config(String),

    #[error("{failed} of {total} repetitions failed (at least 80% must succeed)")]
    TooManyFailures { failed: usize, total: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidInput(_) | Error::UnknownClassifier(_) | Error::Config(_) => ErrorKind::Usage,
            Error::NonConvergence { .. } | Error::NonFinite(_) => ErrorKind::Numerical,
            Error::TooManyFailures { .. } => ErrorKind::Numerical,
            _ => ErrorKind::Data,
        }
    }
}
