use thiserror::Error;

/// Errors raised across the library.
///
/// The variants are grouped so that the command-line front end can map them
/// onto exit statuses: precondition-type failures, resource/precision-type
/// failures and everything else.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown letter {0:?} for this alphabet")]
    Alphabet(String),

    #[error("elements belong to different groups")]
    Incompatible,

    #[error("invalid group presentation: {0}")]
    Presentation(String),

    #[error("invalid measure: {0}")]
    Measure(String),

    #[error("resource limit exceeded: {0}")]
    Resource(String),

    #[error("construction did not converge: {0}")]
    NonConvergence(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("series diverges: {0}")]
    Divergence(String),

    #[error("insufficient precision: {0}")]
    Precision(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("outside domain: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit status associated with the error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Precondition(_)
            | Error::Domain(_)
            | Error::Unsupported(_)
            | Error::InsufficientData(_)
            | Error::Divergence(_)
            | Error::Incompatible => 2,
            Error::Resource(_) | Error::Precision(_) | Error::NonConvergence(_) => 3,
            _ => 1,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
