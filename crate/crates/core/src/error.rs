use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An input violated a documented precondition (shape, symmetry, PSD-ness).
    #[error("contract violation: {0}")]
    Contract(String),

    /// A scalar argument is outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("singular matrix: {0}")]
    SingularMatrix(String),

    /// The constant-gap machinery only applies when the first hop dominates.
    #[error("not applicable: delta = {delta} (requires delta > 0)")]
    NotApplicable { delta: f64 },

    #[error("degenerate channel: {0}")]
    DegenerateChannel(String),

    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("schema error in {path}: {message}")]
    Schema { path: PathBuf, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}
