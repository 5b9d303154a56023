use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("duplicate atom `{0}`")]
    DuplicateAtom(String),
    #[error("atom `{0}` is not in the set")]
    UnknownAtom(String),
    #[error("map is not total: no image for `{0}`")]
    NotTotal(String),
    #[error("codomain mismatch: {0}")]
    CodomainMismatch(String),
    #[error("square does not commute at `{0}`")]
    NotCommuting(String),
    #[error("malformed element: {0}")]
    Malformed(String),
    #[error("arity mismatch: expected {expected}, got {got}")]
    Arity { expected: usize, got: usize },
    #[error("not composable: {0}")]
    NotComposable(String),
    #[error("law violated: {0}")]
    Law(String),
    #[error("not a discrete opfibration: {0}")]
    NotOpfibration(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("missing table entry: {0}")]
    Missing(String),
    #[error("json: {0}")]
    Json(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Json(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
