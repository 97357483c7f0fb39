use dqcurate_core::pipeline::CurateError;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl EvalError {
    /// Process exit code: 1 for validation errors, 2 for I/O errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            EvalError::Validation(_) => 1,
            EvalError::Io(_) => 2,
        }
    }

    pub fn invalid(msg: impl std::fmt::Display) -> Self {
        EvalError::Validation(msg.to_string())
    }
}

impl From<CurateError> for EvalError {
    fn from(e: CurateError) -> Self {
        match e {
            CurateError::Io(e) => EvalError::Io(e),
            CurateError::Csv(e) if e.is_io_error() => match e.into_kind() {
                csv::ErrorKind::Io(e) => EvalError::Io(e),
                other => EvalError::Validation(format!("{other:?}")),
            },
            other => EvalError::Validation(other.to_string()),
        }
    }
}

impl From<serde_json::Error> for EvalError {
    fn from(e: serde_json::Error) -> Self {
        if e.is_io() {
            EvalError::Io(e.into())
        } else {
            EvalError::Validation(e.to_string())
        }
    }
}

impl From<csv::Error> for EvalError {
    fn from(e: csv::Error) -> Self {
        CurateError::Csv(e).into()
    }
}

pub type Result<T, E = EvalError> = std::result::Result<T, E>;
