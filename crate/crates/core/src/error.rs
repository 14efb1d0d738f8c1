use thiserror::Error;

pub type Result<T> = std::result::Result<T, LabError>;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("usage error: {0}")]
    Usage(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("not spacelike here: induced metric is not positive definite at {point:?}")]
    NotSpacelike { point: Vec<f64> },

    #[error("frame error: {0}")]
    Frame(String),

    #[error("element {element} not spacelike / mesh too coarse (gram determinant {det:e})")]
    ElementNotSpacelike { element: usize, det: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("mesh error: {0}")]
    Mesh(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl LabError {
    /// Process exit status used by the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Usage(_) | LabError::Json(_) | LabError::Io(_) => 2,
            _ => 3,
        }
    }
}
