use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid lattice: {0}")]
    InvalidLattice(String),

    #[error("capacity exceeded: about {requested} points requested, cap is {cap}")]
    Capacity { requested: u64, cap: u64 },

    #[error("invalid field: {0}")]
    InvalidField(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("margin violation: ball of radius {radius} plus displacement bound {bound} exceeds window {window}")]
    MarginViolation { radius: f64, bound: f64, window: f64 },

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("unknown recipe `{0}`")]
    UnknownRecipe(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config { path: path.into(), message: message.into() }
    }
}
