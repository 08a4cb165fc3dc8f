use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Two robots occupy the same position, so the pair direction is undefined.
    #[error("degenerate state: robots {i} and {j} are coincident")]
    DegenerateState { i: usize, j: usize },

    /// The state is outside (or numerically on the boundary of) the certified set.
    #[error("state outside the certified set; violated atoms: {}", .atoms.join(", "))]
    InvarianceViolated { atoms: Vec<String> },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
