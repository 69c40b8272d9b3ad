use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("training error at {context}: {message}")]
    Training { context: String, message: String },

    #[error("degenerate state {0}: all outgoing flows are zero")]
    DegenerateState(usize),

    #[error("infeasible load on leos {leos}, cc {cc}: positive demand with zero SINR")]
    InfeasibleLoad { leos: usize, cc: usize },

    #[error("scenario invariant violated: {0}")]
    Invariant(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn training(context: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Training {
            context: context.into(),
            message: message.into(),
        }
    }
}
