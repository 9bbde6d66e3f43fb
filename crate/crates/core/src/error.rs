use thiserror::Error;

/// Errors raised anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("evaluation error: {0}")]
    Evaluation(String),

    #[error("inadmissible deformation: det(F) = {det}")]
    InadmissibleDeformation { det: f64 },

    #[error("inverse Langevin argument {arg} outside (-1, 1)")]
    LangevinSaturation { arg: f64 },

    #[error("element {element}: {source}")]
    Element {
        element: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("snapshot {snapshot}: {source}")]
    Snapshot {
        snapshot: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("solver did not converge: {0}")]
    Solver(String),

    #[error("training aborted at epoch {epoch}: {reason}")]
    Training { epoch: usize, reason: String },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }

    /// True for failures of the numerics (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Evaluation(_)
            | Error::InadmissibleDeformation { .. }
            | Error::LangevinSaturation { .. }
            | Error::Solver(_)
            | Error::Training { .. } => true,
            Error::Element { source, .. } | Error::Snapshot { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
