use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("element does not belong to group {expected}")]
    DescriptorMismatch { expected: String },

    #[error("invalid group descriptor: {0}")]
    InvalidDescriptor(String),

    #[error("cannot parse {what} from {text:?}: {reason}")]
    Parse {
        what: &'static str,
        text: String,
        reason: String,
    },

    #[error("word length search exhausted radius {radius}")]
    RadiusExhausted { radius: usize },

    #[error("budget exceeded: {what} needs {needed}, cap is {cap}")]
    Budget {
        what: &'static str,
        needed: usize,
        cap: usize,
    },

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("measure is not isotropic: {0}")]
    NotIsotropic(String),

    #[error("aperiodicity required (detected period {period})")]
    Periodic { period: usize },

    #[error("period could not be determined up to depth {depth}")]
    PeriodInconclusive { depth: usize },

    #[error("{what} is unreachable within depth {depth}")]
    Unreachable { what: String, depth: usize },

    #[error("level {level} does not retain {element}")]
    NotRetained { level: usize, element: String },

    #[error("value underflowed at level {level} for {element}")]
    Underflow { level: usize, element: String },

    #[error("depth {requested} exceeds cache depth {available}")]
    DepthExceeded { requested: usize, available: usize },

    #[error("kernel coverage gap: {0}")]
    Coverage(String),

    #[error("estimate did not stabilise: {0}")]
    NotConverged(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn parse(what: &'static str, text: &str, reason: impl Into<String>) -> Self {
        Error::Parse {
            what,
            text: text.to_string(),
            reason: reason.into(),
        }
    }

    /// Process exit code used by the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Budget { .. } | Error::DepthExceeded { .. } => 3,
            _ => 2,
        }
    }
}
