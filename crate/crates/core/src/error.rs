use std::path::PathBuf;

/// Errors raised by the simulator.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An argument lies outside its valid range (file id, state, cache size).
    #[error("domain error: {0}")]
    Domain(String),

    /// Hit rate requested for a run with no rounds.
    #[error("empty run: hit rate is undefined for T = 0")]
    EmptyRun,

    /// A floating-point computation failed to produce a usable value.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// An input violated an operation's precondition.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// An explicit scale guard refused an instance that is too large.
    #[error("scale guard: {what} = {size} exceeds limit {limit}")]
    ScaleGuard {
        what: &'static str,
        size: u128,
        limit: u128,
    },

    /// Experiment configuration error, reported with the offending key path.
    #[error("config error at `{key}`: {msg}")]
    Config { key: String, msg: String },

    /// Malformed trace or FSM file, reported with its location.
    #[error("{}:{line}: {msg}", path.display())]
    Data {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(key: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            msg: msg.into(),
        }
    }

    /// Process exit code for the CLI: 2 config, 3 data, 4 numeric.
    ///
    /// Domain and precondition failures come from bad inputs, so they map to
    /// the data code.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } => 2,
            Error::Data { .. } | Error::Io { .. } => 3,
            Error::Domain(_) | Error::Precondition(_) | Error::ScaleGuard { .. } => 3,
            Error::EmptyRun => 3,
            Error::Numeric(_) => 4,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
