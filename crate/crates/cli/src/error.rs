use thiserror::Error;

/// Problems with the requested sweep. All of them map to exit code 2.
#[derive(Debug, Error)]
pub enum SpecError {
    #[error(transparent)]
    Cli(#[from] clap::Error),

    #[error("bad value for `{key}`: {reason}")]
    Value { key: &'static str, reason: String },

    #[error("config line {line}: {reason}")]
    Config { line: usize, reason: String },

    #[error("cannot read config file {path}: {source}")]
    ConfigIo { path: String, source: std::io::Error },

    #[error("cannot write output {path}: {source}")]
    Output { path: String, source: std::io::Error },

    #[error("{0}")]
    Model(#[from] binoisy::Error),
}

impl SpecError {
    pub(crate) fn value(key: &'static str, reason: impl Into<String>) -> Self {
        SpecError::Value { key, reason: reason.into() }
    }
}
