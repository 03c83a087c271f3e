use std::path::PathBuf;

use thiserror::Error;

/// Failures of the runner. All of them map to exit status 1.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },

    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },

    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),

    #[error("bad override `{0}`: expected section.key=value")]
    Override(String),

    #[error("[{section}] {source}")]
    Invalid {
        section: &'static str,
        source: magstark::Error,
    },

    #[error(transparent)]
    Lib(#[from] magstark::Error),

    #[error("{0}")]
    Usage(String),

    #[error("serialization failed: {0}")]
    Serialize(String),
}

impl CliError {
    pub(crate) fn invalid(section: &'static str) -> impl FnOnce(magstark::Error) -> Self {
        move |source| Self::Invalid { section, source }
    }
}

pub type CliResult<T> = Result<T, CliError>;
