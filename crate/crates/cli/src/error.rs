use std::process::ExitCode;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage error: {0}")]
    Usage(String),
    #[error("numeric failure in {module}: {source}")]
    Numeric {
        module: &'static str,
        #[source]
        source: mgame_core::Error,
    },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    /// Wraps a core error, tagging it with the module that raised it.
    pub fn core(module: &'static str) -> impl Fn(mgame_core::Error) -> CliError {
        move |source| match source {
            mgame_core::Error::Numeric(_) | mgame_core::Error::Invariant(_) => CliError::Numeric { module, source },
            other => CliError::Usage(format!("{module}: {other}")),
        }
    }

    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Usage(_) => ExitCode::from(2),
            CliError::Numeric { .. } => ExitCode::from(3),
            CliError::Io { .. } => ExitCode::from(1),
        }
    }
}
