use std::path::Path;

/// Failures of a CLI run, each mapped to a process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad command line.
    #[error("{0}")]
    Usage(String),

    /// An input file is malformed or violates an invariant.
    #[error("{path}: {message}")]
    Input { path: String, message: String },

    /// The engine rejected or failed on otherwise well-formed inputs.
    #[error("{0}")]
    Engine(#[from] nergrvt_core::Error),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_IO: i32 = 4;

impl CliError {
    pub fn input(path: &Path, message: impl Into<String>) -> Self {
        CliError::Input {
            path: path.display().to_string(),
            message: message.into(),
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// Attaches a file to an engine error raised while building that file's contents.
    pub fn in_file(path: &Path, err: nergrvt_core::Error) -> Self {
        if err.is_input_error() {
            Self::input(path, err.to_string())
        } else {
            CliError::Engine(err)
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Input { .. } => EXIT_VALIDATION,
            CliError::Engine(e) if e.is_input_error() => EXIT_VALIDATION,
            CliError::Engine(_) => EXIT_NUMERICAL,
            CliError::Io { .. } => EXIT_IO,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
