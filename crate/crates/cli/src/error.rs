use std::path::PathBuf;

use imfilm_nn::NnError;
use thiserror::Error;

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] imfilm::Error),
    #[error("missing {stage} stage: {} not found (run `imfilm {command}` first)", path.display())]
    Dependency {
        stage: &'static str,
        command: &'static str,
        path: PathBuf,
    },
    #[error("{0}")]
    Argument(String),
    #[error("refusing to write into non-empty {} (pass --force to replace it)", .0.display())]
    NotEmpty(PathBuf),
}

impl CliError {
    pub const ARGUMENT: i32 = 2;
    pub const DEPENDENCY: i32 = 3;
    pub const NUMERIC: i32 = 4;
    pub const IO: i32 = 5;
    pub const SUBJECT_LOST: i32 = 6;

    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        use imfilm::Error as E;
        match self {
            CliError::Argument(_) | CliError::NotEmpty(_) => Self::ARGUMENT,
            CliError::Dependency { .. } => Self::DEPENDENCY,
            CliError::Core(e) => match e {
                E::Argument(_) | E::Config(_) | E::Generator(_) => Self::ARGUMENT,
                E::Numeric(_) | E::Diverged { .. } | E::Nn(NnError::Numeric(_)) => Self::NUMERIC,
                E::Io { .. }
                | E::Format { .. }
                | E::Nn(
                    NnError::Io { .. } | NnError::Format(_) | NnError::MissingParam(_) | NnError::DuplicateParam(_),
                ) => Self::IO,
                E::SubjectLost { .. } => Self::SUBJECT_LOST,
                _ => 1,
            },
        }
    }
}
