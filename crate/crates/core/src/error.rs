use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Nn(#[from] imfilm_nn::NnError),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("subject is behind the camera (depth {depth:.3} m)")]
    Behind { depth: f64 },
    #[error("subject box lies entirely outside the frame")]
    OffScreen,
    #[error("subject box too small to localize (normalized height {0:.2e})")]
    TooSmall(f64),
    #[error("generator parameter out of range: {0}")]
    Generator(String),
    #[error("sequence too short: {len} frames, need at least {min}")]
    TooShort { len: usize, min: usize },
    #[error("training diverged at epoch {epoch}: {detail}")]
    Diverged { epoch: usize, detail: String },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("sampling error: {0}")]
    Sampling(String),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("no feasible waypoint along the commanded direction")]
    Infeasible,
    #[error("subject lost for {lost_for:.2} s at t = {time:.2} s")]
    SubjectLost { time: f64, lost_for: f64 },
    #[error("malformed data in {path}: {detail}")]
    Format { path: PathBuf, detail: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<PathBuf>, detail: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            detail: detail.into(),
        }
    }
}
