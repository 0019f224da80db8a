use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::kinematics::KinematicsError;
use crate::spatial::SpatialError;
use crate::srukf::SrukfError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("timestamps out of order: {current} s after {previous} s")]
    Ordering { previous: f64, current: f64 },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("insufficient stance support: {stance} legs, need at least {required}")]
    InsufficientSupport { stance: usize, required: usize },
    #[error("frame does not match robot model: {0}")]
    FrameMismatch(String),
    #[error("trajectories do not overlap in time")]
    DisjointTimeRanges,
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
    #[error(transparent)]
    Filter(#[from] SrukfError),
    #[error(transparent)]
    Spatial(#[from] SpatialError),
}

impl Error {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}
