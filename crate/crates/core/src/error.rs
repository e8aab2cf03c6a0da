use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("backtrack stalled at ({x:.3}, {y:.3}, {theta:.4}) with U = {value}")]
    BacktrackStall {
        x: f64,
        y: f64,
        theta: f64,
        value: f64,
    },
    #[error("infeasible cluster: nodes {0} and {1} are not connected by a finite distance")]
    InfeasibleCluster(usize, usize),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
