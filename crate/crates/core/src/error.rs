use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{0} overflows f64; use the log-domain variant")]
    Overflow(&'static str),

    #[error(
        "accept-reject exceeded {cap} proposals without acceptance \
         (acceptance constant C = {constant:.6e}); infeasible theta/n combination"
    )]
    Infeasible { cap: u64, constant: f64 },

    #[error("exact enumeration supports {min} <= n <= {max}, got n = {n}")]
    OracleRange { n: usize, min: usize, max: usize },

    #[error("score matrix is not centered: a_dot_dot = {a_dot_dot:e} for theta = {theta}")]
    NotCentered { a_dot_dot: f64, theta: f64 },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("could not achieve negative correlation after {0} matrix draws")]
    NegativeCorrelation(usize),

    #[error("s = {s} with max |y| = {max_abs_y} overflows exp(s*y); shrink the s grid")]
    ExpOverflow { s: f64, max_abs_y: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
