use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("non-finite value at index {index} ({context})")]
    Corruption { index: usize, context: &'static str },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(&'static str),
    #[error("kick overflow at t = {time}")]
    KickOverflow { time: f64 },
    #[error("quadrature did not converge: {0}")]
    Quadrature(String),
    #[error("extraction exhausted: epsilon {epsilon:e} below floor {floor:e}")]
    ExtractionExhausted { epsilon: f64, floor: f64 },
    #[error("extraction stagnated at level {level}: epsilon {previous:e} -> {current:e}")]
    Stagnation { level: usize, previous: f64, current: f64 },
    #[error("snapshot format: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
