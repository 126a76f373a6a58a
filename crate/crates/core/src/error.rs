use thiserror::Error;

use crate::geometry::ChartPoint;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point {0:?} outside chart domain")]
    OutsideChart(ChartPoint),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("stencil failure: {0}")]
    Stencil(String),
    #[error("no spectral gap found (best ratio {best_ratio:.3} at index {index}); refine the grid")]
    NoGapFound { best_ratio: f64, index: usize },
    #[error("eigensolver did not converge: {0}")]
    NotConverged(String),
    #[error("linear algebra failure: {0}")]
    LinearAlgebra(String),
    #[error("integrator failure: {0}")]
    Integrator(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("cache: {0}")]
    Cache(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
