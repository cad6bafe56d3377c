use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Failure modes shared by the geometric estimators.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("point lies behind the camera (Z = {0})")]
    BehindCamera(f64),
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(&'static str),
    /// The point does not move relative to the epipole; its time to collision
    /// cannot be recovered from its own track (constant bearing).
    #[error("stationary point: no angular motion relative to the epipole")]
    StationaryPoint,
    #[error("flow line is parallel to the horizon")]
    ParallelToHorizon,
    #[error("insufficient data: need at least {needed}, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("singular geometry: {0}")]
    SingularGeometry(&'static str),
    #[error("degenerate configuration: {0}")]
    DegenerateConfiguration(&'static str),
    #[error("zero-length flow vector")]
    DegenerateFlow,
}
