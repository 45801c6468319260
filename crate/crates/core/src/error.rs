use thiserror::Error;

/// Error type shared by all solver modules.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid or degenerate geometry (disconnected pore phase, empty
    /// interface, tiling mismatch, ...).
    #[error("geometry error: {0}")]
    Geometry(String),

    /// A parameter violates a documented precondition.
    #[error("parameter error: {0}")]
    Parameter(String),

    /// A pure-Neumann/periodic problem was given incompatible data.
    #[error("solvability error: {0}")]
    Solvability(String),

    /// An iterative solve hit its iteration cap before reaching tolerance.
    #[error("convergence error: {0}")]
    Convergence(String),

    /// A non-finite value appeared during time stepping.
    #[error("numerics error: {0}")]
    Numerics(String),

    /// An input lies outside the mathematical domain of a formula.
    #[error("domain error: {0}")]
    Domain(String),

    /// Two trajectories or grids cannot be compared without interpolation.
    #[error("interpolation error: {0}")]
    Interpolation(String),

    /// Configuration parsing or validation failure.
    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
