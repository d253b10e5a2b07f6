use thiserror::Error;

/// Errors produced by the grid, solver, and analysis routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("node ({i}, {j}) is not an interior node")]
    NotInterior { i: usize, j: usize },

    #[error("stencil around node ({i}, {j}) leaves the domain")]
    StencilOutside { i: usize, j: usize },

    #[error("point ({x}, {y}) is outside the interpolation region")]
    PointOutside { x: f64, y: f64 },

    #[error("ball of radius {r} around ({x}, {y}) is not contained in the domain")]
    BallNotContained { x: f64, y: f64, r: f64 },

    #[error("membrane ordering violated: {0}")]
    Ordering(String),

    #[error("invalid forcing: {0}")]
    Forcing(String),

    #[error("Weiss module requires (CF): forcing must be constant")]
    VariableForcing,

    #[error("node ({i}, {j}) is not a highest-multiplicity free boundary node")]
    NotHighestMultiplicity { i: usize, j: usize },

    #[error("stack is not null-averaged (max |sum u_j| = {0:e})")]
    NotNullAverage(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid profile parameters: {0}")]
    InvalidProfile(String),

    #[error("malformed data: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
