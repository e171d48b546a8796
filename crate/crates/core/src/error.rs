use thiserror::Error;

#[derive(Debug, Error)]
pub enum VemError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("mesh generation failed: {0}")]
    GenerationFailure(String),

    #[error("distortion inverts element {element} (signed area {area:e})")]
    DistortionFailure { element: usize, area: f64 },

    #[error("refinement failed: {0}")]
    RefinementFailure(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid mesh topology: {0}")]
    Topology(String),

    #[error("projection failed on element {element}: {message}")]
    ProjectionFailure { element: usize, message: String },

    #[error("assembly failed: {0}")]
    Assembly(String),

    #[error("linear solve failed: {0}")]
    Solver(String),

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("internal error: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = VemError> = std::result::Result<T, E>;
