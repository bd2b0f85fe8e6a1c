use thiserror::Error;

/// Errors produced while building or evaluating an approximant.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("point ({x}, {y}, {z}) is not covered by any patch")]
    NotCovered { x: f64, y: f64, z: f64 },

    #[error("points not covered by any patch: {indices:?}")]
    UncoveredPoints { indices: Vec<usize> },

    #[error("patch overlap graph is disconnected ({components} components)")]
    Disconnected { components: usize },

    #[error("cholesky factorization failed for patch {patch} (n = {size}, eigenvalue range [{min_eig:e}, {max_eig:e}])")]
    Factorization {
        patch: usize,
        size: usize,
        min_eig: f64,
        max_eig: f64,
    },

    #[error("shift system factorization failed: {0}")]
    ShiftSolve(String),

    #[error("global fit refused: {n} nodes exceeds the dense limit of {limit}")]
    TooLarge { n: usize, limit: usize },

    #[error("rate fit needs at least 3 distinct N values, got {0}")]
    TooFewPoints(usize),

    #[error("{stage}: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Wraps the error with the name of the stage that produced it.
    pub fn at(self, stage: impl Into<String>) -> Error {
        Error::Stage {
            stage: stage.into(),
            source: Box::new(self),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
