use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh parameter: {0}")]
    InvalidMesh(String),

    #[error("edge {0} is a boundary edge")]
    BoundaryEdge(usize),

    #[error("singular local saddle system on element {element}")]
    SingularLocal { element: usize },

    #[error("singular BSM degree-of-freedom matrix (k = {k}, min singular value {sigma_min:e})")]
    SingularBsm { k: usize, sigma_min: f64 },

    #[error("global system is not positive definite")]
    NotPositiveDefinite,

    #[error("singular global system: {0}")]
    SingularGlobal(String),

    #[error("N sequence must strictly double, got {0:?}")]
    NonDoubling(Vec<usize>),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
