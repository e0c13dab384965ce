use thiserror::Error;

use crate::lattice::SiteCoord;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("lattice edge {edge} must be a power of two and at least {min}")]
    BadEdge { edge: usize, min: usize },

    #[error("concentration {0} is outside [0, 1]")]
    BadConcentration(f64),

    #[error("site {0:?} is not on the fcc sublattice")]
    InvalidParity(SiteCoord),

    #[error("site {0:?} lies outside the lattice")]
    OutOfRange(SiteCoord),

    #[error("slope field is not integrable: {0}")]
    Closure(String),

    #[error("no B particles on the lattice")]
    NoParticles,

    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("operation requires the {required} generator, stream is {actual}")]
    UnsupportedGenerator {
        required: &'static str,
        actual: &'static str,
    },

    #[error("invalid parameter: {0}")]
    Param(String),

    #[error("invariant violated: {0}")]
    Invariant(String),
}
