//! Error type shared by the whole crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("operands live on surfaces of different curvature")]
    CurvatureMismatch,

    #[error("tangent vectors based at different points (separation {gap:.3e})")]
    BasePointMismatch { gap: f64 },

    /// The queried arclength (or a computed collision) falls inside the
    /// corner tolerance band of a boundary corner. The billiard map is not
    /// defined there; orbits terminate.
    #[error("boundary corner within tolerance of s = {s}")]
    CornerHit { s: f64 },

    /// Reflection with sin(phi) below the grazing threshold.
    #[error("grazing reflection (phi = {phi:.6e})")]
    GrazingReflection { phi: f64 },

    /// The chord search exhausted its range without a boundary crossing.
    /// On a valid table this indicates a configuration error.
    #[error("no boundary intersection found")]
    NoIntersection,

    /// cot(L/2) pole on the sphere: L is a multiple of 2*pi.
    #[error("F(L) pole on the sphere at L = {length}")]
    SphericalPole { length: f64 },

    #[error("vertices {i} and {j} coincide")]
    CoincidentVertices { i: usize, j: usize },

    /// A collision error wrapped with the index of the bounce that failed.
    #[error("bounce {bounce}: {source}")]
    AtBounce {
        bounce: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Wrap this error with the index of the bounce it occurred at.
    pub fn at_bounce(self, bounce: usize) -> Error {
        Error::AtBounce {
            bounce,
            source: Box::new(self),
        }
    }

    /// Strip any `AtBounce` wrappers and return the underlying error.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtBounce { source, .. } => source.root(),
            other => other,
        }
    }

    pub fn is_corner(&self) -> bool {
        matches!(self.root(), Error::CornerHit { .. })
    }

    pub fn is_grazing(&self) -> bool {
        matches!(self.root(), Error::GrazingReflection { .. })
    }
}
