//! Billiard dynamics on the three constant-curvature model surfaces: the
//! Euclidean plane, the unit sphere and the hyperbolic plane.
//!
//! The crate provides
//!
//! - a geometry kernel with closed-form geodesics ([`surface`]),
//! - closed billiard boundary curves with arclength parametrization and
//!   geodesic curvature, including the built-in table families ([`boundary`]),
//! - Jacobi-field evolution and reflection matrices and the bounce-product
//!   linearization of the return map ([`jacobi`]),
//! - the billiard map itself plus two independent derivative computations
//!   ([`billiard`]),
//! - a variational finder for 3-period orbits and the compatibility relation
//!   `k_g = sin^3(phi) F(L)` ([`periodic`]),
//! - Monte Carlo estimates of the invariant-measure fraction of
//!   near-periodic phase points ([`measure`]).

pub mod billiard;
pub mod boundary;
pub mod error;
pub mod jacobi;
pub mod measure;
pub mod periodic;
pub mod surface;

pub(crate) mod vec3;

pub use billiard::{Orbit, PhasePoint};
pub use boundary::{BoundaryCurve, FamilyDescriptor};
pub use error::{Error, Result};
pub use jacobi::JacobiMatrix;
pub use measure::MeasureScan;
pub use periodic::{CompatibilityReport, FoundOrbit, OrbitClass};
pub use surface::{Curvature, SurfacePoint, UnitTangent};
