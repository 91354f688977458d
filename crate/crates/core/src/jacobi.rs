//! Jacobi-field linear algebra.
//!
//! A transversal Jacobi field along a geodesic on a surface of constant
//! curvature k satisfies J'' + k J = 0. The pair (J, J') therefore evolves
//! linearly: along a free segment of length tau by the fundamental solution
//! matrix `evolution(k, tau)`, and across a boundary reflection by the mirror
//! map `reflection(k_g, phi)`. Chaining those factors around a closed orbit
//! gives the linearization of the return map.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::surface::Curvature;

/// A real 2x2 matrix acting on the column (J, J').
///
/// Every matrix built by the constructors in this module has determinant 1
/// (up to roundoff): evolution and reflection factors are unimodular, and
/// products of such factors stay unimodular.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JacobiMatrix {
    /// Row-major entries: `e[row][col]`.
    pub e: [[f64; 2]; 2],
}

impl JacobiMatrix {
    pub const IDENTITY: JacobiMatrix = JacobiMatrix {
        e: [[1.0, 0.0], [0.0, 1.0]],
    };

    pub fn new(a: f64, b: f64, c: f64, d: f64) -> JacobiMatrix {
        JacobiMatrix { e: [[a, b], [c, d]] }
    }

    pub fn det(&self) -> f64 {
        self.e[0][0] * self.e[1][1] - self.e[0][1] * self.e[1][0]
    }

    pub fn trace(&self) -> f64 {
        self.e[0][0] + self.e[1][1]
    }

    pub fn top_right(&self) -> f64 {
        self.e[0][1]
    }

    /// True matrix inverse (divides by the determinant, so it stays correct
    /// for the deliberately non-unimodular debug variants).
    pub fn inverse(&self) -> JacobiMatrix {
        let d = self.det();
        JacobiMatrix::new(
            self.e[1][1] / d,
            -self.e[0][1] / d,
            -self.e[1][0] / d,
            self.e[0][0] / d,
        )
    }

    /// Largest absolute entry difference to another matrix.
    pub fn max_abs_diff(&self, other: &JacobiMatrix) -> f64 {
        let mut m = 0.0f64;
        for r in 0..2 {
            for c in 0..2 {
                m = m.max((self.e[r][c] - other.e[r][c]).abs());
            }
        }
        m
    }
}

impl std::ops::Mul for JacobiMatrix {
    type Output = JacobiMatrix;

    fn mul(self, rhs: JacobiMatrix) -> JacobiMatrix {
        let a = &self.e;
        let b = &rhs.e;
        JacobiMatrix {
            e: [
                [
                    a[0][0] * b[0][0] + a[0][1] * b[1][0],
                    a[0][0] * b[0][1] + a[0][1] * b[1][1],
                ],
                [
                    a[1][0] * b[0][0] + a[1][1] * b[1][0],
                    a[1][0] * b[0][1] + a[1][1] * b[1][1],
                ],
            ],
        }
    }
}

/// Fundamental solution matrix of J'' + k J = 0 over arclength `tau`,
/// propagating the column (J, J').
///
/// E^2: [[1, tau], [0, 1]];
/// H^2: [[cosh, sinh], [sinh, cosh]];
/// S^2: [[cos, sin], [-sin, cos]].
pub fn evolution(curvature: Curvature, tau: f64) -> JacobiMatrix {
    match curvature {
        Curvature::Euclidean => JacobiMatrix::new(1.0, tau, 0.0, 1.0),
        Curvature::Hyperbolic => {
            let (s, c) = (tau.sinh(), tau.cosh());
            JacobiMatrix::new(c, s, s, c)
        }
        Curvature::Spherical => {
            let (s, c) = tau.sin_cos();
            JacobiMatrix::new(c, s, -s, c)
        }
    }
}

/// Deliberately wrong spherical evolution matrix with the lower-left sign
/// flipped: [[cos, sin], [sin, cos]].
///
/// This is not a solution matrix of J'' + J = 0 (its determinant is
/// cos(2 tau), not 1). It exists only as a known-bad control for the
/// verification battery, which must detect that it breaks the top-right
/// entry identity.
pub fn evolution_s2_unsigned(tau: f64) -> JacobiMatrix {
    let (s, c) = tau.sin_cos();
    JacobiMatrix::new(c, s, s, c)
}

/// Reflection (mirror) matrix at a bounce with geodesic curvature `k_g` and
/// outgoing angle `phi`: [[-1, 0], [2 k_g / sin(phi), -1]].
pub fn reflection(k_g: f64, phi: f64) -> Result<JacobiMatrix> {
    let s = phi.sin();
    if s <= 1e-12 {
        return Err(Error::GrazingReflection { phi });
    }
    Ok(JacobiMatrix::new(-1.0, 0.0, 2.0 * k_g / s, -1.0))
}

/// The compatibility-relation length factor F(L): 2/L on E^2, coth(L/2) on
/// H^2, cot(L/2) on S^2.
///
/// On the sphere F has poles where sin(L/2) = 0, i.e. at multiples of 2*pi.
pub fn f_of_l(curvature: Curvature, length: f64) -> Result<f64> {
    debug_assert!(length > 0.0, "orbit length must be positive");
    match curvature {
        Curvature::Euclidean => Ok(2.0 / length),
        Curvature::Hyperbolic => Ok(1.0 / (0.5 * length).tanh()),
        Curvature::Spherical => {
            let half = 0.5 * length;
            if half.sin().abs() < 1e-12 {
                return Err(Error::SphericalPole { length });
            }
            Ok(half.cos() / half.sin())
        }
    }
}

/// One bounce step of the return-map linearization seen just before hitting
/// vertex `i`: reflect there, then propagate the outgoing side.
#[derive(Debug, Clone, Copy)]
pub struct Bounce {
    /// Geodesic curvature of the boundary at the vertex.
    pub k_g: f64,
    /// Outgoing angle at the vertex.
    pub phi: f64,
    /// Length of the side leaving the vertex.
    pub side: f64,
}

/// Fold evolution and reflection factors around a closed bounce sequence.
///
/// `bounces[0]` is applied first; the result is the linearization of the
/// n-bounce return map on (J, J') based just before the first reflection:
/// P(side_{n-1}) R(n-1) ... P(side_0) R(0).
///
/// Generic plumbing for any period; only the three-bounce case is wired to
/// the rest of the crate.
pub fn bounce_product(curvature: Curvature, bounces: &[Bounce]) -> Result<JacobiMatrix> {
    let mut m = JacobiMatrix::IDENTITY;
    for b in bounces {
        m = evolution(curvature, b.side) * reflection(b.k_g, b.phi)? * m;
    }
    Ok(m)
}

/// The six-factor linearization of the three-bounce return map,
/// P(z) R(x1) P(x) R(x0) P(y) R(x2), where side `y` joins vertex 2 to
/// vertex 0, `x` joins vertex 0 to vertex 1 and `z` joins vertex 1 to
/// vertex 2.
///
/// `phi` and `k_g` hold the outgoing angles and boundary curvatures at
/// vertices 0, 1, 2.
#[allow(clippy::too_many_arguments)]
pub fn three_bounce_product(
    curvature: Curvature,
    x: f64,
    y: f64,
    z: f64,
    phi: [f64; 3],
    k_g: [f64; 3],
) -> Result<JacobiMatrix> {
    debug_assert!(x > 0.0 && y > 0.0 && z > 0.0, "side lengths must be positive");
    bounce_product(
        curvature,
        &[
            Bounce { k_g: k_g[2], phi: phi[2], side: y },
            Bounce { k_g: k_g[0], phi: phi[0], side: x },
            Bounce { k_g: k_g[1], phi: phi[1], side: z },
        ],
    )
}

/// Which spherical evolution matrix the identity check should use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EvolutionVariant {
    #[default]
    Standard,
    /// The known-bad symmetric S^2 matrix, for the self-test battery.
    UnsignedS2,
}

fn evolution_with(variant: EvolutionVariant, curvature: Curvature, tau: f64) -> JacobiMatrix {
    match (variant, curvature) {
        (EvolutionVariant::UnsignedS2, Curvature::Spherical) => evolution_s2_unsigned(tau),
        _ => evolution(curvature, tau),
    }
}

/// Both sides of the top-right entry identity for the three-bounce product.
///
/// Returns `(matrix_gap, closed_form)` where
/// `matrix_gap` = top-right of P(z) R(x1) P(x) minus top-right of
/// R(x2)^-1 P(y)^-1 R(x0)^-1, and
/// `closed_form` = 2 k_1 S(x) S(z) / sin(phi_1) - [S(x+z) - S(y)]
/// with S = sinh on H^2 and S = sin on S^2 (and S(t) = t on E^2, where the
/// bracket reduces to x + z - y).
///
/// The two agree identically for the standard evolution matrices; under the
/// unsigned S^2 variant the inverse side changes and the identity fails,
/// which is exactly what the verification battery checks.
#[allow(clippy::too_many_arguments)]
pub fn top_right_identity(
    curvature: Curvature,
    x: f64,
    y: f64,
    z: f64,
    phi: [f64; 3],
    k_g: [f64; 3],
    variant: EvolutionVariant,
) -> Result<(f64, f64)> {
    let ev = |tau: f64| evolution_with(variant, curvature, tau);
    let lhs = ev(z) * reflection(k_g[1], phi[1])? * ev(x);
    let rhs = reflection(k_g[2], phi[2])?.inverse()
        * ev(y).inverse()
        * reflection(k_g[0], phi[0])?.inverse();
    let gap = lhs.top_right() - rhs.top_right();

    let s = |t: f64| match curvature {
        Curvature::Euclidean => t,
        Curvature::Hyperbolic => t.sinh(),
        Curvature::Spherical => t.sin(),
    };
    let closed = 2.0 * k_g[1] * s(x) * s(z) / phi[1].sin() - (s(x + z) - s(y));
    Ok((gap, closed))
}
