//! The billiard map and its derivatives.
//!
//! Phase space is the boundary cylinder: a point is `(s, phi)` with `s` the
//! arclength position of an outgoing ray and `phi` in (0, pi) its angle
//! against the forward boundary tangent, measured counterclockwise (so the
//! ray always enters the domain, which lies left of the tangent).
//!
//! `next_collision` shoots the geodesic and finds the first boundary
//! crossing by marching a signed side-of-curve function, bracketing the sign
//! change and polishing with safeguarded secant steps. Corner hits and
//! grazing reflections abort the orbit; the map is left undefined there.
//!
//! Two independent derivative computations are provided for the three-bounce
//! return map: the Jacobi-field bounce product ([`d3_jacobi`]) and plain
//! central finite differences of `T^3` in `(s, phi)`
//! ([`d3_finite_difference`]). At a 3-periodic point the two are conjugate
//! linear maps, so their traces must agree.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::boundary::{BoundaryCurve, CORNER_TOLERANCE};
use crate::error::{Error, Result};
use crate::jacobi::{self, JacobiMatrix};
use crate::surface::{frame_components, geodesic_flow, rotate_tangent, Curvature, UnitTangent};

/// Exclusion radius around the launch point when searching for the next
/// crossing.
pub const TAU_MIN: f64 = 1e-9;

/// Outgoing angles closer than this to 0 or pi are treated as grazing.
pub const EPS_PHI: f64 = 1e-9;

/// Central-difference step for the finite-difference map Jacobian.
pub const FD_STEP: f64 = 1e-5;

/// A point of the boundary phase space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    /// Arclength position, taken mod the boundary length.
    pub s: f64,
    /// Outgoing angle in (0, pi).
    pub phi: f64,
}

impl PhasePoint {
    pub fn new(s: f64, phi: f64) -> PhasePoint {
        PhasePoint { s, phi }
    }

    /// Phase distance: hypot of the wrapped arclength difference and the
    /// angle difference, both at unit weight.
    pub fn distance(&self, other: &PhasePoint, period: f64) -> f64 {
        let mut ds = (self.s - other.s).rem_euclid(period);
        if ds > 0.5 * period {
            ds = period - ds;
        }
        ds.hypot(self.phi - other.phi)
    }
}

/// A finite bounce sequence.
///
/// `vertices[i]` and `angles[i]` describe the outgoing ray at the i-th
/// bounce; `sides[i]` is the geodesic chord from vertex `i` to vertex
/// `i + 1` (for a closed n-periodic orbit the last side returns to vertex 0).
/// `end` is the phase point after the final bounce, i.e. `T^n` of the start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Orbit {
    pub vertices: Vec<f64>,
    pub angles: Vec<f64>,
    pub sides: Vec<f64>,
    pub perimeter: f64,
    pub end: PhasePoint,
}

impl Orbit {
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn start(&self) -> PhasePoint {
        PhasePoint {
            s: self.vertices[0],
            phi: self.angles[0],
        }
    }

    /// Phase distance between `T^n(start)` and the start itself.
    pub fn closure_error(&self, period: f64) -> f64 {
        self.start().distance(&self.end, period)
    }
}

/// The outgoing ray of a phase point: the boundary tangent rotated by `phi`
/// into the domain.
pub fn launch(b: &BoundaryCurve, p: &PhasePoint) -> Result<UnitTangent> {
    if !(p.phi > EPS_PHI && p.phi < PI - EPS_PHI) {
        return Err(Error::GrazingReflection { phi: p.phi });
    }
    let frame = b.tangent_at(p.s)?;
    Ok(rotate_tangent(&frame, p.phi))
}

/// One application of the billiard map.
///
/// Returns the next phase point and the geodesic length of the chord.
pub fn next_collision(b: &BoundaryCurve, p: &PhasePoint) -> Result<(PhasePoint, f64)> {
    let ray = launch(b, p)?;
    let (tau, hit) = first_crossing(b, &ray)?;
    let (s_new, piece, t) = b
        .locate_on_piece(hit.base())
        .map_err(|_| Error::NoIntersection)?;
    if b.corner_distance(s_new) < CORNER_TOLERANCE {
        return Err(Error::CornerHit { s: s_new });
    }
    let frame = b.piece_frame(piece, t)?;
    let (along, out) = frame_components(&frame, hit.dir());
    // reflect: flip the normal component; the outgoing angle of the
    // reflected ray equals the angle of incidence
    let phi_new = (-out).atan2(along);
    if !(phi_new > EPS_PHI && phi_new < PI - EPS_PHI) {
        return Err(Error::GrazingReflection { phi: phi_new });
    }
    Ok((
        PhasePoint {
            s: s_new,
            phi: phi_new,
        },
        tau,
    ))
}

/// First boundary crossing of a ray launched from the boundary.
///
/// Marches the signed side function in steps of `min(length/64, 0.05)`,
/// brackets the first sign change, then polishes by bisection plus
/// safeguarded secant steps until the bracket is below 1e-13. The launch
/// point itself is excluded by [`TAU_MIN`]; the start side value is treated
/// as positive regardless of roundoff, since a non-grazing ray enters the
/// domain by construction.
///
/// On the sphere geodesics close after 2*pi, so the search stops there and
/// reports [`Error::NoIntersection`]; elsewhere chords are bounded by half
/// the boundary length.
fn first_crossing(b: &BoundaryCurve, ray: &UnitTangent) -> Result<(f64, UnitTangent)> {
    let g = |tau: f64| b.side_value(geodesic_flow(ray, tau).base());
    let step = (b.total_length() / 64.0).min(0.05);
    let tau_max = match b.curvature() {
        Curvature::Spherical => 2.0 * PI - TAU_MIN,
        _ => 0.5 * b.total_length() + 2.0 * step,
    };

    let mut lo = TAU_MIN;
    let mut hi = None;
    let mut k = 1usize;
    loop {
        let tau = (k as f64) * step;
        if tau >= tau_max {
            if g(tau_max) <= 0.0 {
                hi = Some(tau_max);
            }
            break;
        }
        if g(tau) <= 0.0 {
            hi = Some(tau);
            break;
        }
        lo = tau;
        k += 1;
    }
    let mut hi = hi.ok_or(Error::NoIntersection)?;

    // Bisect first: robust even while the left value is only known by sign.
    for _ in 0..18 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // Secant (Newton with difference-quotient slope) inside the bracket.
    let mut f_lo = g(lo);
    let mut f_hi = g(hi);
    if f_lo <= 0.0 {
        // the crossing collapsed onto the launch exclusion zone: the chord
        // is at the tau_min scale, which only a grazing ray produces
        return Err(Error::GrazingReflection { phi: f64::NAN });
    }
    for _ in 0..40 {
        if hi - lo <= 1e-13 {
            break;
        }
        let mut t = hi - f_hi * (hi - lo) / (f_hi - f_lo);
        if !(t > lo && t < hi) {
            t = 0.5 * (lo + hi);
        }
        let ft = g(t);
        if ft > 0.0 {
            lo = t;
            f_lo = ft;
        } else {
            hi = t;
            f_hi = ft;
        }
    }
    let tau = if f_hi != f_lo {
        ((lo * f_hi - hi * f_lo) / (f_hi - f_lo)).clamp(lo, hi)
    } else {
        0.5 * (lo + hi)
    };
    Ok((tau, geodesic_flow(ray, tau)))
}

/// Iterate the billiard map `n` times, accumulating the orbit.
///
/// Collision errors are propagated with the index of the failing bounce.
pub fn iterate(b: &BoundaryCurve, start: &PhasePoint, n: usize) -> Result<Orbit> {
    assert!(n >= 1, "iterate needs at least one bounce");
    let mut vertices = Vec::with_capacity(n);
    let mut angles = Vec::with_capacity(n);
    let mut sides = Vec::with_capacity(n);
    let mut p = *start;
    for bounce in 0..n {
        vertices.push(p.s);
        angles.push(p.phi);
        let (next, tau) = next_collision(b, &p).map_err(|e| e.at_bounce(bounce))?;
        sides.push(tau);
        p = next;
    }
    let perimeter = sides.iter().sum();
    Ok(Orbit {
        vertices,
        angles,
        sides,
        perimeter,
        end: p,
    })
}

/// Linearization of the three-bounce return map assembled from Jacobi
/// evolution and reflection factors, using the orbit's sides, angles and the
/// boundary curvature at its vertices.
pub fn d3_jacobi(b: &BoundaryCurve, orbit: &Orbit) -> Result<JacobiMatrix> {
    assert_eq!(orbit.len(), 3, "d3_jacobi needs a 3-bounce orbit");
    let k = [
        b.geodesic_curvature(orbit.vertices[0])?,
        b.geodesic_curvature(orbit.vertices[1])?,
        b.geodesic_curvature(orbit.vertices[2])?,
    ];
    // sides[0] joins vertices 0 -> 1 (the product's x), sides[1] joins
    // 1 -> 2 (z), sides[2] closes 2 -> 0 (y)
    jacobi::three_bounce_product(
        b.curvature(),
        orbit.sides[0],
        orbit.sides[2],
        orbit.sides[1],
        [orbit.angles[0], orbit.angles[1], orbit.angles[2]],
        k,
    )
}

/// Central finite-difference Jacobian of `T^n` in the `(s, phi)` chart.
///
/// The determinant of this matrix equals sin(phi_in)/sin(phi_out), which is
/// the coordinate expression of the invariance of sin(phi) dphi ds.
pub fn dn_finite_difference(b: &BoundaryCurve, p: &PhasePoint, n: usize) -> Result<JacobiMatrix> {
    let h = FD_STEP;
    let period = b.total_length();
    let map = |q: PhasePoint| -> Result<PhasePoint> { iterate(b, &q, n).map(|o| o.end) };
    let sp = map(PhasePoint::new(p.s + h, p.phi))?;
    let sm = map(PhasePoint::new(p.s - h, p.phi))?;
    let pp = map(PhasePoint::new(p.s, p.phi + h))?;
    let pm = map(PhasePoint::new(p.s, p.phi - h))?;
    let wrap = |d: f64| {
        let w = d.rem_euclid(period);
        if w > 0.5 * period {
            w - period
        } else {
            w
        }
    };
    Ok(JacobiMatrix::new(
        wrap(sp.s - sm.s) / (2.0 * h),
        wrap(pp.s - pm.s) / (2.0 * h),
        (sp.phi - sm.phi) / (2.0 * h),
        (pp.phi - pm.phi) / (2.0 * h),
    ))
}

/// Finite-difference Jacobian of the three-bounce map; the independent
/// oracle for [`d3_jacobi`].
pub fn d3_finite_difference(b: &BoundaryCurve, p: &PhasePoint) -> Result<JacobiMatrix> {
    dn_finite_difference(b, p, 3)
}

/// Transversal Jacobi amplitude excited by a pure arclength variation of a
/// bounce point: J = sin(phi) * ds.
///
/// Only the amplitude row of the phase-to-Jacobi conjugation is pinned down
/// by the geometry; this helper is validated against finite differences of
/// the flow and is not used by the derivative assembly itself.
pub fn transversal_amplitude(phi: f64, ds: f64) -> f64 {
    phi.sin() * ds
}
