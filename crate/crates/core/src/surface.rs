//! Geometry kernel for the three constant-curvature model surfaces.
//!
//! Model choices: the Euclidean plane as R^2, the sphere as the unit sphere
//! in R^3, and the hyperbolic plane as the upper sheet of the hyperboloid
//! <p,p> = -1 in Minkowski 3-space (signature (-,+,+)). In these models
//! geodesics and parallel transport are closed-form, so orbit iteration never
//! integrates an ODE and never meets a chart singularity.
//!
//! All operations are pure functions on immutable values. Points and tangents
//! are renormalized onto their constraint surface after every flow step to
//! stop drift from accumulating over long orbits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vec3::{self, V3};

/// Surface curvature tag. Only the three unit-scale values exist.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "i8", into = "i8")]
pub enum Curvature {
    Hyperbolic,
    Euclidean,
    Spherical,
}

impl Curvature {
    /// The curvature value as a real number: -1, 0 or +1.
    pub fn kappa(self) -> f64 {
        match self {
            Curvature::Hyperbolic => -1.0,
            Curvature::Euclidean => 0.0,
            Curvature::Spherical => 1.0,
        }
    }

    pub const ALL: [Curvature; 3] = [
        Curvature::Hyperbolic,
        Curvature::Euclidean,
        Curvature::Spherical,
    ];
}

impl TryFrom<i8> for Curvature {
    type Error = Error;

    fn try_from(k: i8) -> Result<Self> {
        match k {
            -1 => Ok(Curvature::Hyperbolic),
            0 => Ok(Curvature::Euclidean),
            1 => Ok(Curvature::Spherical),
            _ => Err(Error::InvalidParameter(format!(
                "curvature must be -1, 0 or +1, got {k}"
            ))),
        }
    }
}

impl From<Curvature> for i8 {
    fn from(c: Curvature) -> i8 {
        c.kappa() as i8
    }
}

impl std::fmt::Display for Curvature {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Curvature::Hyperbolic => "H2",
            Curvature::Euclidean => "E2",
            Curvature::Spherical => "S2",
        };
        write!(f, "{name}")
    }
}

/// A point on one of the model surfaces, stored in ambient coordinates.
///
/// E^2 uses `(x, y, 0)`; S^2 stores a Euclidean unit vector; H^2 stores a
/// point of the upper hyperboloid sheet (`<p,p> = -1`, `x0 >= 1`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfacePoint {
    curvature: Curvature,
    coords: V3,
}

impl SurfacePoint {
    pub fn euclidean(x: f64, y: f64) -> SurfacePoint {
        SurfacePoint {
            curvature: Curvature::Euclidean,
            coords: [x, y, 0.0],
        }
    }

    /// Point on the unit sphere; the input is normalized.
    pub fn spherical(x: f64, y: f64, z: f64) -> Result<SurfacePoint> {
        let n = vec3::norm([x, y, z]);
        if n < 1e-12 {
            return Err(Error::InvalidParameter(
                "spherical point too close to the origin to normalize".into(),
            ));
        }
        Ok(SurfacePoint {
            curvature: Curvature::Spherical,
            coords: vec3::scale([x, y, z], 1.0 / n),
        })
    }

    /// Point on the upper hyperboloid sheet; the input is rescaled onto
    /// `<p,p> = -1` and must satisfy `<p,p> < 0`, `x0 > 0`.
    pub fn hyperbolic(x0: f64, x1: f64, x2: f64) -> Result<SurfacePoint> {
        let p = [x0, x1, x2];
        let q = vec3::mdot(p, p);
        if q >= 0.0 || x0 <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "({x0}, {x1}, {x2}) is not on the upper hyperboloid sheet"
            )));
        }
        Ok(SurfacePoint {
            curvature: Curvature::Hyperbolic,
            coords: vec3::scale(p, 1.0 / (-q).sqrt()),
        })
    }

    pub fn curvature(&self) -> Curvature {
        self.curvature
    }

    /// Ambient coordinates: `(x, y, 0)` on E^2, the embedding vector otherwise.
    pub fn coords(&self) -> V3 {
        self.coords
    }

    /// How far the point has drifted off its constraint surface.
    pub fn constraint_residual(&self) -> f64 {
        match self.curvature {
            Curvature::Euclidean => self.coords[2].abs(),
            Curvature::Spherical => (vec3::norm(self.coords) - 1.0).abs(),
            Curvature::Hyperbolic => (vec3::mdot(self.coords, self.coords) + 1.0).abs(),
        }
    }

    /// Pull the point back onto its constraint surface.
    fn renormalized(mut self) -> SurfacePoint {
        match self.curvature {
            Curvature::Euclidean => self.coords[2] = 0.0,
            Curvature::Spherical => {
                self.coords = vec3::scale(self.coords, 1.0 / vec3::norm(self.coords));
            }
            Curvature::Hyperbolic => {
                let q = -vec3::mdot(self.coords, self.coords);
                self.coords = vec3::scale(self.coords, 1.0 / q.sqrt());
                if self.coords[0] < 0.0 {
                    self.coords = vec3::scale(self.coords, -1.0);
                }
            }
        }
        self
    }
}

/// Inner product of the relevant ambient metric: Euclidean for E^2 and S^2,
/// Minkowski for H^2. Restricted to tangent vectors this is the surface
/// metric in all three cases.
pub(crate) fn metric_dot(curvature: Curvature, a: V3, b: V3) -> f64 {
    match curvature {
        Curvature::Hyperbolic => vec3::mdot(a, b),
        _ => vec3::dot(a, b),
    }
}

/// A unit tangent vector: a base point plus a metric-unit direction in the
/// tangent space at that point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitTangent {
    base: SurfacePoint,
    dir: V3,
}

impl UnitTangent {
    /// Build a unit tangent at `base`, projecting `dir` onto the tangent
    /// space and normalizing. Fails if the projection is degenerate.
    pub fn new(base: SurfacePoint, dir: V3) -> Result<UnitTangent> {
        let dir = project_tangent(&base, dir);
        let n2 = metric_dot(base.curvature, dir, dir);
        if n2 < 1e-24 {
            return Err(Error::InvalidParameter(
                "tangent direction degenerate after projection".into(),
            ));
        }
        Ok(UnitTangent {
            base,
            dir: vec3::scale(dir, 1.0 / n2.sqrt()),
        })
    }

    pub fn base(&self) -> &SurfacePoint {
        &self.base
    }

    pub fn dir(&self) -> V3 {
        self.dir
    }

    pub fn curvature(&self) -> Curvature {
        self.base.curvature
    }

    /// The reversed tangent at the same base point.
    pub fn reversed(&self) -> UnitTangent {
        UnitTangent {
            base: self.base,
            dir: vec3::scale(self.dir, -1.0),
        }
    }

    /// How far the direction is from being a unit tangent.
    pub fn constraint_residual(&self) -> f64 {
        let unit = (metric_dot(self.curvature(), self.dir, self.dir) - 1.0).abs();
        let tang = match self.curvature() {
            Curvature::Euclidean => self.dir[2].abs(),
            Curvature::Spherical => vec3::dot(self.base.coords, self.dir).abs(),
            Curvature::Hyperbolic => vec3::mdot(self.base.coords, self.dir).abs(),
        };
        unit.max(tang).max(self.base.constraint_residual())
    }

    fn renormalized(self) -> UnitTangent {
        let base = self.base.renormalized();
        let dir = project_tangent(&base, self.dir);
        let n = metric_dot(base.curvature, dir, dir).sqrt();
        UnitTangent {
            base,
            dir: vec3::scale(dir, 1.0 / n),
        }
    }
}

/// Orthogonal projection of an ambient vector onto the tangent space at `p`.
fn project_tangent(p: &SurfacePoint, v: V3) -> V3 {
    match p.curvature {
        Curvature::Euclidean => [v[0], v[1], 0.0],
        Curvature::Spherical => vec3::lincomb(1.0, v, -vec3::dot(v, p.coords), p.coords),
        // <p,p> = -1, so the projection *adds* <v,p> p.
        Curvature::Hyperbolic => vec3::lincomb(1.0, v, vec3::mdot(v, p.coords), p.coords),
    }
}

/// Flow along the geodesic through `start` for arclength `tau` and parallel
/// transport the tangent. Closed form in all three geometries.
pub fn geodesic_flow(start: &UnitTangent, tau: f64) -> UnitTangent {
    let p = start.base.coords;
    let v = start.dir;
    let curvature = start.curvature();
    let (np, nv) = match curvature {
        Curvature::Euclidean => (vec3::lincomb(1.0, p, tau, v), v),
        Curvature::Spherical => {
            let (s, c) = tau.sin_cos();
            (vec3::lincomb(c, p, s, v), vec3::lincomb(-s, p, c, v))
        }
        Curvature::Hyperbolic => {
            let (s, c) = (tau.sinh(), tau.cosh());
            (vec3::lincomb(c, p, s, v), vec3::lincomb(s, p, c, v))
        }
    };
    UnitTangent {
        base: SurfacePoint {
            curvature,
            coords: np,
        },
        dir: nv,
    }
    .renormalized()
}

/// Geodesic distance between two points of the same surface.
///
/// On S^2 the value lies in [0, pi]. Evaluated through forms that stay
/// well-conditioned near coincident and antipodal pairs.
pub fn distance(p: &SurfacePoint, q: &SurfacePoint) -> f64 {
    assert_eq!(
        p.curvature, q.curvature,
        "distance between points of different curvature"
    );
    match p.curvature {
        Curvature::Euclidean => vec3::norm(vec3::sub(p.coords, q.coords)),
        Curvature::Spherical => {
            let c = vec3::cross(p.coords, q.coords);
            vec3::norm(c).atan2(vec3::dot(p.coords, q.coords))
        }
        Curvature::Hyperbolic => {
            // <p-q, p-q> = 2(cosh d - 1) = 4 sinh^2(d/2)
            let d = vec3::sub(p.coords, q.coords);
            let m2 = vec3::mdot(d, d).max(0.0);
            2.0 * (0.5 * m2.sqrt()).asinh()
        }
    }
}

/// Angle in [0, pi] between two unit tangents at the same base point.
pub fn angle_between(u: &UnitTangent, v: &UnitTangent) -> Result<f64> {
    if u.curvature() != v.curvature() {
        return Err(Error::CurvatureMismatch);
    }
    let gap = distance(&u.base, &v.base);
    if gap > 1e-9 {
        return Err(Error::BasePointMismatch { gap });
    }
    let c = metric_dot(u.curvature(), u.dir, v.dir);
    Ok(c.clamp(-1.0, 1.0).acos())
}

/// Side `y` opposite the included angle `theta` of a geodesic triangle with
/// adjacent sides `x` and `z`.
///
/// E^2: y^2 = x^2 + z^2 - 2xz cos(theta);
/// S^2: cos y = cos x cos z + sin x sin z cos(theta);
/// H^2: cosh y = cosh x cosh z - sinh x sinh z cos(theta).
pub fn law_of_cosines_side(x: f64, z: f64, theta: f64, curvature: Curvature) -> Result<f64> {
    if !(x > 0.0 && z > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "triangle sides must be positive, got x = {x}, z = {z}"
        )));
    }
    if !(theta > 0.0 && theta < std::f64::consts::PI) {
        return Err(Error::InvalidParameter(format!(
            "included angle must lie in (0, pi), got {theta}"
        )));
    }
    if curvature == Curvature::Spherical && !(x < std::f64::consts::PI && z < std::f64::consts::PI)
    {
        return Err(Error::InvalidParameter(format!(
            "spherical sides must be below pi, got x = {x}, z = {z}"
        )));
    }
    let ct = theta.cos();
    Ok(match curvature {
        Curvature::Euclidean => (x * x + z * z - 2.0 * x * z * ct).max(0.0).sqrt(),
        Curvature::Spherical => (x.cos() * z.cos() + x.sin() * z.sin() * ct)
            .clamp(-1.0, 1.0)
            .acos(),
        Curvature::Hyperbolic => (x.cosh() * z.cosh() - x.sinh() * z.sinh() * ct)
            .max(1.0)
            .acosh(),
    })
}

/// Unit tangent at `p` pointing along the geodesic toward `q`.
///
/// Fails for coincident points, and on S^2 for antipodal pairs, where the
/// direction is not defined.
pub fn direction_to(p: &SurfacePoint, q: &SurfacePoint) -> Result<UnitTangent> {
    if p.curvature != q.curvature {
        return Err(Error::CurvatureMismatch);
    }
    let v = match p.curvature {
        Curvature::Euclidean => vec3::sub(q.coords, p.coords),
        Curvature::Spherical => {
            vec3::lincomb(1.0, q.coords, -vec3::dot(p.coords, q.coords), p.coords)
        }
        Curvature::Hyperbolic => {
            vec3::lincomb(1.0, q.coords, vec3::mdot(p.coords, q.coords), p.coords)
        }
    };
    let n2 = metric_dot(p.curvature, v, v);
    if n2 < 1e-24 {
        return Err(Error::InvalidParameter(
            "chord direction degenerate (coincident or antipodal endpoints)".into(),
        ));
    }
    Ok(UnitTangent {
        base: *p,
        dir: vec3::scale(v, 1.0 / n2.sqrt()),
    })
}

/// The unit tangent 90 degrees counterclockwise from `u` at the same base.
///
/// "Counterclockwise" matches the boundary orientation convention: for a
/// boundary tangent this normal points into the billiard domain.
pub fn left_normal(u: &UnitTangent) -> UnitTangent {
    let n = match u.curvature() {
        Curvature::Euclidean => [-u.dir[1], u.dir[0], 0.0],
        Curvature::Spherical => vec3::cross(u.base.coords, u.dir),
        Curvature::Hyperbolic => vec3::mcross(u.base.coords, u.dir),
    };
    UnitTangent { base: u.base, dir: n }
}

/// Rotate a unit tangent counterclockwise by `angle` within its tangent plane.
pub fn rotate_tangent(u: &UnitTangent, angle: f64) -> UnitTangent {
    let n = left_normal(u);
    let (s, c) = angle.sin_cos();
    UnitTangent {
        base: u.base,
        dir: vec3::lincomb(c, u.dir, s, n.dir),
    }
    .renormalized()
}

/// Decompose an ambient vector `w` at the base of `frame` into components
/// along the frame tangent and its left normal.
pub(crate) fn frame_components(frame: &UnitTangent, w: V3) -> (f64, f64) {
    let n = left_normal(frame);
    (
        metric_dot(frame.curvature(), w, frame.dir),
        metric_dot(frame.curvature(), w, n.dir),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    /// Intrinsic mismatch of `v`'s direction measured in the orthonormal
    /// frame of `u`. Resolves tiny misalignments that the arccos in
    /// `angle_between` cannot, and stays meaningful for hyperboloid points
    /// with large ambient coordinates.
    fn dir_gap(u: &UnitTangent, v: &UnitTangent) -> f64 {
        let along = metric_dot(u.curvature(), v.dir(), u.dir()) - 1.0;
        let perp = metric_dot(u.curvature(), v.dir(), left_normal(u).dir());
        along.hypot(perp)
    }

    fn random_point(rng: &mut ChaCha8Rng, curvature: Curvature) -> SurfacePoint {
        match curvature {
            Curvature::Euclidean => SurfacePoint::euclidean(
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
            ),
            Curvature::Spherical => SurfacePoint::spherical(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            )
            .unwrap(),
            Curvature::Hyperbolic => {
                let x1: f64 = rng.random_range(-2.0..2.0);
                let x2: f64 = rng.random_range(-2.0..2.0);
                let x0 = (1.0 + x1 * x1 + x2 * x2).sqrt();
                SurfacePoint::hyperbolic(x0, x1, x2).unwrap()
            }
        }
    }

    pub(crate) fn random_tangent(rng: &mut ChaCha8Rng, curvature: Curvature) -> UnitTangent {
        let base = random_point(rng, curvature);
        loop {
            let dir = [
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            ];
            if let Ok(u) = UnitTangent::new(base, dir) {
                return u;
            }
        }
    }

    #[test]
    fn flow_identity_at_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for curvature in Curvature::ALL {
            let u = random_tangent(&mut rng, curvature);
            let v = geodesic_flow(&u, 0.0);
            assert!(distance(v.base(), u.base()) < 1e-14);
            assert!(dir_gap(&u, &v) < 1e-12);
        }
    }

    #[test]
    fn flow_quarter_turn_on_sphere() {
        let p = SurfacePoint::spherical(1.0, 0.0, 0.0).unwrap();
        let u = UnitTangent::new(p, [0.0, 1.0, 0.0]).unwrap();
        let v = geodesic_flow(&u, PI / 2.0);
        let c = v.base().coords();
        assert!((c[0]).abs() < 1e-15 && (c[1] - 1.0).abs() < 1e-15 && c[2].abs() < 1e-15);
        let d = v.dir();
        assert!((d[0] + 1.0).abs() < 1e-15 && d[1].abs() < 1e-15 && d[2].abs() < 1e-15);
    }

    #[test]
    fn flow_unit_step_on_hyperboloid() {
        let p = SurfacePoint::hyperbolic(1.0, 0.0, 0.0).unwrap();
        let u = UnitTangent::new(p, [0.0, 1.0, 0.0]).unwrap();
        let v = geodesic_flow(&u, 1.0);
        let c = v.base().coords();
        assert!((c[0] - 1.0f64.cosh()).abs() < 1e-12);
        assert!((c[1] - 1.0f64.sinh()).abs() < 1e-12);
        assert!(c[2].abs() < 1e-15);
        // inverse of the flow example: distance recovers tau
        assert!((distance(&p, v.base()) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn flow_composition_matches_single_flow() {
        // Direction agreement is checked operationally: both routes continue
        // by a further unit leg and their endpoints must still coincide.
        // Hyperbolic bases are drawn at table scale; ambient hyperboloid
        // coordinates grow like cosh of the excursion, and frame-component
        // comparisons at such coordinates bottom out near sqrt(eps).
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for curvature in Curvature::ALL {
            for _ in 0..200 {
                let u = match curvature {
                    Curvature::Hyperbolic => {
                        let x1: f64 = rng.random_range(-0.7..0.7);
                        let x2: f64 = rng.random_range(-0.7..0.7);
                        let base =
                            SurfacePoint::hyperbolic((1.0 + x1 * x1 + x2 * x2).sqrt(), x1, x2)
                                .unwrap();
                        loop {
                            let dir = [
                                rng.random_range(-1.0..1.0),
                                rng.random_range(-1.0..1.0),
                                rng.random_range(-1.0..1.0),
                            ];
                            if let Ok(u) = UnitTangent::new(base, dir) {
                                break u;
                            }
                        }
                    }
                    _ => random_tangent(&mut rng, curvature),
                };
                let (mut a, mut b) = (rng.random_range(0.0..3.0), rng.random_range(0.0..3.0));
                if curvature == Curvature::Spherical {
                    a *= 0.9;
                    b *= 0.9;
                }
                let two = geodesic_flow(&geodesic_flow(&u, a), b);
                let one = geodesic_flow(&u, a + b);
                assert!(distance(two.base(), one.base()) < 1e-10);
                let two_on = geodesic_flow(&two, 1.0);
                let one_on = geodesic_flow(&one, 1.0);
                assert!(
                    distance(two_on.base(), one_on.base()) < 1e-10,
                    "{curvature}: transported directions disagree"
                );
            }
        }
    }

    #[test]
    fn flow_distance_consistency() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for curvature in Curvature::ALL {
            for _ in 0..200 {
                let u = random_tangent(&mut rng, curvature);
                let tau = match curvature {
                    Curvature::Spherical => rng.random_range(0.0..3.0),
                    _ => rng.random_range(0.0..4.0),
                };
                let v = geodesic_flow(&u, tau);
                assert!(
                    (distance(u.base(), v.base()) - tau).abs() < 1e-10,
                    "{curvature}: flow by {tau} did not advance distance {tau}"
                );
            }
        }
    }

    #[test]
    fn distance_trivial_and_antipodal() {
        let p = SurfacePoint::spherical(1.0, 0.0, 0.0).unwrap();
        assert_eq!(distance(&p, &p), 0.0);
        let q = SurfacePoint::spherical(-1.0, 0.0, 0.0).unwrap();
        assert!((distance(&p, &q) - PI).abs() < 1e-15);
        let e = SurfacePoint::euclidean(0.3, -0.4);
        assert_eq!(distance(&e, &e), 0.0);
    }

    #[test]
    fn angle_between_cases() {
        let p = SurfacePoint::spherical(0.0, 0.0, 1.0).unwrap();
        let u = UnitTangent::new(p, [1.0, 0.0, 0.0]).unwrap();
        let v = UnitTangent::new(p, [0.0, 1.0, 0.0]).unwrap();
        assert!(angle_between(&u, &u).unwrap() < 1e-15);
        assert!((angle_between(&u, &v).unwrap() - PI / 2.0).abs() < 1e-15);
        assert!((angle_between(&u, &u.reversed()).unwrap() - PI).abs() < 1e-15);

        let q = SurfacePoint::spherical(0.1, 0.0, 1.0).unwrap();
        let w = UnitTangent::new(q, [1.0, 0.0, 0.0]).unwrap();
        assert!(matches!(
            angle_between(&u, &w),
            Err(Error::BasePointMismatch { .. })
        ));
    }

    #[test]
    fn law_of_cosines_spot_values() {
        // Pythagorean triangle in the plane
        let y = law_of_cosines_side(3.0, 4.0, PI / 2.0, Curvature::Euclidean).unwrap();
        assert!((y - 5.0).abs() < 1e-12);
        // octant equilateral right triangle on the sphere
        let y = law_of_cosines_side(PI / 2.0, PI / 2.0, PI / 2.0, Curvature::Spherical).unwrap();
        assert!((y - PI / 2.0).abs() < 1e-12);
        // hyperbolic right triangle with legs 1
        let y = law_of_cosines_side(1.0, 1.0, PI / 2.0, Curvature::Hyperbolic).unwrap();
        let expect = (1.0f64.cosh() * 1.0f64.cosh()).acosh();
        assert!((y - expect).abs() < 1e-12);
        assert!((expect - 1.5133740).abs() < 1e-6);

        assert!(law_of_cosines_side(-1.0, 1.0, 1.0, Curvature::Euclidean).is_err());
        assert!(law_of_cosines_side(1.0, 1.0, 3.5, Curvature::Euclidean).is_err());
        assert!(law_of_cosines_side(3.2, 1.0, 1.0, Curvature::Spherical).is_err());
    }

    #[test]
    fn law_of_cosines_matches_hyperbolic_sum_form() {
        // cosh y = cosh(x+z) - sinh x sinh z (1 + cos theta) is the same law
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            let x = rng.random_range(0.1..2.0);
            let z = rng.random_range(0.1..2.0);
            let t = rng.random_range(0.1..3.0);
            let y = law_of_cosines_side(x, z, t, Curvature::Hyperbolic).unwrap();
            let rhs = (x + z).cosh() - x.sinh() * z.sinh() * (1.0 + t.cos());
            assert!((y.cosh() - rhs).abs() < 1e-10);
        }
    }

    #[test]
    fn law_of_cosines_closes_random_triangles() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for curvature in Curvature::ALL {
            for _ in 0..200 {
                let u = random_tangent(&mut rng, curvature);
                let theta = rng.random_range(0.2..2.9);
                let w = rotate_tangent(&u, theta);
                let (x, z) = match curvature {
                    Curvature::Spherical => {
                        (rng.random_range(0.1..2.8), rng.random_range(0.1..2.8))
                    }
                    _ => (rng.random_range(0.1..2.5), rng.random_range(0.1..2.5)),
                };
                let a = geodesic_flow(&u, x);
                let b = geodesic_flow(&w, z);
                let y = law_of_cosines_side(x, z, theta, curvature).unwrap();
                assert!(
                    (distance(a.base(), b.base()) - y).abs() < 1e-10,
                    "{curvature}: triangle closure failed"
                );
            }
        }
    }

    #[test]
    fn direction_to_inverts_flow() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for curvature in Curvature::ALL {
            for _ in 0..100 {
                let u = random_tangent(&mut rng, curvature);
                let tau = rng.random_range(0.1..2.5);
                let q = geodesic_flow(&u, tau);
                let d = direction_to(u.base(), q.base()).unwrap();
                assert!(dir_gap(&d, &u) < 1e-9);
            }
        }
    }

    #[test]
    fn rotation_is_isometric_and_additive() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for curvature in Curvature::ALL {
            for _ in 0..100 {
                let u = random_tangent(&mut rng, curvature);
                let a = rng.random_range(0.0..PI);
                let r = rotate_tangent(&u, a);
                assert!(r.constraint_residual() < 1e-12);
                assert!((angle_between(&u, &r).unwrap() - a).abs() < 1e-12);
                // left normal is rotation by pi/2
                let n = left_normal(&u);
                let r2 = rotate_tangent(&u, PI / 2.0);
                assert!(dir_gap(&n, &r2) < 1e-12);
            }
        }
    }

    #[test]
    fn constraints_survive_long_compositions() {
        // billiard orbits stay inside a unit-scale table, so the walk is
        // steered back whenever it strays: constraints are only meaningful
        // at bounded ambient coordinates
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for curvature in Curvature::ALL {
            let mut u = random_tangent(&mut rng, curvature);
            let origin = *u.base();
            for _ in 0..5_000 {
                u = geodesic_flow(&u, rng.random_range(0.0..0.3));
                u = rotate_tangent(&u, rng.random_range(-1.0..1.0));
                if distance(u.base(), &origin) > 2.0 {
                    u = direction_to(u.base(), &origin).unwrap();
                }
            }
            assert!(
                u.constraint_residual() < 1e-12,
                "{curvature}: drift {:e} after 1e4 operations",
                u.constraint_residual()
            );
        }
    }

    #[test]
    fn curvature_construction_is_restricted() {
        assert!(Curvature::try_from(-1).is_ok());
        assert!(Curvature::try_from(0).is_ok());
        assert!(Curvature::try_from(1).is_ok());
        assert!(Curvature::try_from(2).is_err());
        assert!(SurfacePoint::hyperbolic(-1.0, 0.0, 0.0).is_err());
        assert!(SurfacePoint::hyperbolic(0.5, 1.0, 1.0).is_err());
        assert!(SurfacePoint::spherical(0.0, 0.0, 0.0).is_err());
    }
}
