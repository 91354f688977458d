//! Closed billiard boundary curves.
//!
//! A [`BoundaryCurve`] is a closed, piecewise-smooth curve on one of the
//! model surfaces, traversed counterclockwise so the billiard domain lies to
//! the left of the forward tangent. With that orientation the geodesic
//! curvature `k_g` is positive where the wall is convex toward the domain.
//!
//! Built-in families: geodesic circles in all three geometries, Euclidean
//! ellipses, Fourier-perturbed geodesic circles, the spherical octant and the
//! hemisphere (equator table). Arclength parametrization is exact for
//! geodesic arcs and comes from cached panel quadrature plus Newton inversion
//! for everything else.
//!
//! Corners are explicit: querying a tangent or curvature inside the corner
//! tolerance band fails with [`Error::CornerHit`], and the billiard map is
//! undefined there (orbits that hit a corner terminate).
//!
//! Built-in families are simple (non-self-intersecting) by construction; a
//! perturbation large enough to destroy simplicity, or a user-supplied
//! `Custom` piece that self-intersects, is not detected.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::surface::{
    self, geodesic_flow, left_normal, metric_dot, Curvature, SurfacePoint, UnitTangent,
};
use crate::vec3::{self, V3};

/// Arclength half-width of the band around each corner where tangent data is
/// refused. Small enough not to bias Monte Carlo statistics visibly, large
/// enough to keep numerics away from the tangent discontinuity.
pub const CORNER_TOLERANCE: f64 = 1e-7;

/// Tolerance for the closed-curve junction checks.
const CLOSURE_TOLERANCE: f64 = 1e-10;

/// Number of quadrature panels for cached cumulative arclength.
const ARCLENGTH_PANELS: usize = 1024;

// 7-point Gauss-Legendre rule on [-1, 1].
const GL_NODES: [f64; 7] = [
    -0.949_107_912_342_758_5,
    -0.741_531_185_599_394_4,
    -0.405_845_151_377_397_17,
    0.0,
    0.405_845_151_377_397_17,
    0.741_531_185_599_394_4,
    0.949_107_912_342_758_5,
];
const GL_WEIGHTS: [f64; 7] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_94,
    0.417_959_183_673_469_4,
    0.381_830_050_505_118_94,
    0.279_705_391_489_276_7,
    0.129_484_966_168_869_7,
];

fn gl7<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut acc = 0.0;
    for (x, w) in GL_NODES.iter().zip(GL_WEIGHTS) {
        acc += w * f(mid + half * x);
    }
    acc * half
}

/// Radial profile of a polar-graph curve:
/// `rho(theta) = base + sum_j amps[j] * cos((j+1) theta)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialProfile {
    pub base: f64,
    pub cos_amps: Vec<f64>,
}

impl RadialProfile {
    pub fn constant(r: f64) -> RadialProfile {
        RadialProfile {
            base: r,
            cos_amps: Vec::new(),
        }
    }

    fn rho(&self, theta: f64) -> f64 {
        let mut r = self.base;
        for (j, a) in self.cos_amps.iter().enumerate() {
            r += a * ((j + 1) as f64 * theta).cos();
        }
        r
    }

    fn drho(&self, theta: f64) -> f64 {
        let mut r = 0.0;
        for (j, a) in self.cos_amps.iter().enumerate() {
            let m = (j + 1) as f64;
            r -= a * m * (m * theta).sin();
        }
        r
    }

    fn ddrho(&self, theta: f64) -> f64 {
        let mut r = 0.0;
        for (j, a) in self.cos_amps.iter().enumerate() {
            let m = (j + 1) as f64;
            r -= a * m * m * (m * theta).cos();
        }
        r
    }
}

/// `h(rho)`: the circumference factor of geodesic polar coordinates,
/// i.e. the metric is `d rho^2 + h(rho)^2 d theta^2`.
fn polar_h(curvature: Curvature, rho: f64) -> (f64, f64) {
    match curvature {
        Curvature::Euclidean => (rho, 1.0),
        Curvature::Spherical => (rho.sin(), rho.cos()),
        Curvature::Hyperbolic => (rho.sinh(), rho.cosh()),
    }
}

/// Embed a polar pair around the canonical center of each model surface
/// (origin on E^2, north pole on S^2, (1,0,0) on H^2).
fn polar_point(curvature: Curvature, rho: f64, theta: f64) -> V3 {
    let (st, ct) = theta.sin_cos();
    match curvature {
        Curvature::Euclidean => [rho * ct, rho * st, 0.0],
        Curvature::Spherical => {
            let (sr, cr) = rho.sin_cos();
            [sr * ct, sr * st, cr]
        }
        Curvature::Hyperbolic => [rho.cosh(), rho.sinh() * ct, rho.sinh() * st],
    }
}

fn polar_velocity(curvature: Curvature, rho: f64, drho: f64, theta: f64) -> V3 {
    let (st, ct) = theta.sin_cos();
    match curvature {
        Curvature::Euclidean => [drho * ct - rho * st, drho * st + rho * ct, 0.0],
        Curvature::Spherical => {
            let (sr, cr) = rho.sin_cos();
            [
                cr * drho * ct - sr * st,
                cr * drho * st + sr * ct,
                -sr * drho,
            ]
        }
        Curvature::Hyperbolic => {
            let (sr, cr) = (rho.sinh(), rho.cosh());
            [
                sr * drho,
                cr * drho * ct - sr * st,
                cr * drho * st + sr * ct,
            ]
        }
    }
}

/// Polar coordinates of an ambient point around the canonical center.
fn polar_coordinates(curvature: Curvature, q: V3) -> (f64, f64) {
    match curvature {
        Curvature::Euclidean => (q[0].hypot(q[1]), q[1].atan2(q[0])),
        Curvature::Spherical => (q[0].hypot(q[1]).atan2(q[2]), q[1].atan2(q[0])),
        Curvature::Hyperbolic => {
            // rho from the stable chordal form, azimuth from the (x1, x2) slot
            let rho = q[1].hypot(q[2]).asinh();
            (rho, q[2].atan2(q[1]))
        }
    }
}

/// One smooth parametric piece, `t` in [0, 1].
#[derive(Clone)]
enum PieceMap {
    /// Unit-speed geodesic arc: `t -> flow(start, t * len)`.
    GeodesicArc { start: UnitTangent, len: f64 },
    /// Full polar graph around the canonical center, `theta = 2 pi t`.
    PolarGraph {
        curvature: Curvature,
        profile: RadialProfile,
    },
    /// Full Euclidean ellipse `(a cos, b sin)`, `theta = 2 pi t`.
    Ellipse { a: f64, b: f64 },
    /// User-supplied smooth closed piece; curvature falls back to finite
    /// differences and arclength to quadrature of numerical speeds.
    Custom {
        point: Arc<dyn Fn(f64) -> SurfacePoint + Send + Sync>,
        is_geodesic: bool,
    },
}

impl PieceMap {
    fn point(&self, t: f64) -> SurfacePoint {
        match self {
            PieceMap::GeodesicArc { start, len } => *geodesic_flow(start, t * len).base(),
            PieceMap::PolarGraph { curvature, profile } => {
                let theta = 2.0 * PI * t;
                raw_point(*curvature, polar_point(*curvature, profile.rho(theta), theta))
            }
            PieceMap::Ellipse { a, b } => {
                let theta = 2.0 * PI * t;
                SurfacePoint::euclidean(a * theta.cos(), b * theta.sin())
            }
            PieceMap::Custom { point, .. } => point(t),
        }
    }

    /// Ambient velocity d(point)/dt.
    fn velocity(&self, t: f64) -> V3 {
        match self {
            PieceMap::GeodesicArc { start, len } => {
                vec3::scale(geodesic_flow(start, t * len).dir(), *len)
            }
            PieceMap::PolarGraph { curvature, profile } => {
                let theta = 2.0 * PI * t;
                vec3::scale(
                    polar_velocity(*curvature, profile.rho(theta), profile.drho(theta), theta),
                    2.0 * PI,
                )
            }
            PieceMap::Ellipse { a, b } => {
                let theta = 2.0 * PI * t;
                [
                    -a * theta.sin() * 2.0 * PI,
                    b * theta.cos() * 2.0 * PI,
                    0.0,
                ]
            }
            PieceMap::Custom { point, .. } => {
                let h = 1e-6;
                let (lo, hi) = (t - h, t + h);
                vec3::scale(
                    vec3::sub(point(hi).coords(), point(lo).coords()),
                    1.0 / (2.0 * h),
                )
            }
        }
    }

    fn speed(&self, curvature: Curvature, t: f64) -> f64 {
        match self {
            PieceMap::GeodesicArc { len, .. } => *len,
            _ => {
                let v = self.velocity(t);
                metric_dot(curvature, v, v).sqrt()
            }
        }
    }

    fn is_geodesic(&self) -> bool {
        match self {
            PieceMap::GeodesicArc { .. } => true,
            PieceMap::Custom { is_geodesic, .. } => *is_geodesic,
            _ => false,
        }
    }
}

fn raw_point(curvature: Curvature, coords: V3) -> SurfacePoint {
    match curvature {
        Curvature::Euclidean => SurfacePoint::euclidean(coords[0], coords[1]),
        Curvature::Spherical => SurfacePoint::spherical(coords[0], coords[1], coords[2])
            .expect("polar embedding off the sphere"),
        Curvature::Hyperbolic => SurfacePoint::hyperbolic(coords[0], coords[1], coords[2])
            .expect("polar embedding off the hyperboloid"),
    }
}

/// Cached cumulative arclength over `t` in [0, 1].
#[derive(Clone)]
struct ArclengthTable {
    /// `s_nodes[i]` = arclength at `t = i / panels`; last entry is the length.
    s_nodes: Vec<f64>,
}

impl ArclengthTable {
    fn build<F: Fn(f64) -> f64>(speed: &F) -> ArclengthTable {
        let n = ARCLENGTH_PANELS;
        let mut s_nodes = Vec::with_capacity(n + 1);
        s_nodes.push(0.0);
        let mut acc = 0.0;
        for i in 0..n {
            let (a, b) = (i as f64 / n as f64, (i + 1) as f64 / n as f64);
            acc += gl7(speed, a, b);
            s_nodes.push(acc);
        }
        ArclengthTable { s_nodes }
    }

    fn length(&self) -> f64 {
        *self.s_nodes.last().unwrap()
    }

    fn s_of_t<F: Fn(f64) -> f64>(&self, speed: &F, t: f64) -> f64 {
        let n = ARCLENGTH_PANELS;
        let x = (t * n as f64).floor().clamp(0.0, (n - 1) as f64);
        let i = x as usize;
        self.s_nodes[i] + gl7(speed, i as f64 / n as f64, t)
    }

    /// Invert arclength to the parameter, Newton-corrected to 1e-12.
    fn t_of_s<F: Fn(f64) -> f64>(&self, speed: &F, s: f64) -> f64 {
        let n = ARCLENGTH_PANELS;
        let i = match self
            .s_nodes
            .binary_search_by(|v| v.partial_cmp(&s).unwrap())
        {
            Ok(i) => i.min(n - 1),
            Err(i) => i.saturating_sub(1).min(n - 1),
        };
        let (s0, s1) = (self.s_nodes[i], self.s_nodes[i + 1]);
        let dt = 1.0 / n as f64;
        let mut t = (i as f64 + (s - s0) / (s1 - s0)) * dt;
        for _ in 0..30 {
            let f = self.s_of_t(speed, t) - s;
            if f.abs() <= 1e-12 {
                break;
            }
            t = (t - f / speed(t)).clamp(0.0, 1.0);
        }
        t
    }
}

#[derive(Clone)]
struct Piece {
    map: PieceMap,
    length: f64,
    table: Option<ArclengthTable>,
}

impl Piece {
    fn new(curvature: Curvature, map: PieceMap) -> Piece {
        match map {
            PieceMap::GeodesicArc { len, .. } => Piece {
                map,
                length: len,
                table: None,
            },
            _ => {
                let speed = |t: f64| map.speed(curvature, t);
                let table = ArclengthTable::build(&speed);
                let length = table.length();
                Piece {
                    map,
                    length,
                    table: Some(table),
                }
            }
        }
    }

    fn t_of_s(&self, curvature: Curvature, s: f64) -> f64 {
        match &self.table {
            None => s / self.length,
            Some(table) => table.t_of_s(&|t| self.map.speed(curvature, t), s),
        }
    }

    fn s_of_t(&self, curvature: Curvature, t: f64) -> f64 {
        match &self.table {
            None => t * self.length,
            Some(table) => table.s_of_t(&|t| self.map.speed(curvature, t), t),
        }
    }
}

/// Signed side-of-curve function: positive inside the domain, zero on the
/// boundary, negative outside. Built from the defining equations of each
/// family, so it is cheap enough to drive the collision march.
#[derive(Clone)]
enum SideTest {
    Polar(RadialProfile),
    EllipseE2 { a: f64, b: f64 },
    /// Intersection of hemispheres: min over faces of `<q, pole>`.
    SphericalFaces { poles: Vec<V3> },
    Custom(Arc<dyn Fn(&SurfacePoint) -> f64 + Send + Sync>),
}

/// Descriptor of a built-in table family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum FamilyDescriptor {
    /// Geodesic circle of radius `r` (distance circle about a point).
    /// On the sphere `r` must stay below pi/2.
    GeodesicCircle { kappa: Curvature, r: f64 },
    /// Euclidean ellipse with semi-axes `a`, `b`.
    EllipseEuclidean { a: f64, b: f64 },
    /// Geodesic circle with a cosine-series radial perturbation:
    /// `rho(theta) = r + sum_j amplitudes[j] cos((j+1) theta)`.
    FourierPerturbedCircle {
        kappa: Curvature,
        r: f64,
        amplitudes: Vec<f64>,
    },
    /// The spherical octant: three mutually orthogonal great-circle arcs.
    OctantS2,
    /// The northern hemisphere: the equator as boundary.
    HemisphereS2,
}

impl std::fmt::Display for FamilyDescriptor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FamilyDescriptor::GeodesicCircle { kappa, r } => {
                write!(f, "geodesic_circle({kappa}, r={r})")
            }
            FamilyDescriptor::EllipseEuclidean { a, b } => write!(f, "ellipse(a={a}, b={b})"),
            FamilyDescriptor::FourierPerturbedCircle { kappa, r, amplitudes } => {
                write!(f, "perturbed_circle({kappa}, r={r}, amps={amplitudes:?})")
            }
            FamilyDescriptor::OctantS2 => write!(f, "octant_s2"),
            FamilyDescriptor::HemisphereS2 => write!(f, "hemisphere_s2"),
        }
    }
}

/// A closed billiard boundary with arclength parametrization.
#[derive(Clone)]
pub struct BoundaryCurve {
    curvature: Curvature,
    pieces: Vec<Piece>,
    /// Arclength offset of each piece start; one extra entry = total length.
    offsets: Vec<f64>,
    total_length: f64,
    corners: Vec<f64>,
    side: SideTest,
    descriptor: Option<FamilyDescriptor>,
}

impl BoundaryCurve {
    pub fn curvature(&self) -> Curvature {
        self.curvature
    }

    pub fn total_length(&self) -> f64 {
        self.total_length
    }

    /// Arclength values of the tangent discontinuities.
    pub fn corners(&self) -> &[f64] {
        &self.corners
    }

    pub fn descriptor(&self) -> Option<&FamilyDescriptor> {
        self.descriptor.as_ref()
    }

    /// Short table identifier used in serialized reports.
    pub fn table_id(&self) -> String {
        match &self.descriptor {
            Some(d) => d.to_string(),
            None => format!("custom({}, length={})", self.curvature, self.total_length),
        }
    }

    /// Wrap an arclength value into [0, total_length).
    pub fn wrap(&self, s: f64) -> f64 {
        let w = s.rem_euclid(self.total_length);
        if w == self.total_length {
            0.0
        } else {
            w
        }
    }

    /// Circular arclength distance to the nearest corner (infinite if the
    /// curve is smooth).
    pub fn corner_distance(&self, s: f64) -> f64 {
        let s = self.wrap(s);
        let mut best = f64::INFINITY;
        for &c in &self.corners {
            let d = (s - c).abs();
            best = best.min(d.min(self.total_length - d));
        }
        best
    }

    fn corner_guard(&self, s: f64) -> Result<()> {
        if self.corner_distance(s) < CORNER_TOLERANCE {
            return Err(Error::CornerHit { s: self.wrap(s) });
        }
        Ok(())
    }

    fn piece_at(&self, s: f64) -> (usize, f64) {
        let s = self.wrap(s);
        // offsets is short (few pieces); linear scan
        let mut i = self.pieces.len() - 1;
        for k in 0..self.pieces.len() {
            if s < self.offsets[k + 1] {
                i = k;
                break;
            }
        }
        (i, s - self.offsets[i])
    }

    /// Point at arclength `s` (taken mod the total length).
    pub fn point_at(&self, s: f64) -> SurfacePoint {
        let (i, local) = self.piece_at(s);
        let piece = &self.pieces[i];
        let t = piece.t_of_s(self.curvature, local);
        piece.map.point(t)
    }

    /// Unit tangent in the direction of increasing `s`.
    ///
    /// Fails with [`Error::CornerHit`] inside the corner tolerance band.
    pub fn tangent_at(&self, s: f64) -> Result<UnitTangent> {
        self.corner_guard(s)?;
        let (i, local) = self.piece_at(s);
        let piece = &self.pieces[i];
        let t = piece.t_of_s(self.curvature, local);
        let base = piece.map.point(t);
        UnitTangent::new(base, piece.map.velocity(t))
    }

    /// Signed geodesic curvature at arclength `s`; positive where the wall
    /// curves toward the domain. Closed-form for the built-in families,
    /// finite differences for `Custom` pieces.
    pub fn geodesic_curvature(&self, s: f64) -> Result<f64> {
        self.corner_guard(s)?;
        let (i, local) = self.piece_at(s);
        let piece = &self.pieces[i];
        match &piece.map {
            PieceMap::GeodesicArc { .. } => Ok(0.0),
            PieceMap::PolarGraph { curvature, profile } => {
                let theta = 2.0 * PI * piece.t_of_s(self.curvature, local);
                let (rho, dr, ddr) = (
                    profile.rho(theta),
                    profile.drho(theta),
                    profile.ddrho(theta),
                );
                let (h, dh) = polar_h(*curvature, rho);
                let num = 2.0 * dh * dr * dr - h * ddr + dh * h * h;
                Ok(num / (h * h + dr * dr).powf(1.5))
            }
            PieceMap::Ellipse { a, b } => {
                let theta = 2.0 * PI * piece.t_of_s(self.curvature, local);
                let g = (a * theta.sin()).powi(2) + (b * theta.cos()).powi(2);
                Ok(a * b / g.powf(1.5))
            }
            PieceMap::Custom { is_geodesic, .. } => {
                if *is_geodesic {
                    Ok(0.0)
                } else {
                    self.geodesic_curvature_fd(s)
                }
            }
        }
    }

    /// Whether the piece containing `s` is flagged as a geodesic arc.
    pub fn is_geodesic_at(&self, s: f64) -> bool {
        let (i, _) = self.piece_at(s);
        self.pieces[i].map.is_geodesic()
    }

    /// Finite-difference geodesic curvature: central differences of the unit
    /// tangent's covariant derivative, Richardson-extrapolated. Serves as the
    /// independent oracle for the analytic values and as the fallback for
    /// user-supplied pieces.
    pub fn geodesic_curvature_fd(&self, s: f64) -> Result<f64> {
        self.corner_guard(s)?;
        let eval = |h: f64| -> Result<f64> {
            let tp = self.tangent_at(s + h)?;
            let tm = self.tangent_at(s - h)?;
            let dt = vec3::scale(vec3::sub(tp.dir(), tm.dir()), 1.0 / (2.0 * h));
            let frame = self.tangent_at(s)?;
            let n = left_normal(&frame);
            // the normal component of the ambient derivative is already the
            // covariant derivative's normal component
            Ok(metric_dot(self.curvature, dt, n.dir()))
        };
        let h = 1e-4;
        let coarse = eval(h)?;
        let fine = eval(0.5 * h)?;
        Ok((4.0 * fine - coarse) / 3.0)
    }

    /// Signed side-of-curve value at `q`: positive inside the billiard
    /// domain, zero on the boundary, negative outside.
    pub fn side_value(&self, q: &SurfacePoint) -> f64 {
        match &self.side {
            SideTest::Polar(profile) => {
                let (rho_q, theta_q) = polar_coordinates(self.curvature, q.coords());
                profile.rho(theta_q) - rho_q
            }
            SideTest::EllipseE2 { a, b } => {
                let c = q.coords();
                1.0 - (c[0] / a).powi(2) - (c[1] / b).powi(2)
            }
            SideTest::SphericalFaces { poles } => {
                let c = q.coords();
                poles
                    .iter()
                    .map(|p| vec3::dot(c, *p))
                    .fold(f64::INFINITY, f64::min)
            }
            SideTest::Custom(f) => f(q),
        }
    }

    /// Arclength of a point lying on the curve (up to solver tolerance).
    pub fn locate(&self, q: &SurfacePoint) -> Result<f64> {
        self.locate_on_piece(q).map(|(s, _, _)| s)
    }

    /// Boundary frame for a point already located on piece `i` at parameter
    /// `t`, skipping the arclength inversion.
    pub(crate) fn piece_frame(&self, i: usize, t: f64) -> Result<UnitTangent> {
        let piece = &self.pieces[i];
        UnitTangent::new(piece.map.point(t), piece.map.velocity(t))
    }

    /// Like [`locate`](Self::locate) but also reports the piece index and
    /// local parameter of the match.
    pub(crate) fn locate_on_piece(&self, q: &SurfacePoint) -> Result<(f64, usize, f64)> {
        let mut best: Option<(f64, usize, f64, f64)> = None;
        for (i, piece) in self.pieces.iter().enumerate() {
            let t = match &piece.map {
                PieceMap::GeodesicArc { start, len } => {
                    let tau = match self.curvature {
                        Curvature::Euclidean => {
                            vec3::dot(vec3::sub(q.coords(), start.base().coords()), start.dir())
                        }
                        Curvature::Spherical => {
                            let mut tau = vec3::dot(q.coords(), start.dir())
                                .atan2(vec3::dot(q.coords(), start.base().coords()));
                            if tau < -1e-12 {
                                tau += 2.0 * PI;
                            }
                            tau
                        }
                        Curvature::Hyperbolic => vec3::mdot(q.coords(), start.dir()).asinh(),
                    };
                    tau / len
                }
                PieceMap::PolarGraph { .. } | PieceMap::Ellipse { .. } => {
                    let c = q.coords();
                    let theta = match &piece.map {
                        PieceMap::Ellipse { a, b } => (c[1] / b).atan2(c[0] / a),
                        _ => polar_coordinates(self.curvature, c).1,
                    };
                    theta.rem_euclid(2.0 * PI) / (2.0 * PI)
                }
                PieceMap::Custom { .. } => {
                    let mut best_t = 0.0;
                    let mut best_d = f64::INFINITY;
                    let n = 256;
                    for k in 0..=n {
                        let t = k as f64 / n as f64;
                        let d = surface::distance(&piece.map.point(t), q);
                        if d < best_d {
                            best_d = d;
                            best_t = t;
                        }
                    }
                    let (mut lo, mut hi) =
                        ((best_t - 1.5 / n as f64).max(0.0), (best_t + 1.5 / n as f64).min(1.0));
                    for _ in 0..80 {
                        let m1 = lo + (hi - lo) / 3.0;
                        let m2 = hi - (hi - lo) / 3.0;
                        if surface::distance(&piece.map.point(m1), q)
                            < surface::distance(&piece.map.point(m2), q)
                        {
                            hi = m2;
                        } else {
                            lo = m1;
                        }
                    }
                    0.5 * (lo + hi)
                }
            };
            if !(-1e-9..=1.0 + 1e-9).contains(&t) {
                continue;
            }
            let t = t.clamp(0.0, 1.0);
            let gap = surface::distance(&piece.map.point(t), q);
            if best.map_or(true, |(_, _, _, g)| gap < g) {
                let s = self.offsets[i] + piece.s_of_t(self.curvature, t);
                best = Some((self.wrap(s), i, t, gap));
            }
        }
        match best {
            Some((s, i, t, gap)) if gap < 1e-7 => Ok((s, i, t)),
            _ => Err(Error::InvalidParameter(
                "point does not lie on the boundary curve".into(),
            )),
        }
    }

    fn from_pieces(
        curvature: Curvature,
        maps: Vec<PieceMap>,
        side: SideTest,
        descriptor: Option<FamilyDescriptor>,
    ) -> Result<BoundaryCurve> {
        assert!(!maps.is_empty());
        let pieces: Vec<Piece> = maps
            .into_iter()
            .map(|m| Piece::new(curvature, m))
            .collect();
        let mut offsets = Vec::with_capacity(pieces.len() + 1);
        let mut acc = 0.0;
        for p in &pieces {
            if !(p.length > 0.0) {
                return Err(Error::InvalidParameter(
                    "boundary piece has nonpositive length".into(),
                ));
            }
            offsets.push(acc);
            acc += p.length;
        }
        offsets.push(acc);
        let total_length = acc;

        // junction continuity and corner detection
        let mut corners = Vec::new();
        let n = pieces.len();
        for i in 0..n {
            let this_end = pieces[i].map.point(1.0);
            let next = (i + 1) % n;
            let next_start = pieces[next].map.point(0.0);
            let gap = surface::distance(&this_end, &next_start);
            if gap > CLOSURE_TOLERANCE {
                return Err(Error::InvalidParameter(format!(
                    "boundary not closed: junction {i} gap {gap:.3e}"
                )));
            }
            let v_end = pieces[i].map.velocity(1.0);
            let v_start = pieces[next].map.velocity(0.0);
            let t_end = UnitTangent::new(this_end, v_end)?;
            let t_start = UnitTangent::new(next_start, v_start)?;
            let angle = surface::metric_dot(curvature, t_end.dir(), t_start.dir())
                .clamp(-1.0, 1.0)
                .acos();
            if angle > 1e-8 {
                corners.push(if next == 0 { 0.0 } else { offsets[next] });
            }
        }
        corners.sort_by(|a, b| a.partial_cmp(b).unwrap());

        Ok(BoundaryCurve {
            curvature,
            pieces,
            offsets,
            total_length,
            corners,
            side,
            descriptor,
        })
    }

    /// Build a boundary from a user-supplied closed parametric map together
    /// with a signed inside test (positive inside). The curve must be simple;
    /// this is not checked.
    pub fn custom(
        curvature: Curvature,
        point: Arc<dyn Fn(f64) -> SurfacePoint + Send + Sync>,
        is_geodesic: bool,
        inside: Arc<dyn Fn(&SurfacePoint) -> f64 + Send + Sync>,
    ) -> Result<BoundaryCurve> {
        BoundaryCurve::from_pieces(
            curvature,
            vec![PieceMap::Custom { point, is_geodesic }],
            SideTest::Custom(inside),
            None,
        )
    }
}

/// Build one of the built-in table families.
pub fn make_family(descriptor: &FamilyDescriptor) -> Result<BoundaryCurve> {
    match descriptor {
        FamilyDescriptor::GeodesicCircle { kappa, r } => {
            validate_radius(*kappa, *r)?;
            let profile = RadialProfile::constant(*r);
            BoundaryCurve::from_pieces(
                *kappa,
                vec![PieceMap::PolarGraph {
                    curvature: *kappa,
                    profile: profile.clone(),
                }],
                SideTest::Polar(profile),
                Some(descriptor.clone()),
            )
        }
        FamilyDescriptor::EllipseEuclidean { a, b } => {
            if !(*a > 0.0 && *b > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "ellipse semi-axes must be positive, got a = {a}, b = {b}"
                )));
            }
            BoundaryCurve::from_pieces(
                Curvature::Euclidean,
                vec![PieceMap::Ellipse { a: *a, b: *b }],
                SideTest::EllipseE2 { a: *a, b: *b },
                Some(descriptor.clone()),
            )
        }
        FamilyDescriptor::FourierPerturbedCircle { kappa, r, amplitudes } => {
            validate_radius(*kappa, *r)?;
            let profile = RadialProfile {
                base: *r,
                cos_amps: amplitudes.clone(),
            };
            // sample the profile: it must stay a valid polar graph
            for k in 0..4096 {
                let theta = 2.0 * PI * k as f64 / 4096.0;
                let rho = profile.rho(theta);
                if rho < 1e-3 {
                    return Err(Error::InvalidParameter(
                        "perturbation drives the radius to zero".into(),
                    ));
                }
                if *kappa == Curvature::Spherical && rho >= PI / 2.0 {
                    return Err(Error::InvalidParameter(
                        "perturbed spherical radius must stay below pi/2".into(),
                    ));
                }
            }
            BoundaryCurve::from_pieces(
                *kappa,
                vec![PieceMap::PolarGraph {
                    curvature: *kappa,
                    profile: profile.clone(),
                }],
                SideTest::Polar(profile),
                Some(descriptor.clone()),
            )
        }
        FamilyDescriptor::OctantS2 => {
            let arc = |p: V3, d: V3| PieceMap::GeodesicArc {
                start: UnitTangent::new(SurfacePoint::spherical(p[0], p[1], p[2]).unwrap(), d)
                    .unwrap(),
                len: PI / 2.0,
            };
            BoundaryCurve::from_pieces(
                Curvature::Spherical,
                vec![
                    arc([1.0, 0.0, 0.0], [0.0, 1.0, 0.0]),
                    arc([0.0, 1.0, 0.0], [0.0, 0.0, 1.0]),
                    arc([0.0, 0.0, 1.0], [1.0, 0.0, 0.0]),
                ],
                SideTest::SphericalFaces {
                    poles: vec![[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
                },
                Some(descriptor.clone()),
            )
        }
        FamilyDescriptor::HemisphereS2 => BoundaryCurve::from_pieces(
            Curvature::Spherical,
            vec![PieceMap::GeodesicArc {
                start: UnitTangent::new(
                    SurfacePoint::spherical(1.0, 0.0, 0.0).unwrap(),
                    [0.0, 1.0, 0.0],
                )
                .unwrap(),
                len: 2.0 * PI,
            }],
            SideTest::SphericalFaces {
                poles: vec![[0.0, 0.0, 1.0]],
            },
            Some(descriptor.clone()),
        ),
    }
}

fn validate_radius(kappa: Curvature, r: f64) -> Result<()> {
    if !(r > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "circle radius must be positive, got {r}"
        )));
    }
    if kappa == Curvature::Spherical && r >= PI / 2.0 {
        return Err(Error::InvalidParameter(format!(
            "spherical geodesic circle radius must be below pi/2, got {r}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn families() -> Vec<FamilyDescriptor> {
        vec![
            FamilyDescriptor::GeodesicCircle {
                kappa: Curvature::Euclidean,
                r: 1.0,
            },
            FamilyDescriptor::GeodesicCircle {
                kappa: Curvature::Euclidean,
                r: 2.0,
            },
            FamilyDescriptor::GeodesicCircle {
                kappa: Curvature::Spherical,
                r: PI / 4.0,
            },
            FamilyDescriptor::GeodesicCircle {
                kappa: Curvature::Hyperbolic,
                r: 1.0,
            },
            FamilyDescriptor::EllipseEuclidean { a: 1.2, b: 1.0 },
            FamilyDescriptor::FourierPerturbedCircle {
                kappa: Curvature::Euclidean,
                r: 1.0,
                amplitudes: vec![0.02, 0.015],
            },
            FamilyDescriptor::FourierPerturbedCircle {
                kappa: Curvature::Hyperbolic,
                r: 1.0,
                amplitudes: vec![0.01, 0.02],
            },
            FamilyDescriptor::FourierPerturbedCircle {
                kappa: Curvature::Spherical,
                r: 0.8,
                amplitudes: vec![0.02],
            },
            FamilyDescriptor::OctantS2,
            FamilyDescriptor::HemisphereS2,
        ]
    }

    #[test]
    fn family_lengths_and_corners() {
        let octant = make_family(&FamilyDescriptor::OctantS2).unwrap();
        assert!((octant.total_length() - 1.5 * PI).abs() < 1e-12);
        assert_eq!(octant.corners().len(), 3);

        let hemi = make_family(&FamilyDescriptor::HemisphereS2).unwrap();
        assert!((hemi.total_length() - 2.0 * PI).abs() < 1e-12);
        assert!(hemi.corners().is_empty());

        let circle = make_family(&FamilyDescriptor::GeodesicCircle {
            kappa: Curvature::Euclidean,
            r: 1.0,
        })
        .unwrap();
        assert!((circle.total_length() - 2.0 * PI).abs() < 1e-10);
        assert!(circle.corners().is_empty());

        let cap = make_family(&FamilyDescriptor::GeodesicCircle {
            kappa: Curvature::Spherical,
            r: 0.7,
        })
        .unwrap();
        assert!((cap.total_length() - 2.0 * PI * 0.7f64.sin()).abs() < 1e-10);

        let disk = make_family(&FamilyDescriptor::GeodesicCircle {
            kappa: Curvature::Hyperbolic,
            r: 1.0,
        })
        .unwrap();
        assert!((disk.total_length() - 2.0 * PI * 1.0f64.sinh()).abs() < 1e-10);
    }

    #[test]
    fn invalid_families_are_rejected() {
        assert!(make_family(&FamilyDescriptor::GeodesicCircle {
            kappa: Curvature::Euclidean,
            r: 0.0,
        })
        .is_err());
        assert!(make_family(&FamilyDescriptor::GeodesicCircle {
            kappa: Curvature::Spherical,
            r: PI / 2.0,
        })
        .is_err());
        assert!(make_family(&FamilyDescriptor::EllipseEuclidean { a: 1.0, b: -1.0 }).is_err());
        assert!(make_family(&FamilyDescriptor::FourierPerturbedCircle {
            kappa: Curvature::Euclidean,
            r: 1.0,
            amplitudes: vec![1.5],
        })
        .is_err());
    }

    #[test]
    fn point_at_endpoints_and_periodicity() {
        for desc in families() {
            let b = make_family(&desc).unwrap();
            let start = b.point_at(0.0);
            let loop_back = b.point_at(b.total_length());
            assert!(
                surface::distance(&start, &loop_back) < 1e-10,
                "{desc}: point_at not periodic"
            );
        }
        // antipodal point of the unit circle
        let circle = make_family(&FamilyDescriptor::GeodesicCircle {
            kappa: Curvature::Euclidean,
            r: 1.0,
        })
        .unwrap();
        let p = circle.point_at(0.0);
        let q = circle.point_at(PI);
        assert!((surface::distance(&p, &q) - 2.0).abs() < 1e-9);
    }

    #[test]
    fn tangents_are_unit_and_counterclockwise() {
        let circle = make_family(&FamilyDescriptor::GeodesicCircle {
            kappa: Curvature::Euclidean,
            r: 1.0,
        })
        .unwrap();
        let t = circle.tangent_at(0.0).unwrap();
        // s = 0 sits at (1, 0); ccw tangent is (0, 1)
        let c = t.base().coords();
        assert!((c[0] - 1.0).abs() < 1e-9 && c[1].abs() < 1e-9);
        let d = t.dir();
        assert!(d[0].abs() < 1e-9 && (d[1] - 1.0).abs() < 1e-9);

        let octant = make_family(&FamilyDescriptor::OctantS2).unwrap();
        assert!(matches!(
            octant.tangent_at(PI / 2.0),
            Err(Error::CornerHit { .. })
        ));
        assert!(matches!(octant.tangent_at(0.0), Err(Error::CornerHit { .. })));
        assert!(octant.tangent_at(PI / 4.0).is_ok());
    }

    #[test]
    fn domain_lies_left_of_the_tangent() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for desc in families() {
            let b = make_family(&desc).unwrap();
            for _ in 0..40 {
                let s = rng.random_range(0.0..b.total_length());
                let t = match b.tangent_at(s) {
                    Ok(t) => t,
                    Err(_) => continue, // corner band
                };
                let inward = surface::left_normal(&t);
                let probe = geodesic_flow(&inward, 1e-4);
                assert!(
                    b.side_value(probe.base()) > 0.0,
                    "{desc}: left normal does not point into the domain at s = {s}"
                );
                let outward = geodesic_flow(&inward.reversed(), 1e-4);
                assert!(
                    b.side_value(outward.base()) < 0.0,
                    "{desc}: right normal not outside at s = {s}"
                );
            }
        }
    }

    #[test]
    fn arclength_is_consistent_with_chords() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for desc in families() {
            let b = make_family(&desc).unwrap();
            for _ in 0..40 {
                let s = rng.random_range(0.0..b.total_length());
                let h = rng.random_range(1e-5..1e-3);
                let chord = surface::distance(&b.point_at(s), &b.point_at(s + h));
                assert!(
                    (chord - h).abs() <= 5.0 * h * h,
                    "{desc}: chord {chord} vs arc {h}"
                );
            }
        }
    }

    #[test]
    fn geodesic_curvature_spot_values() {
        let circle2 = make_family(&FamilyDescriptor::GeodesicCircle {
            kappa: Curvature::Euclidean,
            r: 2.0,
        })
        .unwrap();
        assert!((circle2.geodesic_curvature(1.0).unwrap() - 0.5).abs() < 1e-12);

        let cap = make_family(&FamilyDescriptor::GeodesicCircle {
            kappa: Curvature::Spherical,
            r: PI / 4.0,
        })
        .unwrap();
        assert!((cap.geodesic_curvature(0.3).unwrap() - 1.0).abs() < 1e-12);

        let disk = make_family(&FamilyDescriptor::GeodesicCircle {
            kappa: Curvature::Hyperbolic,
            r: 1.0,
        })
        .unwrap();
        let coth1 = 1.0 / 1.0f64.tanh();
        assert!((disk.geodesic_curvature(0.5).unwrap() - coth1).abs() < 1e-12);
        assert!((disk.geodesic_curvature_fd(0.5).unwrap() - coth1).abs() < 1e-7);

        // great-circle arcs carry zero geodesic curvature
        let octant = make_family(&FamilyDescriptor::OctantS2).unwrap();
        assert!(octant.geodesic_curvature(PI / 4.0).unwrap().abs() < 1e-9);
        assert!(octant.geodesic_curvature_fd(PI / 4.0).unwrap().abs() < 1e-9);
        let hemi = make_family(&FamilyDescriptor::HemisphereS2).unwrap();
        assert!(hemi.geodesic_curvature(1.0).unwrap().abs() < 1e-9);
    }

    #[test]
    fn fd_curvature_oracle_matches_analytic_everywhere() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for desc in families() {
            let b = make_family(&desc).unwrap();
            for _ in 0..100 {
                let s = rng.random_range(0.0..b.total_length());
                if b.corner_distance(s) < 2e-4 {
                    continue; // FD stencil must not cross a corner
                }
                let analytic = b.geodesic_curvature(s).unwrap();
                let fd = b.geodesic_curvature_fd(s).unwrap();
                assert!(
                    (analytic - fd).abs() < 1e-6,
                    "{desc}: k_g mismatch at s = {s}: {analytic} vs {fd}"
                );
            }
        }
    }

    #[test]
    fn locate_inverts_point_at() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        for desc in families() {
            let b = make_family(&desc).unwrap();
            for _ in 0..60 {
                let s = rng.random_range(0.0..b.total_length());
                let q = b.point_at(s);
                let back = b.locate(&q).unwrap();
                let d = (back - s).abs();
                let d = d.min(b.total_length() - d);
                assert!(d < 1e-8, "{desc}: locate({s}) -> {back}");
            }
        }
    }

    #[test]
    fn side_value_sign_is_correct_inside() {
        // canonical interior points
        let octant = make_family(&FamilyDescriptor::OctantS2).unwrap();
        let inside = SurfacePoint::spherical(1.0, 1.0, 1.0).unwrap();
        assert!(octant.side_value(&inside) > 0.0);
        let outside = SurfacePoint::spherical(-1.0, 1.0, 1.0).unwrap();
        assert!(octant.side_value(&outside) < 0.0);

        let ellipse = make_family(&FamilyDescriptor::EllipseEuclidean { a: 1.2, b: 1.0 }).unwrap();
        assert!(ellipse.side_value(&SurfacePoint::euclidean(0.0, 0.0)) > 0.0);
        assert!(ellipse.side_value(&SurfacePoint::euclidean(1.3, 0.0)) < 0.0);
    }

    #[test]
    fn custom_curve_round_trip() {
        // a Euclidean circle of radius 2 supplied as a custom closure
        let point = Arc::new(|t: f64| {
            let th = 2.0 * PI * t;
            SurfacePoint::euclidean(2.0 * th.cos(), 2.0 * th.sin())
        });
        let inside = Arc::new(|q: &SurfacePoint| {
            let c = q.coords();
            2.0 - c[0].hypot(c[1])
        });
        let b = BoundaryCurve::custom(Curvature::Euclidean, point, false, inside).unwrap();
        assert!((b.total_length() - 4.0 * PI).abs() < 1e-6);
        assert!((b.geodesic_curvature(1.0).unwrap() - 0.5).abs() < 1e-6);
        let q = b.point_at(1.23);
        let s = b.locate(&q).unwrap();
        assert!((s - 1.23).abs() < 1e-5);
    }
}
