//! Ambient 3-vector arithmetic.
//!
//! Points and tangents on all three model surfaces are stored as `[f64; 3]`
//! (the Euclidean plane uses the first two slots). The hyperbolic plane lives
//! in Minkowski 3-space with signature (-,+,+), so there are two inner
//! products here: the Euclidean one and the Minkowski one.

pub type V3 = [f64; 3];

pub fn add(a: V3, b: V3) -> V3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn sub(a: V3, b: V3) -> V3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn scale(a: V3, k: f64) -> V3 {
    [k * a[0], k * a[1], k * a[2]]
}

/// a*x + b*y
pub fn lincomb(a: f64, x: V3, b: f64, y: V3) -> V3 {
    [
        a * x[0] + b * y[0],
        a * x[1] + b * y[1],
        a * x[2] + b * y[2],
    ]
}

pub fn dot(a: V3, b: V3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn cross(a: V3, b: V3) -> V3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn norm(a: V3) -> f64 {
    dot(a, a).sqrt()
}

/// Minkowski inner product with signature (-,+,+).
pub fn mdot(a: V3, b: V3) -> f64 {
    -a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Lorentzian cross product: J(a x b) with J = diag(-1,1,1).
///
/// Satisfies mdot(mcross(a,b), c) = det[a; b; c], so it plays the role the
/// Euclidean cross product plays on the sphere: for p on the hyperboloid and
/// t a unit tangent at p, mcross(p, t) is the unit tangent completing the
/// oriented frame.
pub fn mcross(a: V3, b: V3) -> V3 {
    let c = cross(a, b);
    [-c[0], c[1], c[2]]
}
