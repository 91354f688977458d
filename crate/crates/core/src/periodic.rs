//! Three-period orbits: variational search, the compatibility residual
//! `k_g - sin^3(phi) F(L)`, and the classification of spherical
//! positive-measure candidates.
//!
//! Orbits are found as critical points of the perimeter over vertex triples
//! `(s0, s1, s2)` rather than by shooting: the perimeter is smooth in the
//! vertex positions and criticality is exactly the reflection law at every
//! vertex. Newton runs on the analytic gradient with a finite-difference
//! Hessian, solved through a pseudo-inverse so that critical *manifolds*
//! (rotationally symmetric tables, the octant) converge instead of blowing
//! up; a singular Hessian at the solution is reported as `Degenerate`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::billiard::{self, Orbit, PhasePoint, EPS_PHI};
use crate::boundary::BoundaryCurve;
use crate::error::{Error, Result};
use crate::jacobi;
use crate::surface::{self, frame_components, Curvature, SurfacePoint};
use crate::vec3;

/// Newton convergence threshold on the gradient norm.
const GRAD_TOL: f64 = 1e-12;

/// Step for the finite-difference Hessian of the perimeter gradient.
const HESSIAN_STEP: f64 = 1e-5;

/// Hessian singular values below this flag a degenerate critical manifold.
const DEGENERATE_TOL: f64 = 1e-8;

/// Vertex-set distance below which two orbits are considered the same.
const DEDUP_TOL: f64 = 1e-6;

/// Phase-return error a candidate must beat to count as a verified orbit.
const RETURN_TOL: f64 = 1e-8;

/// Arclength half-window probed around each vertex when testing whether the
/// wall is locally a geodesic arc.
pub const PROBE_RADIUS: f64 = 0.01;

/// A verified 3-period orbit produced by [`find_3period`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoundOrbit {
    pub orbit: Orbit,
    /// The perimeter Hessian at the solution is singular: the orbit belongs
    /// to a critical manifold (a rotational family or an open periodic set),
    /// not an isolated triangle.
    pub degenerate: bool,
    /// Smallest absolute eigenvalue of the perimeter Hessian.
    pub min_singular_value: f64,
    /// Gradient norm at the accepted solution.
    pub grad_norm: f64,
    /// Phase distance between `T^3` of the starting ray and the start.
    pub return_error: f64,
}

/// Classification of a 3-period orbit by the compatibility relation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrbitClass {
    /// Ordinary isolated critical triangle.
    GenericIsolated,
    /// Spherical orbit with perimeter near an odd multiple of pi and
    /// locally geodesic walls at every vertex: the candidate configuration
    /// for an open set of 3-period orbits.
    SphericalSpecialCandidate,
    /// The finder hit a singular perimeter Hessian (critical manifold).
    Degenerate,
}

/// Compatibility data of one orbit: per-vertex residuals of
/// `k_g = sin^3(phi) F(L)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompatibilityReport {
    pub orbit: Orbit,
    /// `k_g(s_i) - sin^3(phi_i) F(L)` per vertex.
    pub residuals: [f64; 3],
    /// `F(L)`; NaN at the spherical pole `L = 2 pi m`.
    pub f_value: f64,
    pub classification: OrbitClass,
    /// Half-window actually probed for the locally-geodesic test.
    pub probe_radius: f64,
}

/// Per-orbit result of the special-case geometry check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecialCheck {
    pub report_index: usize,
    /// Nearest odd multiple m with L close to m*pi.
    pub perimeter_multiple: u32,
    /// Largest pairwise inner product among the three bisector directions;
    /// zero for exactly orthogonal wall circles.
    pub max_pairwise_dot: f64,
    pub orthogonal: bool,
}

/// Outcome of [`classify_theorem2`] over a batch of reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationSummary {
    pub total: usize,
    pub generic_isolated: usize,
    pub degenerate: usize,
    pub special: Vec<SpecialCheck>,
}

/// Perimeter of the geodesic triangle through three boundary points.
pub fn perimeter(b: &BoundaryCurve, s0: f64, s1: f64, s2: f64) -> Result<f64> {
    let p = [b.point_at(s0), b.point_at(s1), b.point_at(s2)];
    check_distinct(&p)?;
    Ok(surface::distance(&p[0], &p[1])
        + surface::distance(&p[1], &p[2])
        + surface::distance(&p[2], &p[0]))
}

fn check_distinct(p: &[SurfacePoint; 3]) -> Result<()> {
    for i in 0..3 {
        for j in (i + 1)..3 {
            if surface::distance(&p[i], &p[j]) <= 1e-9 {
                return Err(Error::CoincidentVertices { i, j });
            }
        }
    }
    Ok(())
}

/// Analytic gradient of the perimeter with respect to the vertex arclengths.
///
/// d L / d s_i = -<t_i, u_(i->prev)> - <t_i, u_(i->next)>, where t_i is the
/// boundary tangent and u the unit chord directions leaving vertex i. The
/// component vanishes exactly when the two chords make equal angles with the
/// wall, so critical triples are billiard orbits.
pub fn grad_perimeter(b: &BoundaryCurve, s0: f64, s1: f64, s2: f64) -> Result<[f64; 3]> {
    let s = [s0, s1, s2];
    let p = [b.point_at(s0), b.point_at(s1), b.point_at(s2)];
    check_distinct(&p)?;
    let mut grad = [0.0; 3];
    for i in 0..3 {
        let t = b.tangent_at(s[i])?;
        let to_next = surface::direction_to(&p[i], &p[(i + 1) % 3])?;
        let to_prev = surface::direction_to(&p[i], &p[(i + 2) % 3])?;
        grad[i] = -surface::metric_dot(b.curvature(), t.dir(), to_next.dir())
            - surface::metric_dot(b.curvature(), t.dir(), to_prev.dir());
    }
    Ok(grad)
}

fn grad_norm_inf(g: &[f64; 3]) -> f64 {
    g.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Eigen-decomposition of a symmetric 3x3 matrix by cyclic Jacobi rotations.
/// Returns (eigenvalues, eigenvectors as columns).
fn eigen_sym3(mut a: [[f64; 3]; 3]) -> ([f64; 3], [[f64; 3]; 3]) {
    let mut v = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    for _ in 0..60 {
        let off = a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2];
        if off < 1e-300 {
            break;
        }
        for (p, q) in [(0usize, 1usize), (0, 2), (1, 2)] {
            if a[p][q].abs() < 1e-300 {
                continue;
            }
            let tau = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
            let t = if tau >= 0.0 {
                1.0 / (tau + (1.0 + tau * tau).sqrt())
            } else {
                1.0 / (tau - (1.0 + tau * tau).sqrt())
            };
            let c = 1.0 / (1.0 + t * t).sqrt();
            let s = t * c;
            // A <- J^T A J
            for k in 0..3 {
                let (akp, akq) = (a[k][p], a[k][q]);
                a[k][p] = c * akp - s * akq;
                a[k][q] = s * akp + c * akq;
            }
            for k in 0..3 {
                let (apk, aqk) = (a[p][k], a[q][k]);
                a[p][k] = c * apk - s * aqk;
                a[q][k] = s * apk + c * aqk;
            }
            for k in 0..3 {
                let (vkp, vkq) = (v[k][p], v[k][q]);
                v[k][p] = c * vkp - s * vkq;
                v[k][q] = s * vkp + c * vkq;
            }
        }
    }
    ([a[0][0], a[1][1], a[2][2]], v)
}

/// Symmetrized finite-difference Hessian of the perimeter.
fn fd_hessian(b: &BoundaryCurve, s: [f64; 3]) -> Option<[[f64; 3]; 3]> {
    let mut h = [[0.0; 3]; 3];
    for i in 0..3 {
        let mut sp = s;
        sp[i] += HESSIAN_STEP;
        let mut sm = s;
        sm[i] -= HESSIAN_STEP;
        let gp = grad_perimeter(b, sp[0], sp[1], sp[2]).ok()?;
        let gm = grad_perimeter(b, sm[0], sm[1], sm[2]).ok()?;
        for j in 0..3 {
            h[j][i] = (gp[j] - gm[j]) / (2.0 * HESSIAN_STEP);
        }
    }
    for i in 0..3 {
        for j in (i + 1)..3 {
            let m = 0.5 * (h[i][j] + h[j][i]);
            h[i][j] = m;
            h[j][i] = m;
        }
    }
    Some(h)
}

/// One damped pseudo-inverse Newton run from a starting triple.
/// Returns the converged triple, the smallest absolute Hessian eigenvalue
/// *at the solution*, and the final gradient norm.
fn newton_from(b: &BoundaryCurve, start: [f64; 3]) -> Option<([f64; 3], f64, f64)> {
    let mut s = start;
    let mut g = grad_perimeter(b, s[0], s[1], s[2]).ok()?;
    let mut converged = grad_norm_inf(&g) <= GRAD_TOL;
    for _ in 0..100 {
        if converged {
            break;
        }
        let h = fd_hessian(b, s)?;
        let (eigs, vecs) = eigen_sym3(h);
        let max_eig = eigs.iter().fold(0.0f64, |m, e| m.max(e.abs()));
        if max_eig == 0.0 {
            return None;
        }
        // pseudo-inverse Newton step: invert only the non-null directions,
        // so critical manifolds converge instead of exploding
        let cutoff = 1e-10 * max_eig;
        let mut delta = [0.0; 3];
        for k in 0..3 {
            if eigs[k].abs() <= cutoff {
                continue;
            }
            let e = [vecs[0][k], vecs[1][k], vecs[2][k]];
            let coeff = (e[0] * g[0] + e[1] * g[1] + e[2] * g[2]) / eigs[k];
            for i in 0..3 {
                delta[i] -= coeff * e[i];
            }
        }
        // step halving
        let g0 = grad_norm_inf(&g);
        let mut alpha = 1.0;
        let mut advanced = false;
        for _ in 0..30 {
            let trial = [
                s[0] + alpha * delta[0],
                s[1] + alpha * delta[1],
                s[2] + alpha * delta[2],
            ];
            if let Ok(gt) = grad_perimeter(b, trial[0], trial[1], trial[2]) {
                if grad_norm_inf(&gt) < g0 {
                    s = trial;
                    g = gt;
                    advanced = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !advanced {
            return None;
        }
        converged = grad_norm_inf(&g) <= GRAD_TOL;
    }
    if !converged {
        return None;
    }
    // degeneracy is judged at the solution itself: away from it the flat
    // directions of a critical manifold pick up spurious third-order terms
    let (eigs, _) = eigen_sym3(fd_hessian(b, s)?);
    let min_abs_eig = eigs.iter().fold(f64::INFINITY, |m, e| m.min(e.abs()));
    Some((s, min_abs_eig, grad_norm_inf(&g)))
}

/// Outgoing angle at `s_from` of the chord toward the boundary point at
/// `s_to`.
fn chord_angle(b: &BoundaryCurve, s_from: f64, s_to: f64) -> Result<f64> {
    let frame = b.tangent_at(s_from)?;
    let u = surface::direction_to(&b.point_at(s_from), &b.point_at(s_to))?;
    let (along, left) = frame_components(&frame, u.dir());
    Ok(left.atan2(along))
}

fn circular_gap(a: f64, c: f64, period: f64) -> f64 {
    let d = (a - c).rem_euclid(period);
    d.min(period - d)
}

fn same_vertex_set(a: &[f64; 3], c: &[f64; 3], period: f64) -> bool {
    const PERMS: [[usize; 3]; 6] = [
        [0, 1, 2],
        [0, 2, 1],
        [1, 0, 2],
        [1, 2, 0],
        [2, 0, 1],
        [2, 1, 0],
    ];
    PERMS.iter().any(|perm| {
        (0..3).all(|i| circular_gap(a[i], c[perm[i]], period) < DEDUP_TOL)
    })
}

/// Search for 3-period orbits from `multistarts` random vertex triples.
///
/// Every returned orbit is verified by iterating the actual billiard map:
/// the starting ray returns to itself within 1e-8 phase distance. Orbits are
/// deduplicated up to cyclic relabeling and reversal of the vertex set and
/// reported sorted by vertex positions, so the output does not depend on
/// scheduling.
pub fn find_3period(b: &BoundaryCurve, multistarts: usize, seed: u64) -> Vec<FoundOrbit> {
    assert!(multistarts >= 1);
    let period = b.total_length();
    let candidates: Vec<Option<FoundOrbit>> = (0..multistarts as u64)
        .into_par_iter()
        .map(|start_idx| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(start_idx);
            let start = [
                rng.random_range(0.0..period),
                rng.random_range(0.0..period),
                rng.random_range(0.0..period),
            ];
            refine_candidate(b, start)
        })
        .collect();

    let mut kept: Vec<FoundOrbit> = Vec::new();
    for cand in candidates.into_iter().flatten() {
        let v = [
            cand.orbit.vertices[0],
            cand.orbit.vertices[1],
            cand.orbit.vertices[2],
        ];
        let dup = kept.iter().any(|k| {
            same_vertex_set(
                &v,
                &[
                    k.orbit.vertices[0],
                    k.orbit.vertices[1],
                    k.orbit.vertices[2],
                ],
                period,
            )
        });
        if !dup {
            kept.push(cand);
        }
    }
    kept.sort_by(|a, c| {
        a.orbit
            .vertices
            .partial_cmp(&c.orbit.vertices)
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    kept
}

fn refine_candidate(b: &BoundaryCurve, start: [f64; 3]) -> Option<FoundOrbit> {
    let period = b.total_length();
    let (sol, min_eig, grad_norm) = newton_from(b, start)?;

    // canonical labeling: ascending arclength
    let mut v: Vec<f64> = sol.iter().map(|&x| x.rem_euclid(period)).collect();
    v.sort_by(|a, c| a.partial_cmp(c).unwrap());
    let v = [v[0], v[1], v[2]];

    // repetition exclusion: a triple with coincident vertices is a shorter
    // orbit traversed multiply
    for i in 0..3 {
        if circular_gap(v[i], v[(i + 1) % 3], period) < DEDUP_TOL {
            return None;
        }
    }

    // genuine triangle: positive side lengths, non-grazing chord angles
    let p = [b.point_at(v[0]), b.point_at(v[1]), b.point_at(v[2])];
    for i in 0..3 {
        if surface::distance(&p[i], &p[(i + 1) % 3]) <= 1e-6 {
            return None;
        }
    }
    let phi0 = chord_angle(b, v[0], v[1]).ok()?;
    if !(phi0 > EPS_PHI && phi0 < std::f64::consts::PI - EPS_PHI) {
        return None;
    }
    for i in 0..3 {
        let a = chord_angle(b, v[i], v[(i + 1) % 3]).ok()?;
        if !(a > EPS_PHI && a < std::f64::consts::PI - EPS_PHI) {
            return None;
        }
    }

    // verify through the actual dynamics
    let orbit = billiard::iterate(b, &PhasePoint::new(v[0], phi0), 3).ok()?;
    let return_error = orbit.closure_error(period);
    if return_error >= RETURN_TOL {
        return None;
    }
    Some(FoundOrbit {
        orbit,
        degenerate: min_eig < DEGENERATE_TOL,
        min_singular_value: min_eig,
        grad_norm,
        return_error,
    })
}

/// Evaluate the compatibility relation on a verified 3-period orbit.
pub fn compatibility_report(b: &BoundaryCurve, found: &FoundOrbit) -> CompatibilityReport {
    let orbit = &found.orbit;
    let f_value = jacobi::f_of_l(b.curvature(), orbit.perimeter).unwrap_or(f64::NAN);
    let mut residuals = [f64::NAN; 3];
    for i in 0..3 {
        if let Ok(k) = b.geodesic_curvature(orbit.vertices[i]) {
            residuals[i] = k - orbit.angles[i].sin().powi(3) * f_value;
        }
    }
    let classification = if b.curvature() == Curvature::Spherical
        && special_perimeter_multiple(orbit.perimeter).is_some()
        && walls_locally_geodesic(b, orbit)
    {
        OrbitClass::SphericalSpecialCandidate
    } else if found.degenerate {
        OrbitClass::Degenerate
    } else {
        OrbitClass::GenericIsolated
    };
    CompatibilityReport {
        orbit: orbit.clone(),
        residuals,
        f_value,
        classification,
        probe_radius: PROBE_RADIUS,
    }
}

/// The odd multiple m in {1, 3, 5} with |L - m pi| < 1e-6, if any.
fn special_perimeter_multiple(perimeter: f64) -> Option<u32> {
    [1u32, 3, 5]
        .into_iter()
        .find(|&m| (perimeter - m as f64 * std::f64::consts::PI).abs() < 1e-6)
}

/// Probe the wall curvature at five points within the probe window around
/// each vertex; all evaluable probes must vanish to 1e-9.
fn walls_locally_geodesic(b: &BoundaryCurve, orbit: &Orbit) -> bool {
    let offsets = [-PROBE_RADIUS, -0.5 * PROBE_RADIUS, 0.0, 0.5 * PROBE_RADIUS, PROBE_RADIUS];
    for &s in &orbit.vertices {
        let mut seen = 0;
        for off in offsets {
            match b.geodesic_curvature(s + off) {
                Ok(k) => {
                    if k.abs() >= 1e-9 {
                        return false;
                    }
                    seen += 1;
                }
                Err(_) => continue, // probe fell in a corner band
            }
        }
        if seen == 0 {
            return false;
        }
    }
    true
}

/// Partition a batch of reports by class and verify the special-candidate
/// geometry: the great circles through each vertex orthogonal to the angle
/// bisector must be pairwise orthogonal.
pub fn classify_theorem2(
    b: &BoundaryCurve,
    reports: &[CompatibilityReport],
) -> ClassificationSummary {
    let mut summary = ClassificationSummary {
        total: reports.len(),
        generic_isolated: 0,
        degenerate: 0,
        special: Vec::new(),
    };
    for (idx, report) in reports.iter().enumerate() {
        match report.classification {
            OrbitClass::GenericIsolated => summary.generic_isolated += 1,
            OrbitClass::Degenerate => summary.degenerate += 1,
            OrbitClass::SphericalSpecialCandidate => {
                let m = special_perimeter_multiple(report.orbit.perimeter).unwrap_or(0);
                let max_dot = bisector_orthogonality(b, &report.orbit).unwrap_or(f64::NAN);
                summary.special.push(SpecialCheck {
                    report_index: idx,
                    perimeter_multiple: m,
                    max_pairwise_dot: max_dot,
                    orthogonal: max_dot < 1e-6,
                });
            }
        }
    }
    summary
}

/// Max pairwise |dot| of the three interior-bisector directions of the orbit
/// triangle (ambient vectors on S^2).
///
/// The great circle through vertex i orthogonal to the bisector has the
/// bisector itself as its pole, so pairwise orthogonality of those circles
/// is pairwise orthogonality of the bisectors.
fn bisector_orthogonality(b: &BoundaryCurve, orbit: &Orbit) -> Result<f64> {
    let p = [
        b.point_at(orbit.vertices[0]),
        b.point_at(orbit.vertices[1]),
        b.point_at(orbit.vertices[2]),
    ];
    let mut bis = [[0.0; 3]; 3];
    for i in 0..3 {
        let u_next = surface::direction_to(&p[i], &p[(i + 1) % 3])?;
        let u_prev = surface::direction_to(&p[i], &p[(i + 2) % 3])?;
        let sum = vec3::add(u_next.dir(), u_prev.dir());
        let n = vec3::norm(sum);
        if n < 1e-12 {
            return Err(Error::InvalidParameter(
                "degenerate bisector (straight-through vertex)".into(),
            ));
        }
        bis[i] = vec3::scale(sum, 1.0 / n);
    }
    let mut max_dot = 0.0f64;
    for i in 0..3 {
        for j in (i + 1)..3 {
            max_dot = max_dot.max(vec3::dot(bis[i], bis[j]).abs());
        }
    }
    Ok(max_dot)
}

/// Both sides of the top-right-entry identity evaluated from orbit data:
/// the matrix-product gap and the closed form
/// `2 k_1 S(x) S(z) / sin(phi_1) - [S(x+z) - S(y)]`.
///
/// For a true open family these both vanish; for an isolated orbit they are
/// generally nonzero but must agree, being two routes to the same quantity.
pub fn top_right_identity_from_orbit(b: &BoundaryCurve, orbit: &Orbit) -> Result<(f64, f64)> {
    assert_eq!(orbit.len(), 3);
    let k = [
        b.geodesic_curvature(orbit.vertices[0])?,
        b.geodesic_curvature(orbit.vertices[1])?,
        b.geodesic_curvature(orbit.vertices[2])?,
    ];
    jacobi::top_right_identity(
        b.curvature(),
        orbit.sides[0],
        orbit.sides[2],
        orbit.sides[1],
        [orbit.angles[0], orbit.angles[1], orbit.angles[2]],
        k,
        jacobi::EvolutionVariant::Standard,
    )
}
