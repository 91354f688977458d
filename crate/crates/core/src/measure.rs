//! Monte Carlo experiments under the billiard invariant measure
//! `mu = sin(phi) dphi ds`.
//!
//! Sampling is counter-based: sample `i` of a run draws from its own
//! ChaCha stream `(seed, i)`, so results are bit-identical for any worker
//! count and any scheduling. Parallel maps collect per-sample values in
//! index order and all reductions run sequentially afterwards.
//!
//! The tolerance-scaling study is the empirical stand-in for measure
//! statements: a codimension-one set of periodic orbits shows up as a
//! near-periodic fraction proportional to the tolerance (halving the
//! tolerance halves the fraction), while an open set of periodic orbits
//! yields a fraction that does not move with the tolerance at all.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::billiard::{self, PhasePoint};
use crate::boundary::BoundaryCurve;

/// Outcome of iterating one sample for the return-distance computation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SampleOutcome {
    /// Phase distance between `T^period(x)` and `x`.
    Distance(f64),
    /// Excluded: some bounce hit a corner band.
    Corner,
    /// Excluded: some bounce came out grazing.
    Grazing,
    /// Excluded: the chord search failed (invalid table configuration).
    Other,
}

/// Fraction estimate with its binomial standard error and exclusion counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FractionEstimate {
    pub fraction: f64,
    pub stderr: f64,
    pub hits: u64,
    pub n_effective: usize,
    pub excluded_corner: usize,
    pub excluded_grazing: usize,
    pub excluded_other: usize,
}

/// Result of a tolerance-scaling study over one table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureScan {
    pub table: String,
    pub period: usize,
    pub n: usize,
    pub seed: u64,
    pub tolerances: Vec<f64>,
    pub fractions: Vec<f64>,
    pub stderrs: Vec<f64>,
    pub hits: Vec<u64>,
    pub n_effective: usize,
    pub excluded_corner: usize,
    pub excluded_grazing: usize,
    pub excluded_other: usize,
}

/// Which phase-space density the sampler draws from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampler {
    /// The invariant density: `s` uniform, `phi` with density sin(phi)/2.
    MuWeighted,
    /// Deliberately wrong control: `phi` uniform on (0, pi). Not invariant
    /// on curved (non-circular) tables; the invariance test must fail on it.
    UniformPhi,
}

fn draw(b: &BoundaryCurve, seed: u64, index: u64, sampler: Sampler) -> PhasePoint {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let s = rng.random::<f64>() * b.total_length();
    let u: f64 = rng.random();
    let phi = match sampler {
        // inverse CDF of sin(phi)/2 on (0, pi)
        Sampler::MuWeighted => (1.0 - 2.0 * u).clamp(-1.0, 1.0).acos(),
        Sampler::UniformPhi => u * std::f64::consts::PI,
    };
    PhasePoint::new(s, phi)
}

/// Draw `n` phase points from the invariant measure. Deterministic in
/// `(table, n, seed)`; sample `i` never depends on the other samples.
pub fn sample_mu(b: &BoundaryCurve, n: usize, seed: u64) -> Vec<PhasePoint> {
    (0..n as u64)
        .into_par_iter()
        .map(|i| draw(b, seed, i, Sampler::MuWeighted))
        .collect()
}

/// Phase return distance of `T^period` for every sample.
pub fn return_distances(
    b: &BoundaryCurve,
    samples: &[PhasePoint],
    period: usize,
) -> Vec<SampleOutcome> {
    let length = b.total_length();
    samples
        .par_iter()
        .map(|p| match billiard::iterate(b, p, period) {
            Ok(orbit) => SampleOutcome::Distance(p.distance(&orbit.end, length)),
            Err(e) if e.is_corner() => SampleOutcome::Corner,
            Err(e) if e.is_grazing() => SampleOutcome::Grazing,
            Err(_) => SampleOutcome::Other,
        })
        .collect()
}

fn fraction_at(outcomes: &[SampleOutcome], eps: f64) -> FractionEstimate {
    let mut hits = 0u64;
    let mut n_effective = 0usize;
    let (mut corner, mut grazing, mut other) = (0usize, 0usize, 0usize);
    for o in outcomes {
        match o {
            SampleOutcome::Distance(d) => {
                n_effective += 1;
                if *d < eps {
                    hits += 1;
                }
            }
            SampleOutcome::Corner => corner += 1,
            SampleOutcome::Grazing => grazing += 1,
            SampleOutcome::Other => other += 1,
        }
    }
    let f = if n_effective > 0 {
        hits as f64 / n_effective as f64
    } else {
        0.0
    };
    let stderr = if n_effective > 0 {
        (f * (1.0 - f) / n_effective as f64).sqrt()
    } else {
        0.0
    };
    FractionEstimate {
        fraction: f,
        stderr,
        hits,
        n_effective,
        excluded_corner: corner,
        excluded_grazing: grazing,
        excluded_other: other,
    }
}

/// Fraction of samples whose `T^period` return distance is below `eps`.
/// Corner and grazing samples are excluded from the denominator and
/// reported separately.
pub fn periodic_fraction(
    b: &BoundaryCurve,
    samples: &[PhasePoint],
    eps: f64,
    period: usize,
) -> FractionEstimate {
    assert!(eps > 0.0);
    fraction_at(&return_distances(b, samples, period), eps)
}

/// Near-periodic fractions at tolerances `eps0 * 2^-k`, k = 0..=halvings,
/// all evaluated on the same sample set.
pub fn scaling_study(
    b: &BoundaryCurve,
    n: usize,
    eps0: f64,
    halvings: usize,
    seed: u64,
    period: usize,
) -> MeasureScan {
    assert!(halvings >= 3, "a scaling study needs at least 3 halvings");
    let samples = sample_mu(b, n, seed);
    let outcomes = return_distances(b, &samples, period);
    let mut tolerances = Vec::with_capacity(halvings + 1);
    let mut fractions = Vec::with_capacity(halvings + 1);
    let mut stderrs = Vec::with_capacity(halvings + 1);
    let mut hits = Vec::with_capacity(halvings + 1);
    // exclusion counts do not depend on the tolerance
    let mut counts = fraction_at(&outcomes, eps0);
    for k in 0..=halvings {
        let eps = eps0 * 0.5f64.powi(k as i32);
        counts = fraction_at(&outcomes, eps);
        tolerances.push(eps);
        fractions.push(counts.fraction);
        stderrs.push(counts.stderr);
        hits.push(counts.hits);
    }
    MeasureScan {
        table: b.table_id(),
        period,
        n,
        seed,
        tolerances,
        fractions,
        stderrs,
        hits,
        n_effective: counts.n_effective,
        excluded_corner: counts.excluded_corner,
        excluded_grazing: counts.excluded_grazing,
        excluded_other: counts.excluded_other,
    }
}

/// One test function of the invariance check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionCheck {
    pub name: String,
    pub mean_before: f64,
    pub mean_after: f64,
    pub diff: f64,
    pub combined_se: f64,
    pub pass: bool,
}

/// Result of the empirical invariance test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvarianceReport {
    pub table: String,
    pub sampler: Sampler,
    pub n: usize,
    pub n_used: usize,
    pub seed: u64,
    pub checks: Vec<FunctionCheck>,
    pub pass: bool,
}

/// Compare empirical means of test functions before and after one
/// application of the billiard map on a sampled ensemble. Under the
/// invariant sampler every mean difference stays within 3 combined standard
/// errors; the uniform-phi control sampler must fail this on tables whose
/// map does not conserve the angle.
pub fn invariance_test_with_sampler(
    b: &BoundaryCurve,
    n: usize,
    seed: u64,
    sampler: Sampler,
) -> InvarianceReport {
    let length = b.total_length();
    let pairs: Vec<Option<(PhasePoint, PhasePoint)>> = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let p = draw(b, seed, i, sampler);
            billiard::next_collision(b, &p).ok().map(|(q, _)| (p, q))
        })
        .collect();

    let survivors: Vec<(PhasePoint, PhasePoint)> = pairs.into_iter().flatten().collect();
    let n_used = survivors.len();
    let fns: [(&str, fn(&PhasePoint, f64) -> f64); 3] = [
        ("cos_phi", |p, _| p.phi.cos()),
        ("cos_2phi", |p, _| (2.0 * p.phi).cos()),
        ("s_over_length", |p, length| p.s / length),
    ];
    let mut checks = Vec::new();
    let mut pass = true;
    for (name, f) in fns {
        let before: Vec<f64> = survivors.iter().map(|(p, _)| f(p, length)).collect();
        let after: Vec<f64> = survivors.iter().map(|(_, q)| f(q, length)).collect();
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len().max(1) as f64;
        let var = |v: &[f64], m: f64| {
            v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len().max(2) - 1) as f64
        };
        let (mb, ma) = (mean(&before), mean(&after));
        let se = ((var(&before, mb) + var(&after, ma)) / n_used.max(1) as f64).sqrt();
        let diff = ma - mb;
        let ok = diff.abs() < 3.0 * se;
        pass &= ok;
        checks.push(FunctionCheck {
            name: name.to_string(),
            mean_before: mb,
            mean_after: ma,
            diff,
            combined_se: se,
            pass: ok,
        });
    }
    InvarianceReport {
        table: b.table_id(),
        sampler,
        n,
        n_used,
        seed,
        checks,
        pass,
    }
}

/// Invariance test under the proper mu-weighted sampler.
pub fn invariance_test(b: &BoundaryCurve, n: usize, seed: u64) -> InvarianceReport {
    invariance_test_with_sampler(b, n, seed, Sampler::MuWeighted)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::{make_family, FamilyDescriptor};
    use crate::surface::Curvature;
    use std::f64::consts::PI;

    fn circle_e2() -> BoundaryCurve {
        make_family(&FamilyDescriptor::GeodesicCircle {
            kappa: Curvature::Euclidean,
            r: 1.0,
        })
        .unwrap()
    }

    #[test]
    fn mu_sampler_moments() {
        let b = circle_e2();
        let n = 100_000;
        let samples = sample_mu(&b, n, 5);
        let mean_cos = samples.iter().map(|p| p.phi.cos()).sum::<f64>() / n as f64;
        // Var(cos phi) = 1/3 under the sin density
        let se_cos = (1.0 / 3.0 / n as f64).sqrt();
        assert!(mean_cos.abs() < 3.0 * se_cos, "mean cos = {mean_cos}");

        let mean_phi = samples.iter().map(|p| p.phi).sum::<f64>() / n as f64;
        let var_phi = samples
            .iter()
            .map(|p| (p.phi - mean_phi).powi(2))
            .sum::<f64>()
            / (n - 1) as f64;
        let se_phi = (var_phi / n as f64).sqrt();
        assert!((mean_phi - PI / 2.0).abs() < 3.0 * se_phi);

        for p in &samples {
            assert!(p.s >= 0.0 && p.s < b.total_length());
            assert!(p.phi >= 0.0 && p.phi <= PI);
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let b = circle_e2();
        let a = sample_mu(&b, 1000, 42);
        let c = sample_mu(&b, 1000, 42);
        assert_eq!(a, c);
        let d = sample_mu(&b, 1000, 43);
        assert_ne!(a, d);
    }

    #[test]
    fn octant_is_three_periodic_in_measure() {
        let b = make_family(&FamilyDescriptor::OctantS2).unwrap();
        let samples = sample_mu(&b, 2000, 7);
        let est = periodic_fraction(&b, &samples, 1e-6, 3);
        assert!(
            est.fraction >= 0.99,
            "octant fraction {} (n_eff {})",
            est.fraction,
            est.n_effective
        );
        // corner-band exclusions stay rare
        let excluded = est.excluded_corner + est.excluded_grazing + est.excluded_other;
        assert!((excluded as f64) < 0.01 * samples.len() as f64);
    }

    #[test]
    fn hemisphere_is_two_periodic_in_measure() {
        let b = make_family(&FamilyDescriptor::HemisphereS2).unwrap();
        let samples = sample_mu(&b, 1000, 9);
        let est = periodic_fraction(&b, &samples, 1e-8, 2);
        assert!(est.fraction >= 0.99, "hemisphere fraction {}", est.fraction);
    }

    #[test]
    fn generic_table_has_small_near_periodic_fraction() {
        let b = make_family(&FamilyDescriptor::EllipseEuclidean { a: 1.2, b: 1.0 }).unwrap();
        let samples = sample_mu(&b, 4000, 11);
        let est = periodic_fraction(&b, &samples, 1e-3, 3);
        assert!(est.fraction < 0.05, "ellipse fraction {}", est.fraction);
    }

    #[test]
    fn scan_fractions_are_monotone_and_consistent() {
        let b = make_family(&FamilyDescriptor::EllipseEuclidean { a: 1.2, b: 1.0 }).unwrap();
        let scan = scaling_study(&b, 4000, 1e-2, 4, 13, 3);
        for k in 1..scan.fractions.len() {
            assert!(scan.fractions[k] <= scan.fractions[k - 1] + 1e-15);
        }
        for k in 0..scan.fractions.len() {
            let f = scan.hits[k] as f64 / scan.n_effective as f64;
            assert!((f - scan.fractions[k]).abs() < 1e-15);
            let se = (f * (1.0 - f) / scan.n_effective as f64).sqrt();
            assert!((se - scan.stderrs[k]).abs() < 1e-15);
        }
    }

    #[test]
    fn octant_fraction_is_tolerance_independent() {
        let b = make_family(&FamilyDescriptor::OctantS2).unwrap();
        let scan = scaling_study(&b, 2000, 1e-3, 3, 17, 3);
        let f0 = scan.fractions[0];
        for k in 1..scan.fractions.len() {
            let dilation = (scan.fractions[k] - f0).abs();
            assert!(
                dilation <= 2.0 * (scan.stderrs[k] + scan.stderrs[0]),
                "octant fraction moved with the tolerance: {} vs {}",
                scan.fractions[k],
                f0
            );
        }
    }

    #[test]
    fn invariance_holds_for_mu_and_fails_for_uniform_phi() {
        let circle = circle_e2();
        let report = invariance_test(&circle, 30_000, 19);
        assert!(report.pass, "{report:?}");

        let disk = make_family(&FamilyDescriptor::GeodesicCircle {
            kappa: Curvature::Hyperbolic,
            r: 1.0,
        })
        .unwrap();
        let report = invariance_test(&disk, 30_000, 21);
        assert!(report.pass, "{report:?}");

        // the angle is conserved exactly on circles, so the wrong sampler is
        // probed on an eccentric ellipse where the map reshuffles phi
        let ellipse = make_family(&FamilyDescriptor::EllipseEuclidean { a: 1.5, b: 1.0 }).unwrap();
        let ok = invariance_test(&ellipse, 30_000, 23);
        assert!(ok.pass, "{ok:?}");
        let bad = invariance_test_with_sampler(&ellipse, 30_000, 23, Sampler::UniformPhi);
        assert!(!bad.pass, "uniform-phi sampler unexpectedly passed: {bad:?}");
    }

    #[test]
    fn scans_are_identical_across_worker_counts() {
        let b = make_family(&FamilyDescriptor::EllipseEuclidean { a: 1.2, b: 1.0 }).unwrap();
        let pool1 = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let pool4 = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap();
        let scan1 = pool1.install(|| scaling_study(&b, 2000, 1e-2, 3, 29, 3));
        let scan4 = pool4.install(|| scaling_study(&b, 2000, 1e-2, 3, 29, 3));
        assert_eq!(scan1, scan4);
    }
}
