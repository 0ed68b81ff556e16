use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{point_seed, Family, ScanRecord, ScanResult, Tag};
use crate::analysis::find_periodic_points;
use crate::dynsys::{wrap, wrapped_diff};
use crate::error::Result;
use crate::zoo::{make_circle_family, PeriodicFn};

/// Exponents within this distance of 0 are classified as rotation. Finite
/// orbit averages on an invariant circle decay like 1/ITERATES.
pub const ROTATION_TOL: f64 = 1e-3;
const TRANSIENT: usize = 1000;
const ITERATES: usize = 10_000;

/// Lyapunov exponent of `θ̄ = mθ + g(θ) + ω` along the orbit of `theta0`.
pub fn circle_lyapunov(m: i64, g: &PeriodicFn, omega: f64, theta0: f64) -> f64 {
    let step = |t: f64| wrap(m as f64 * t + g.value(t) + omega, 1.0);
    let mut t = theta0;
    for _ in 0..TRANSIENT {
        t = step(t);
    }
    let mut sum = 0.0;
    for _ in 0..ITERATES {
        sum += (m as f64 + g.derivative(t)).abs().max(f64::MIN_POSITIVE).ln();
        t = step(t);
    }
    sum / ITERATES as f64
}

/// Classifies every `ω` of the family `θ̄ = mθ + g(θ) + ω` as
/// `fixed_point` (`m = 0` and `max |g′| < 1`, confirmed by convergence of 8
/// orbits), `rotation` (`|λ| ≤ 1e-6`), `expanding_chaos` (`λ > 1e-6`) or
/// `locked` (`λ < −1e-6`). With `periodic`, attracting points of period
/// up to 4 are counted.
pub fn circle_family_scan(
    m: i64,
    g: &PeriodicFn,
    omegas: &[f64],
    seed: u64,
    periodic: bool,
) -> Result<ScanResult> {
    let dg = g.max_abs_derivative(100_000);
    let models = omegas
        .iter()
        .map(|w| make_circle_family(m, g.clone(), *w))
        .collect::<Result<Vec<_>>>()?;
    let records = omegas
        .par_iter()
        .enumerate()
        .map(|(i, &omega)| {
            let mut rng = ChaCha8Rng::seed_from_u64(point_seed(seed, i));
            let lambda = circle_lyapunov(m, g, omega, rng.gen());
            let mut rec = ScanRecord::new(vec![i], vec![omega], Tag::Rotation)
                .diag("lyapunov", lambda)
                .diag("max_dg", dg);
            rec.tag = if m == 0 && dg < 1.0 {
                let step = |t: f64| wrap(g.value(t) + omega, 1.0);
                let ends: Vec<f64> = (0..8)
                    .map(|_| (0..2000).fold(rng.gen::<f64>(), |t, _| step(t)))
                    .collect();
                let spread = ends
                    .iter()
                    .map(|e| wrapped_diff(*e, ends[0], 1.0).abs())
                    .fold(0.0, f64::max);
                rec = rec.diag("fixed_point", ends[0]).diag("spread", spread);
                if spread < 1e-9 {
                    Tag::FixedPoint
                } else {
                    Tag::Locked
                }
            } else if lambda.abs() <= ROTATION_TOL {
                Tag::Rotation
            } else if lambda > 0.0 && !(m.abs() == 1 && dg < 1.0) {
                Tag::ExpandingChaos
            } else if lambda > 0.0 {
                // A circle diffeomorphism has no positive exponent.
                Tag::Rotation
            } else {
                Tag::Locked
            };
            if periodic {
                let count = (1..=4)
                    .filter_map(|n| find_periodic_points(&models[i], n, &[]).ok())
                    .map(|r| r.iter().filter(|p| p.is_attracting() && p.minimal_period == p.period).count())
                    .sum::<usize>();
                rec = rec.diag("attracting_periodic", count as f64);
            }
            rec
        })
        .collect();
    Ok(ScanResult::new(Family::CircleFamily, &["omega"], vec![omegas.len()], records))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_reference_classes() {
        let w: Vec<f64> = (0..5).map(|i| i as f64 / 5.0 + 0.01).collect();
        let r = circle_family_scan(0, &PeriodicFn::sine(0.1), &w, 1, false).unwrap();
        assert!(r.tags().iter().all(|t| *t == Tag::FixedPoint));
        let r = circle_family_scan(1, &PeriodicFn::Zero, &w, 1, false).unwrap();
        assert!(r.tags().iter().all(|t| *t == Tag::Rotation));
        assert!(r.column("lyapunov").iter().all(|l| l.abs() < 1e-6));
        let r = circle_family_scan(2, &PeriodicFn::Zero, &w, 1, false).unwrap();
        assert!(r.tags().iter().all(|t| *t == Tag::ExpandingChaos));
        assert!(r.column("lyapunov").iter().all(|l| (l - 2f64.ln()).abs() < 1e-12));
    }

    #[test]
    fn diffeomorphisms_never_tag_chaos() {
        let w: Vec<f64> = (0..101).map(|i| i as f64 / 100.0).collect();
        let r = circle_family_scan(1, &PeriodicFn::sine(0.1), &w, 1, false).unwrap();
        assert!(r.tags().iter().all(|t| matches!(t, Tag::Rotation | Tag::Locked)));
        assert!(r.tags().contains(&Tag::Rotation) && r.tags().contains(&Tag::Locked));
    }
}
