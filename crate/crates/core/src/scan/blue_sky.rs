use rayon::prelude::*;

use super::{Family, ScanRecord, ScanResult, Tag};
use crate::analysis::find_periodic_points;
use crate::error::{Error, Result};
use crate::zoo::{make_circle_family, saddle_node_passage_time, PeriodicFn};

/// The passage is measured from `z = −PASSAGE_Z` to `z = PASSAGE_Z`.
pub const PASSAGE_Z: f64 = 1.0;

/// Period of the orbit born in the blue-sky catastrophe: number of returns
/// of the attracting cycle times the passage time of `ż = μ + z²`.
pub fn blue_sky_period(mu: f64, returns: usize) -> f64 {
    returns as f64 * saddle_node_passage_time(mu, -PASSAGE_Z, PASSAGE_Z)
}

/// Sweep of `μ > 0` for the return map `θ̄ = g(θ) + ω`.
///
/// Fails with a precondition error unless `max |g′| < 1`. At each `μ` the
/// fixed points of the return map are enumerated; a unique attracting one
/// gives a `blue_sky` record with the reconstructed period, anything else
/// is tagged `hypothesis_violation`.
pub fn blue_sky_scan(omega: f64, g: &PeriodicFn, mus: &[f64]) -> Result<ScanResult> {
    let dg = g.max_abs_derivative(100_000);
    if !(dg < 1.0) {
        return Err(Error::Precondition(format!("max |g'| = {dg} is not below 1")));
    }
    if let Some(m) = mus.iter().find(|m| !(**m > 0.0 && m.is_finite())) {
        return Err(Error::param("mu", format!("{m} is not a positive number")));
    }
    let map = make_circle_family(0, g.clone(), omega)?;
    let fixed = find_periodic_points(&map, 1, &[])?;
    let attracting: Vec<_> = fixed.iter().filter(|r| r.is_attracting()).collect();
    let records = mus
        .par_iter()
        .enumerate()
        .map(|(i, &mu)| {
            let base = ScanRecord::new(vec![i], vec![mu], Tag::HypothesisViolation)
                .diag("max_dg", dg)
                .diag("fixed_points", fixed.len() as f64)
                .diag("attracting", attracting.len() as f64);
            if attracting.len() != 1 {
                return base.note("reason", "return map lacks a unique attracting fixed point");
            }
            let fp = attracting[0];
            let returns = fp.minimal_period;
            let period = blue_sky_period(mu, returns);
            ScanRecord { tag: Tag::BlueSky, ..base }
                .diag("fixed_point", fp.point[0])
                .diag("multiplier", fp.multipliers.first().map_or(f64::NAN, |m| m[0]))
                .diag("returns", returns as f64)
                .diag("passage_time", saddle_node_passage_time(mu, -PASSAGE_Z, PASSAGE_Z))
                .diag("period", period)
                .diag("scaling_ratio", period * mu.sqrt() / std::f64::consts::PI)
        })
        .collect();
    Ok(ScanResult::new(Family::BlueSky, &["mu"], vec![mus.len()], records))
}
