use serde::{Deserialize, Serialize};

use crate::dynsys::{wrapped_diff, Orbit};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecurrenceResult {
    /// Times of the samples that enter the ball (the previous sample lies
    /// outside, or it is the first sample).
    pub entries: Vec<f64>,
    /// Differences of successive entry times.
    pub gaps: Vec<f64>,
    pub max_gap: f64,
}

/// Re-entry times of `orbit` into the closed ball of the given radius around
/// `center`, with distances wrapped on the orbit's angular coordinates.
pub fn recurrence_times(orbit: &Orbit, center: &[f64], radius: f64) -> Result<RecurrenceResult> {
    if center.len() != orbit.dim() {
        return Err(Error::Dimension {
            expected: orbit.dim(),
            got: center.len(),
        });
    }
    if !(radius > 0.0) {
        return Err(Error::param("radius", "must be positive"));
    }
    let periods = &orbit.meta.periods;
    let inside = |s: &[f64]| {
        let d2: f64 = s
            .iter()
            .zip(center)
            .enumerate()
            .map(|(i, (a, b))| {
                let d = match periods.get(i).copied().flatten() {
                    Some(p) => wrapped_diff(*a, *b, p),
                    None => a - b,
                };
                d * d
            })
            .sum();
        d2 <= radius * radius
    };
    let mut entries = Vec::new();
    let mut was_inside = false;
    for (t, s) in orbit.iter() {
        let now = inside(s);
        if now && !was_inside {
            entries.push(t);
        }
        was_inside = now;
    }
    if entries.len() < 2 {
        return Err(Error::InsufficientRecurrence { visits: entries.len() });
    }
    let gaps: Vec<f64> = entries.windows(2).map(|w| w[1] - w[0]).collect();
    let max_gap = gaps.iter().copied().fold(0.0, f64::max);
    Ok(RecurrenceResult { entries, gaps, max_gap })
}
