use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_POINTS: usize = 10_000;
pub const MIN_SCALES: usize = 4;
/// Fits with a lower coefficient of determination are flagged.
pub const MIN_R_SQUARED: f64 = 0.98;

/// Dyadic levels `k` in `lo..=hi`; the box side at level `k` is `L·2⁻ᵏ` with
/// `L` the longest side of the bounding box.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScaleRange {
    pub lo: u32,
    pub hi: u32,
}

impl ScaleRange {
    pub fn dyadic(lo: u32, hi: u32) -> Self {
        ScaleRange { lo, hi }
    }

    pub fn len(&self) -> usize {
        (self.hi.saturating_sub(self.lo) + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.hi < self.lo
    }
}

impl Default for ScaleRange {
    fn default() -> Self {
        ScaleRange { lo: 2, hi: 8 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxCountResult {
    pub dimension: f64,
    pub r_squared: f64,
    /// `r² < 0.98`.
    pub degenerate: bool,
    pub sides: Vec<f64>,
    pub counts: Vec<usize>,
    pub points: usize,
}

/// Least-squares slope of `log N(h)` against `log(1/h)` over dyadic scales.
pub fn box_counting_dimension(points: &[Vec<f64>], scales: ScaleRange) -> Result<BoxCountResult> {
    if points.len() < MIN_POINTS {
        return Err(Error::Precondition(format!(
            "box counting needs at least {MIN_POINTS} points, got {}",
            points.len()
        )));
    }
    if scales.is_empty() || scales.len() < MIN_SCALES || scales.hi > 40 {
        return Err(Error::param("scales", format!("need {MIN_SCALES} to 41 dyadic levels")));
    }
    let d = points[0].len();
    if d == 0 || points.iter().any(|p| p.len() != d) {
        return Err(Error::Dimension {
            expected: d,
            got: points.iter().map(Vec::len).find(|&l| l != d).unwrap_or(0),
        });
    }
    if points.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::param("points", "must be finite"));
    }
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for p in points {
        for i in 0..d {
            lo[i] = lo[i].min(p[i]);
            hi[i] = hi[i].max(p[i]);
        }
    }
    let side = (0..d).map(|i| hi[i] - lo[i]).fold(0.0f64, f64::max);
    if !(side > 0.0) {
        return Err(Error::Precondition("point cloud has zero extent".into()));
    }
    let levels: Vec<u32> = (scales.lo..=scales.hi).collect();
    let counts: Vec<usize> = levels
        .par_iter()
        .map(|&k| {
            let cells = (1u64 << k) as f64;
            let max = (1i64 << k) - 1;
            let mut seen = HashSet::with_capacity(points.len().min(1 << 20));
            for p in points {
                let key: Vec<i64> = (0..d)
                    .map(|i| (((p[i] - lo[i]) / side * cells) as i64).min(max))
                    .collect();
                seen.insert(key);
            }
            seen.len()
        })
        .collect();
    let xs: Vec<f64> = levels.iter().map(|&k| k as f64 * 2f64.ln()).collect();
    let ys: Vec<f64> = counts.iter().map(|&c| (c as f64).ln()).collect();
    let (slope, r2) = linear_fit(&xs, &ys);
    Ok(BoxCountResult {
        dimension: slope,
        r_squared: r2,
        degenerate: !(r2 >= MIN_R_SQUARED),
        sides: levels.iter().map(|&k| side / (1u64 << k) as f64).collect(),
        counts,
        points: points.len(),
    })
}

/// Slope and coefficient of determination of the least-squares line.
pub(crate) fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, r2)
}
