use super::map1d::{FitInfo, IntervalMap1D};
use crate::dynsys::SystemModel;
use crate::error::{Error, Result};

/// Bins per branch of the empirical fit.
pub const REDUCTION_BINS: usize = 512;
/// Largest admissible fit residual relative to the sampled span of `y`.
pub const REDUCTION_THRESHOLD: f64 = 1e-3;
const SEEDS: usize = 256;

struct Sample {
    x: f64,
    y: f64,
    gy: f64,
}

/// Additive-recurrence seeds in `(−1, 1)²`; non-dyadic so that doubling-type
/// maps do not land on 0 after a few steps.
#[allow(clippy::approx_constant)]
fn seeds() -> Vec<[f64; 2]> {
    let (a, b) = (0.618_033_988_749_894_9, 0.414_213_562_373_095_1);
    (0..SEEDS)
        .map(|k| {
            let k = k as f64 + 1.0;
            [2.0 * (a * k).fract() - 1.0, 2.0 * (b * k + 0.318_309_886).fract() - 1.0]
        })
        .collect()
}

fn collect(map: &SystemModel, n_transient: usize, n_fit: usize) -> Vec<Sample> {
    let seeds = seeds();
    let per_seed = n_fit.div_ceil(seeds.len()).max(1);
    let mut samples = Vec::with_capacity(per_seed * seeds.len());
    let mut out = [0.0; 2];
    'seed: for seed in seeds {
        let mut s = seed;
        for step in 0..n_transient + per_seed {
            if !(s[1] != 0.0 && s[0].is_finite() && s[1].abs() <= 1.0 && s[0].abs() <= 1.0) {
                continue 'seed;
            }
            map.apply(&s, &mut out);
            if step >= n_transient && out[1].is_finite() {
                samples.push(Sample { x: s[0], y: s[1], gy: out[1] });
            }
            s = out;
        }
    }
    samples
}

fn slope(points: &[&Sample]) -> f64 {
    let n = points.len() as f64;
    if points.len() < 2 {
        return f64::NAN;
    }
    let my = points.iter().map(|p| p.y).sum::<f64>() / n;
    let mg = points.iter().map(|p| p.gy).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.y - my) * (p.gy - mg)).sum();
    let sxx: f64 = points.iter().map(|p| (p.y - my).powi(2)).sum();
    sxy / sxx
}

/// Knots from bin means; bins are quadratically graded toward `y = 0`.
/// Returns the knots (without the limit knot) and the mean `x` of the bin
/// nearest to 0.
fn branch_knots(points: &[&Sample], reach: f64) -> (Vec<[f64; 2]>, f64) {
    let mut acc = vec![(0.0, 0.0, 0.0, 0usize); REDUCTION_BINS];
    for p in points {
        let t = (p.y.abs() / reach).sqrt();
        let b = ((t * REDUCTION_BINS as f64) as usize).min(REDUCTION_BINS - 1);
        acc[b].0 += p.y;
        acc[b].1 += p.gy;
        acc[b].2 += p.x;
        acc[b].3 += 1;
    }
    let near_x = acc
        .iter()
        .find(|a| a.3 > 0)
        .map(|a| a.2 / a.3 as f64)
        .unwrap_or(0.0);
    let knots = acc
        .iter()
        .filter(|a| a.3 > 0)
        .map(|a| [a.0 / a.3 as f64, a.1 / a.3 as f64])
        .collect();
    (knots, near_x)
}

/// Empirical `ȳ = G(y)` on the attractor of a two-dimensional Lorenz-type
/// map with locus `{y = 0}`. 256 seeds are iterated
/// `n_transient` times; the following iterates (about `n_fit` in total) are
/// binned per branch and interpolated. Fails with
/// [`Error::ReductionInvalid`] when `ȳ` is not a function of `y` to within
/// [`REDUCTION_THRESHOLD`] of the sampled span.
pub fn reduce_to_1d(map: &SystemModel, n_transient: usize, n_fit: usize) -> Result<IntervalMap1D> {
    if !map.is_map() || map.dim() != 2 {
        return Err(Error::Precondition("reduction expects a two-dimensional map".into()));
    }
    if !map.locus.is_some_and(|l| l.coord == 1 && l.value == 0.0) {
        return Err(Error::Precondition("reduction expects the locus {y = 0}".into()));
    }
    if n_fit == 0 {
        return Err(Error::param("n_fit", "must be positive"));
    }
    let samples = collect(map, n_transient, n_fit);
    if samples.len() < 4 {
        return Err(Error::Precondition(format!(
            "only {} samples survived the transient; orbits escape or hit the locus",
            samples.len()
        )));
    }
    let left: Vec<&Sample> = samples.iter().filter(|p| p.y < 0.0).collect();
    let right: Vec<&Sample> = samples.iter().filter(|p| p.y > 0.0).collect();
    let ymin = samples.iter().map(|p| p.y).fold(f64::INFINITY, f64::min);
    let ymax = samples.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max);
    let span = (ymax - ymin).max(f64::MIN_POSITIVE);

    let limit = |x: f64, y: f64| {
        let mut out = [0.0; 2];
        map.apply(&[x, y], &mut out);
        out[1]
    };
    let (mut lk, lx) = branch_knots(&left, (-ymin).max(f64::MIN_POSITIVE));
    let (mut rk, rx) = branch_knots(&right, ymax.max(f64::MIN_POSITIVE));
    lk.push([0.0, limit(lx, -f64::MIN_POSITIVE)]);
    rk.insert(0, [0.0, limit(rx, f64::MIN_POSITIVE)]);
    let mut g = IntervalMap1D::from_knots(lk, rk, &format!("reduced {}", map.id))?;

    let residual = samples
        .iter()
        .map(|p| (p.gy - g.eval(p.y).unwrap_or(f64::NAN)).abs())
        .fold(0.0f64, |m, r| if r.is_nan() { f64::INFINITY } else { m.max(r) })
        / span;
    if !(residual <= REDUCTION_THRESHOLD) {
        return Err(Error::ReductionInvalid {
            residual,
            threshold: REDUCTION_THRESHOLD,
        });
    }
    g.fit = Some(FitInfo {
        residual,
        threshold: REDUCTION_THRESHOLD,
        samples: samples.len(),
        slopes: [slope(&left), slope(&right)],
        span: [ymin, ymax],
    });
    Ok(g)
}
