use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynsys::{jacobian_at, Coord, SystemModel};
use crate::error::{Error, Result};

/// Modulus margin around 1 used by the stability classification.
pub const UNIT_TOL: f64 = 1e-9;
/// Roots closer than this (wrapped distance) are the same point.
pub const DEDUP_TOL: f64 = 1e-7;
/// Largest accepted residual `‖Tⁿ(s) − s‖` of a root.
pub const ROOT_TOL: f64 = 1e-9;
const NEWTON_ITER: usize = 60;
const LIFT_GRID_CAP: usize = 1 << 24;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stability {
    Attracting,
    Saddle,
    Repelling,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodicOrbitRecord {
    /// Requested period `n`; the point solves `Tⁿ(s) = s`.
    pub period: usize,
    /// Smallest divisor `d` of `n` with `Tᵈ(s) = s`.
    pub minimal_period: usize,
    pub point: Vec<f64>,
    /// Eigenvalues of `DTⁿ(s)` as `[re, im]`, decreasing modulus.
    pub multipliers: Vec<[f64; 2]>,
    pub stability: Stability,
    /// Some multiplier has modulus within [`UNIT_TOL`] of 1.
    pub neutral: bool,
    /// The period-map Jacobian could not be evaluated at the root (locus
    /// contact or non-finite entries); multipliers are then empty and the
    /// class is `saddle`.
    pub singular: bool,
    pub residual: f64,
}

impl PeriodicOrbitRecord {
    pub fn is_attracting(&self) -> bool {
        self.stability == Stability::Attracting
    }
}

/// Class from multiplier moduli: attracting iff all lie below `1 − 1e-9`,
/// repelling iff all exceed `1 + 1e-9`.
pub fn classify(moduli: &[f64]) -> (Stability, bool) {
    let neutral = moduli.iter().any(|m| (m - 1.0).abs() <= UNIT_TOL);
    let class = if !moduli.is_empty() && moduli.iter().all(|m| *m < 1.0 - UNIT_TOL) {
        Stability::Attracting
    } else if !moduli.is_empty() && moduli.iter().all(|m| *m > 1.0 + UNIT_TOL) {
        Stability::Repelling
    } else {
        Stability::Saddle
    };
    (class, neutral)
}

/// `count` reproducible seeds uniform in the model domain; unbounded real
/// coordinates are sampled in `[−1, 1]`.
pub fn seed_grid(model: &SystemModel, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            model
                .coords
                .iter()
                .map(|c| match *c {
                    Coord::Angle { period } => rng.gen::<f64>() * period,
                    Coord::Real { lo, hi } => {
                        let (lo, hi) = (lo.max(-1.0).min(hi), hi.min(1.0).max(lo));
                        if lo.is_finite() && hi.is_finite() && hi > lo {
                            lo + rng.gen::<f64>() * (hi - lo)
                        } else {
                            lo
                        }
                    }
                })
                .collect()
        })
        .collect()
}

/// Points of period `n` of a map.
///
/// Circle maps with a lift are searched exhaustively: `Fⁿ(x) − x` is sampled
/// on a grid of `[0, 1)` fine enough to resolve its laps and each integer
/// crossing is bisected; `seeds` are ignored. Every other map runs damped
/// Newton on `Tⁿ(s) − s = 0` from each seed. Results are deduplicated and
/// sorted by coordinates.
pub fn find_periodic_points(
    model: &SystemModel,
    n: usize,
    seeds: &[Vec<f64>],
) -> Result<Vec<PeriodicOrbitRecord>> {
    if !model.is_map() {
        return Err(Error::WrongKind { expected: "map" });
    }
    if n == 0 {
        return Err(Error::param("period", "must be at least 1"));
    }
    let lifted = model.dim() == 1
        && model.coords[0] == Coord::unit_angle()
        && model.rule().circle_lift(0.0).is_some();
    let mut records = if lifted {
        lift_search(model, n)?
    } else {
        if let Some(s) = seeds.iter().find(|s| s.len() != model.dim()) {
            return Err(Error::Dimension {
                expected: model.dim(),
                got: s.len(),
            });
        }
        let roots: Vec<(Vec<f64>, f64)> = seeds
            .par_iter()
            .filter_map(|s| newton(model, n, s))
            .collect();
        let mut kept: Vec<(Vec<f64>, f64)> = Vec::new();
        for (p, r) in roots {
            if !kept.iter().any(|(q, _)| model.distance(&p, q) < DEDUP_TOL) {
                kept.push((p, r));
            }
        }
        kept.into_iter().map(|(p, r)| record(model, n, p, r)).collect()
    };
    records.sort_by(|a, b| {
        a.point
            .iter()
            .zip(&b.point)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| *o != Ordering::Equal)
            .unwrap_or(Ordering::Equal)
    });
    Ok(records)
}

fn step(model: &SystemModel, s: &[f64]) -> Vec<f64> {
    let mut out = model.eval(s);
    model.reduce(&mut out);
    out
}

fn power(model: &SystemModel, s: &[f64], n: usize) -> Vec<f64> {
    (0..n).fold(s.to_vec(), |s, _| step(model, &s))
}

fn residual(model: &SystemModel, s: &[f64], n: usize) -> f64 {
    let t = power(model, s, n);
    if t.iter().any(|v| !v.is_finite()) {
        return f64::INFINITY;
    }
    model.distance(&t, s)
}

/// `DTⁿ(s)` by the chain rule along the orbit.
fn period_jacobian(model: &SystemModel, s: &[f64], n: usize) -> Option<DMatrix<f64>> {
    let mut j = DMatrix::identity(model.dim(), model.dim());
    let mut x = s.to_vec();
    for _ in 0..n {
        let jx = jacobian_at(model, &x).ok()?.matrix;
        j = jx * j;
        x = step(model, &x);
    }
    j.iter().all(|v| v.is_finite()).then_some(j)
}

fn project(model: &SystemModel, s: &mut [f64]) {
    model.reduce(s);
    for (v, c) in s.iter_mut().zip(&model.coords) {
        if let Coord::Real { lo, hi } = *c {
            *v = v.clamp(lo, hi);
        }
    }
}

fn newton(model: &SystemModel, n: usize, seed: &[f64]) -> Option<(Vec<f64>, f64)> {
    let dim = model.dim();
    let mut s = seed.to_vec();
    project(model, &mut s);
    let mut r = residual(model, &s, n);
    for _ in 0..NEWTON_ITER {
        if r < 1e-13 {
            break;
        }
        let j = period_jacobian(model, &s, n)?;
        let f = DVector::from_vec(model.difference(&power(model, &s, n), &s));
        let a = j - DMatrix::identity(dim, dim);
        let delta = a.lu().solve(&(-f))?;
        let mut lambda = 1.0;
        let mut improved = false;
        for _ in 0..30 {
            let mut t: Vec<f64> = s.iter().zip(delta.iter()).map(|(x, d)| x + lambda * d).collect();
            project(model, &mut t);
            let rt = residual(model, &t, n);
            if rt < r * (1.0 - 1e-4 * lambda) {
                s = t;
                r = rt;
                improved = true;
                break;
            }
            lambda *= 0.5;
        }
        if !improved {
            break;
        }
    }
    (r < ROOT_TOL).then_some((s, r))
}

fn minimal_period(model: &SystemModel, p: &[f64], n: usize) -> usize {
    let mut x = p.to_vec();
    for d in 1..=n {
        x = step(model, &x);
        if n.is_multiple_of(d) && model.distance(&x, p) < DEDUP_TOL {
            return d;
        }
    }
    n
}

fn record(model: &SystemModel, n: usize, point: Vec<f64>, residual: f64) -> PeriodicOrbitRecord {
    let (multipliers, singular) = match period_jacobian(model, &point, n) {
        Some(j) => {
            let mut ev: Vec<[f64; 2]> = j.complex_eigenvalues().iter().map(|c| [c.re, c.im]).collect();
            ev.sort_by(|a, b| b[0].hypot(b[1]).total_cmp(&a[0].hypot(a[1])));
            (ev, false)
        }
        None => (Vec::new(), true),
    };
    lift_record(model, n, point, residual, multipliers, singular)
}

fn lift_record(
    model: &SystemModel,
    n: usize,
    point: Vec<f64>,
    residual: f64,
    multipliers: Vec<[f64; 2]>,
    singular: bool,
) -> PeriodicOrbitRecord {
    let moduli: Vec<f64> = multipliers.iter().map(|m| m[0].hypot(m[1])).collect();
    let (stability, neutral) = classify(&moduli);
    PeriodicOrbitRecord {
        period: n,
        minimal_period: minimal_period(model, &point, n),
        point,
        multipliers,
        stability,
        neutral,
        singular,
        residual,
    }
}

fn lift_power(model: &SystemModel, x: f64, n: usize) -> f64 {
    let rule = model.rule();
    (0..n).fold(x, |x, _| rule.circle_lift(x).unwrap_or(f64::NAN))
}

fn lift_search(model: &SystemModel, n: usize) -> Result<Vec<PeriodicOrbitRecord>> {
    let rule = model.rule();
    let degree = (rule.circle_lift(1.0).unwrap_or(f64::NAN) - rule.circle_lift(0.0).unwrap_or(f64::NAN))
        .round()
        .abs()
        .max(1.0);
    let laps = degree.powi(n as i32);
    if !(laps * 16.0 <= LIFT_GRID_CAP as f64) {
        return Err(Error::ResolutionTooFine {
            count: (laps * 16.0).min(usize::MAX as f64) as usize,
            cap: LIFT_GRID_CAP,
        });
    }
    let grid = ((laps * 16.0) as usize).max(4096);
    let phi = |x: f64| lift_power(model, x, n) - x;
    let roots: Vec<f64> = (0..grid)
        .into_par_iter()
        .flat_map_iter(|i| {
            let a = i as f64 / grid as f64;
            let b = (i + 1) as f64 / grid as f64;
            let (fa, fb) = (phi(a), phi(b));
            let mut found = Vec::new();
            if !(fa.is_finite() && fb.is_finite()) {
                return found;
            }
            // integers k with fa <= k < fb, or fb < k <= fa
            let ks: Vec<f64> = if fb >= fa {
                let k0 = fa.ceil();
                (0..).map(|j| k0 + j as f64).take_while(|k| *k < fb).collect()
            } else {
                let k0 = fa.floor();
                (0..).map(|j| k0 - j as f64).take_while(|k| *k > fb).collect()
            };
            for k in ks {
                let (mut lo, mut hi) = (a, b);
                let up = fb >= fa;
                if phi(lo) - k == 0.0 {
                    found.push(lo);
                    continue;
                }
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    let v = phi(mid) - k;
                    if v == 0.0 {
                        lo = mid;
                        hi = mid;
                        break;
                    }
                    if (v < 0.0) == up {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                found.push(0.5 * (lo + hi));
            }
            found
        })
        .collect();
    let mut kept: Vec<f64> = Vec::new();
    for x in roots {
        let x = crate::dynsys::wrap(x, 1.0);
        if !kept.iter().any(|y| model.distance(&[x], &[*y]) < DEDUP_TOL) {
            kept.push(x);
        }
    }
    Ok(kept
        .into_iter()
        .map(|x| {
            let mut d = 1.0;
            let mut y = x;
            for _ in 0..n {
                d *= rule.circle_lift_derivative(y).unwrap_or(f64::NAN);
                y = rule.circle_lift(y).unwrap_or(f64::NAN);
            }
            let res = model.distance(&[crate::dynsys::wrap(y, 1.0)], &[x]);
            let (mult, singular) = if d.is_finite() { (vec![[d, 0.0]], false) } else { (vec![], true) };
            lift_record(model, n, vec![x], res, mult, singular)
        })
        .collect())
}

/// Iterates `Tⁿ` from `record.point + offset·(1, …, 1)` and reports whether
/// it comes back within [`DEDUP_TOL`]·10 of the orbit in at most `steps`
/// applications of `T`.
pub fn reverify_attracting(model: &SystemModel, record: &PeriodicOrbitRecord, offset: f64, steps: usize) -> bool {
    let mut orbit = vec![record.point.clone()];
    for _ in 1..record.minimal_period {
        let next = step(model, orbit.last().unwrap());
        orbit.push(next);
    }
    let mut x: Vec<f64> = record.point.iter().map(|v| v + offset).collect();
    project(model, &mut x);
    for _ in 0..steps {
        x = step(model, &x);
        if x.iter().any(|v| !v.is_finite()) {
            return false;
        }
        if orbit.iter().any(|p| model.distance(&x, p) < 10.0 * DEDUP_TOL) {
            return true;
        }
    }
    false
}
