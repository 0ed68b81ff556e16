use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{point_seed, Family, ScanRecord, ScanResult, Tag};
use crate::analysis::{box_counting_dimension, lyapunov_spectrum, LyapunovSettings, ScaleRange};
use crate::dynsys::{wrap, Span};
use crate::error::{Error, Result};
use crate::zoo::{make_solid_torus_map, SolidTorusParams};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolenoidSettings {
    /// Angles sampled for the derivative and disjointness checks.
    pub theta_samples: usize,
    /// Points of the fiber section used for box counting.
    pub section_points: usize,
    /// Backward depth of every section point.
    pub depth: usize,
    /// Angle of the fiber section.
    pub theta0: f64,
    pub scales: ScaleRange,
    /// Also estimate the largest Lyapunov exponent of the map.
    pub lyapunov: bool,
}

impl Default for SolenoidSettings {
    fn default() -> Self {
        SolenoidSettings {
            theta_samples: 4096,
            section_points: 20_000,
            depth: 40,
            theta0: 0.123,
            scales: ScaleRange::dyadic(2, 12),
            lyapunov: false,
        }
    }
}

/// The `|m|` preimages in `[0, 1)` of `target` under the angle map at fiber
/// point `x`, increasing.
fn preimages(p: &SolidTorusParams, x: [f64; 2], target: f64) -> Vec<f64> {
    let lift = |t: f64| p.angle_lift(x, t);
    let (l0, l1) = (lift(0.0), lift(1.0));
    let (lo, hi) = (l0.min(l1), l0.max(l1));
    let mut out = Vec::new();
    let mut k = (lo - target).ceil();
    while target + k < hi {
        let v = target + k;
        let (mut a, mut b) = (0.0, 1.0);
        for _ in 0..64 {
            let mid = 0.5 * (a + b);
            if (lift(mid) < v) == (l1 > l0) {
                a = mid;
            } else {
                b = mid;
            }
        }
        out.push(wrap(0.5 * (a + b), 1.0));
        k += 1.0;
    }
    out.sort_by(f64::total_cmp);
    out
}

/// Points of the attractor on the fiber over `theta0`, built backwards:
/// a random branch sequence selects preimages `θ₋₁, …, θ₋D` and the fiber
/// map is applied forward from the disk center along them. When the angle
/// map depends on `x` the chain is re-solved with the fiber points of the
/// previous pass (three passes).
pub fn fiber_section(
    p: &SolidTorusParams,
    theta0: f64,
    points: usize,
    depth: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    if p.m.abs() < 2 {
        return Err(Error::Precondition("fiber sections need |m| >= 2".into()));
    }
    let coupled = p.mu * p.h_amp != 0.0;
    let passes = if coupled { 3 } else { 1 };
    let m = p.m.unsigned_abs() as usize;
    (0..points)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(point_seed(seed, i));
            let digits: Vec<usize> = (0..depth).map(|_| rng.gen_range(0..m)).collect();
            // xs[k] is the fiber point at step −k
            let mut xs = vec![[0.0, 0.0]; depth + 1];
            let mut thetas = vec![theta0; depth + 1];
            for _ in 0..passes {
                for k in 1..=depth {
                    let pre = preimages(p, xs[k], thetas[k - 1]);
                    if pre.len() != m {
                        return Err(Error::Precondition(format!(
                            "angle map is not an {m}-fold cover at θ = {}",
                            thetas[k - 1]
                        )));
                    }
                    thetas[k] = pre[digits[k - 1]];
                }
                xs[depth] = [0.0, 0.0];
                for k in (1..=depth).rev() {
                    xs[k - 1] = p.fiber(xs[k], thetas[k]);
                }
            }
            Ok(xs[0].to_vec())
        })
        .collect()
}

fn derivative_margin(p: &SolidTorusParams, n: usize) -> (f64, f64) {
    (0..n)
        .map(|i| {
            let t = i as f64 / n as f64;
            ((p.m as f64 + p.g.derivative(t)).abs() - 1.0, t)
        })
        .fold((f64::INFINITY, 0.0), |a, b| if b.0 < a.0 { b } else { a })
}

/// Sampled disjointness: the image disks over the preimages of each sampled
/// angle are enclosed in balls of radius `L·r` around the images of the
/// disk center; returns the smallest center gap minus `2Lr` and its angle.
fn sampled_disjointness(p: &SolidTorusParams, n: usize) -> (f64, f64) {
    let radius = p.sampled_fiber_contraction(64) * p.fiber_radius;
    (0..n)
        .map(|i| {
            let target = i as f64 / n as f64;
            let c: Vec<[f64; 2]> = preimages(p, [0.0, 0.0], target)
                .into_iter()
                .map(|t| p.fiber([0.0, 0.0], t))
                .collect();
            let mut gap = f64::INFINITY;
            for a in 0..c.len() {
                for b in a + 1..c.len() {
                    gap = gap.min((c[a][0] - c[b][0]).hypot(c[a][1] - c[b][1]));
                }
            }
            (gap - 2.0 * radius, target)
        })
        .fold((f64::INFINITY, 0.0), |a, b| if b.0 < a.0 { b } else { a })
}

fn check_point(p: &SolidTorusParams, index: usize, value: f64, s: &SolenoidSettings, seed: u64) -> ScanRecord {
    let mut rec = ScanRecord::new(vec![index], vec![value], Tag::NotASolenoid);
    let mut reasons = Vec::new();
    let (margin, at) = derivative_margin(p, s.theta_samples);
    rec = rec.diag("derivative_margin", margin);
    if !(margin > 0.0) {
        reasons.push(format!("|m + g'| <= 1 at theta {at}"));
    }
    let disjoint = match p.images_disjoint() {
        Some(d) => {
            let sep = p.center_separation().unwrap_or(f64::NAN);
            rec = rec
                .diag("center_separation", sep)
                .diag("image_radius", p.image_radius())
                .diag("disjoint_gap", sep - 2.0 * p.image_radius());
            if !d {
                rec = rec.diag("witness_theta", 0.0);
            }
            d
        }
        None => {
            let (gap, at) = sampled_disjointness(p, s.theta_samples);
            rec = rec.diag("disjoint_gap", gap);
            if !(gap > 0.0) {
                rec = rec.diag("witness_theta", at);
            }
            gap > 0.0
        }
    };
    if !disjoint {
        reasons.push("fiber images overlap".to_string());
    }
    match fiber_section(p, s.theta0, s.section_points, s.depth, point_seed(seed, index))
        .and_then(|pts| box_counting_dimension(&pts, s.scales))
    {
        Ok(b) => {
            rec = rec.diag("section_dimension", b.dimension).diag("section_r2", b.r_squared);
            if !(b.dimension > 0.0 && b.dimension < 1.0) {
                reasons.push("fiber section dimension outside (0, 1)".into());
            }
            if b.degenerate {
                rec = rec.note("section_fit", "poor");
            }
        }
        Err(e) => reasons.push(format!("fiber section failed: {e}")),
    }
    if s.lyapunov {
        let lambda = make_solid_torus_map(p).and_then(|m| {
            lyapunov_spectrum(&m, &[0.0, 0.0, s.theta0], Span::Steps(10_000), 1, &LyapunovSettings::default())
        });
        rec = rec.diag("lyapunov", lambda.map_or(f64::NAN, |r| r.exponents[0]));
    }
    if reasons.is_empty() {
        rec.tag = Tag::Solenoid;
        rec
    } else {
        rec.note("reason", reasons.join("; "))
    }
}

pub(crate) fn sweep(
    base: &SolidTorusParams,
    axis: &str,
    values: &[f64],
    settings: &SolenoidSettings,
    seed: u64,
) -> Result<ScanResult> {
    if base.m.abs() < 2 {
        return Err(Error::Precondition("solenoid checks need |m| >= 2".into()));
    }
    let params = values
        .iter()
        .map(|v| {
            let mut p = base.clone();
            match axis {
                "mu" => p.mu = *v,
                "mu_c" => p.mu_c = *v,
                "omega" => p.omega = *v,
                "h_amp" => p.h_amp = *v,
                "offset" => p.offset = *v,
                _ => return Err(Error::param("axes[0].name", format!("cannot sweep `{axis}`"))),
            }
            make_solid_torus_map(&p)?;
            Ok(p)
        })
        .collect::<Result<Vec<_>>>()?;
    // the fiber sections already run in parallel
    let records = params
        .iter()
        .enumerate()
        .map(|(i, p)| check_point(p, i, values[i], settings, seed))
        .collect();
    Ok(ScanResult::new(Family::Solenoid, &[axis_name(axis)], vec![values.len()], records))
}

fn axis_name(axis: &str) -> &'static str {
    match axis {
        "mu" => "mu",
        "mu_c" => "mu_c",
        "omega" => "omega",
        "h_amp" => "h_amp",
        _ => "offset",
    }
}

/// Checks, for every `μ`, the expansion `|m + g′| > 1`, disjointness of the
/// fiber images and a fiber-section box dimension in `(0, 1)`. Points that
/// pass all three are tagged `solenoid`.
pub fn solenoid_birth_check(
    p: &SolidTorusParams,
    mus: &[f64],
    settings: &SolenoidSettings,
    seed: u64,
) -> Result<ScanResult> {
    sweep(p, "mu", mus, settings, seed)
}
