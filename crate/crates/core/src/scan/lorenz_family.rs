use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{point_seed, Family, ScanRecord, ScanResult, Tag};
use crate::analysis::{find_periodic_points, lyapunov_spectrum, seed_grid, LyapunovSettings};
use crate::dynsys::{Span, SystemModel};
use crate::error::{Error, Result};
use crate::kneading::{build_transition_matrix, reduce_to_1d, verify_two_full_branches, KneadingInvariant};
use crate::verify::{check_lorenz_conditions, SampleGrid};
use crate::zoo::{make_geometric_lorenz, Correction, GeomLorenzParams};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LorenzScanSettings {
    pub transient: usize,
    pub fit_samples: usize,
    pub kneading_len: usize,
    /// Depth of the transition matrix used for the entropy column.
    pub depth: usize,
    pub lyapunov_steps: usize,
    /// Grid of the base-point condition check and of per-point checks.
    pub grid: SampleGrid,
    pub verify: bool,
    /// Count attracting points of period up to 4 from 64 seeds.
    pub periodic: bool,
}

impl Default for LorenzScanSettings {
    fn default() -> Self {
        LorenzScanSettings {
            transient: 50,
            fit_samples: 8192,
            kneading_len: 64,
            depth: 8,
            lyapunov_steps: 20_000,
            grid: SampleGrid::with_n(64),
            verify: false,
            periodic: false,
        }
    }
}

/// Symmetric demonstration map whose branches map `[−0.8, 0.8]` into
/// itself with slack.
pub fn demo_lorenz_base() -> GeomLorenzParams {
    GeomLorenzParams::symmetric(0.5, -0.8, 0.8, Correction::Const(0.2), Correction::Const(1.7))
}

/// `y1s − μ₁`, `y2s + μ₂`: positive shifts move the one-sided limits away
/// from the locus, and `μ₁ = μ₂` preserves the symmetry.
pub fn shifted(base: &GeomLorenzParams, mu1: f64, mu2: f64) -> GeomLorenzParams {
    GeomLorenzParams {
        y1s: base.y1s - mu1,
        y2s: base.y2s + mu2,
        ..base.clone()
    }
}

fn largest_exponent(model: &SystemModel, steps: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let settings = LyapunovSettings {
        transient: Some(Span::Steps(1000)),
        ..Default::default()
    };
    for _ in 0..4 {
        let s0 = [rng.gen_range(-0.9..0.9), rng.gen_range(-0.9..0.9)];
        if let Ok(r) = lyapunov_spectrum(model, &s0, Span::Steps(steps), 1, &settings) {
            return r.exponents[0];
        }
    }
    f64::NAN
}

fn scan_point(base: &GeomLorenzParams, idx: [usize; 2], mu: [f64; 2], s: &LorenzScanSettings, seed: u64) -> ScanRecord {
    let p = shifted(base, mu[0], mu[1]);
    let rec = ScanRecord::new(idx.to_vec(), mu.to_vec(), Tag::DomainEscape)
        .diag("y1s", p.y1s)
        .diag("y2s", p.y2s);
    if p.y1s.abs() > 1.0 || p.y2s.abs() > 1.0 {
        return rec.note("reason", "a branch misses the section");
    }
    let model = match make_geometric_lorenz(&p) {
        Ok(m) => m,
        Err(e) => return rec.note("reason", e.to_string()),
    };
    let mut rec = rec.diag("lyapunov", largest_exponent(&model, s.lyapunov_steps, seed));
    if s.verify {
        let holds = check_lorenz_conditions(&model, &s.grid)
            .map(|r| ["a", "b", "c", "d"].iter().all(|c| r.holds(c) == Some(true)))
            .unwrap_or(false);
        rec = rec.diag("conditions_hold", f64::from(u8::from(holds)));
    }
    if s.periodic {
        let seeds = seed_grid(&model, 64, seed);
        let count: usize = (1..=4)
            .filter_map(|n| find_periodic_points(&model, n, &seeds).ok())
            .map(|r| r.iter().filter(|q| q.is_attracting() && q.minimal_period == q.period).count())
            .sum();
        rec = rec.diag("attracting_periodic", count as f64);
    }
    let g = match reduce_to_1d(&model, s.transient, s.fit_samples) {
        Ok(g) => g,
        Err(Error::ReductionInvalid { residual, .. }) => {
            return ScanRecord {
                tag: Tag::ReductionInvalid,
                ..rec
            }
            .diag("fit_residual", residual)
        }
        Err(Error::Precondition(msg)) => return rec.note("reason", msg),
        Err(e) => {
            return ScanRecord {
                tag: Tag::ReductionInvalid,
                ..rec
            }
            .note("reason", e.to_string())
        }
    };
    rec = rec.diag("fit_residual", g.fit.as_ref().map_or(f64::NAN, |f| f.residual));
    if let Ok(k) = KneadingInvariant::of(&g, s.kneading_len) {
        rec = rec
            .note("kneading_plus", k.plus.to_string())
            .note("kneading_minus", k.minus.to_string());
    }
    let full = verify_two_full_branches(&g).unwrap_or(false);
    rec = rec.diag("full_branch", f64::from(u8::from(full)));
    if let Ok(t) = build_transition_matrix(&g, s.depth) {
        rec = rec.diag("entropy", t.entropy);
    }
    rec.tag = if full { Tag::FullBranch } else { Tag::PartialBranch };
    rec
}

/// Sweep of the shifted family over `mu1s × mu2s`. The base map must pass
/// conditions (a)–(d) on `settings.grid`.
pub fn lorenz_family_scan(
    base: &GeomLorenzParams,
    mu1s: &[f64],
    mu2s: &[f64],
    settings: &LorenzScanSettings,
    seed: u64,
) -> Result<ScanResult> {
    let model = make_geometric_lorenz(base)?;
    let report = check_lorenz_conditions(&model, &settings.grid)?;
    if let Some(c) = ["a", "b", "c", "d"].iter().find(|c| report.holds(c) != Some(true)) {
        return Err(Error::Precondition(format!("base map fails condition ({c})")));
    }
    let n2 = mu2s.len();
    let records = (0..mu1s.len() * n2)
        .into_par_iter()
        .map(|k| {
            let (i, j) = (k / n2, k % n2);
            scan_point(base, [i, j], [mu1s[i], mu2s[j]], settings, point_seed(seed, k))
        })
        .collect();
    Ok(ScanResult::new(
        Family::LorenzFamily,
        &["mu1", "mu2"],
        vec![mu1s.len(), n2],
        records,
    ))
}
