//! End-to-end acceptance run. Prints one line per criterion and fails if any
//! criterion fails.

use std::collections::HashSet;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use hyperlab::analysis::*;
use hyperlab::dynsys::{integrate_flow, Span, StepSettings};
use hyperlab::kneading::*;
use hyperlab::scan::{run_scan, solenoid_birth_check, ScanSpec, SolenoidSettings};
use hyperlab::verify::*;
use hyperlab::zoo::*;
use hyperlab::SystemModel;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn lorenz() -> SystemModel {
    make_lorenz(LorenzParams::default()).unwrap()
}

fn flow_settings(dt: f64) -> LyapunovSettings {
    let mut s = LyapunovSettings {
        transient: Some(Span::Time(20.0)),
        ..Default::default()
    };
    s.tangent.step = StepSettings::fixed(dt);
    s
}

fn lorenz_divergence() -> Verdict {
    let start = Instant::now();
    let r = lyapunov_spectrum(&lorenz(), &[1.0, 1.0, 20.0], Span::Time(1000.0), 3, &flow_settings(0.01)).unwrap();
    let took = start.elapsed();
    let sum: f64 = r.exponents.iter().sum();
    let div = -41.0 / 3.0;
    let rel = ((sum - div) / div).abs();
    verdict(
        rel < 0.02 && took < Duration::from_secs(30),
        format!("sum {sum:.5} vs {div:.5} (rel {rel:.2e}) in {took:.2?}"),
    )
}

fn lorenz_positive_exponent() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let starts: Vec<[f64; 3]> = (0..10)
        .map(|_| [rng.gen_range(-15.0..15.0), rng.gen_range(-15.0..15.0), rng.gen_range(5.0..40.0)])
        .collect();
    let largest = |dt: f64| -> Vec<f64> {
        starts
            .par_iter()
            .map(|s0| lyapunov_spectrum(&lorenz(), s0, Span::Time(1000.0), 1, &flow_settings(dt)).unwrap().exponents[0])
            .collect()
    };
    let coarse = largest(0.01);
    let fine = largest(0.005);
    let spread = |v: &[f64]| v.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - v.iter().cloned().fold(f64::INFINITY, f64::min);
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let min = coarse.iter().cloned().fold(f64::INFINITY, f64::min);
    let agree = (mean(&coarse) - mean(&fine)).abs();
    verdict(
        min > 0.5 && spread(&coarse) < 0.1 && agree < 0.05,
        format!(
            "min λ1 {min:.4}, spread {:.4}, mean dt=0.01 {:.4} vs dt=0.005 {:.4}",
            spread(&coarse),
            mean(&coarse),
            mean(&fine)
        ),
    )
}

fn cat_map_spectrum() -> Verdict {
    let m = make_torus_automorphism(&[vec![2, 1], vec![1, 1]]).unwrap();
    let mut s = LyapunovSettings::default();
    s.tangent.renorm_every = 1;
    let start = Instant::now();
    let r = lyapunov_spectrum(&m, &[0.1234, 0.5678], Span::Steps(100_000), 2, &s).unwrap();
    let took = start.elapsed();
    let expect = ((3.0 + 5f64.sqrt()) / 2.0).ln();
    let err = (r.exponents[0] - expect).abs().max((r.exponents[1] + expect).abs());
    verdict(
        err < 1e-3 && took < Duration::from_secs(1),
        format!("exponents {:?}, error {err:.2e} in {took:.2?}", r.exponents),
    )
}

fn doubling_census() -> Verdict {
    let recs = find_periodic_points(&make_doubling_map(), 4, &[]).unwrap();
    let repelling = recs.iter().filter(|r| r.stability == Stability::Repelling).count();
    let g = IntervalMap1D::symmetric_slope(2.0).unwrap();
    let h = build_transition_matrix(&g, 8).unwrap().entropy;
    let err = (h - 2f64.ln()).abs();
    verdict(
        recs.len() == 15 && repelling == 15 && err < 1e-9,
        format!("{} points, {repelling} repelling, entropy error {err:.1e}", recs.len()),
    )
}

fn blue_sky_scaling() -> Verdict {
    let spec = ScanSpec::parse_json(
        r#"{"family": "blue_sky", "axes": [{"name": "mu", "lo": 1e-8, "hi": 1e-2, "n": 31, "scale": "log"}]}"#,
    )
    .unwrap();
    let r = run_scan(&spec).unwrap();
    let mus = spec.grids().unwrap().remove(0);
    let period = r.column("period");
    let worst = mus
        .iter()
        .zip(&period)
        .filter(|(mu, _)| **mu <= 1e-4 * (1.0 + 1e-12))
        .map(|(mu, p)| (p * mu.sqrt() / std::f64::consts::PI - 1.0).abs())
        .fold(0.0, f64::max);
    let monotone = period.windows(2).all(|w| w[1] < w[0]);
    verdict(
        worst < 0.05 && monotone,
        format!("max |T√μ/π − 1| at μ ≤ 1e-4: {worst:.2e}; strictly decreasing in μ: {monotone}"),
    )
}

fn solenoid_verification() -> Verdict {
    let start = Instant::now();
    let r = solenoid_birth_check(&SolidTorusParams::solenoid(0.2), &[0.0], &SolenoidSettings::default(), 1).unwrap();
    let took = start.elapsed();
    let rec = &r.records[0];
    let margin = rec.get("derivative_margin").unwrap();
    let gap = rec.get("disjoint_gap").unwrap();
    let d = rec.get("section_dimension").unwrap();
    let r2 = rec.get("section_r2").unwrap();
    verdict(
        margin >= 1.0 - 1e-12 && gap > 0.0 && d > 0.1 && d < 0.9 && r2 >= 0.98 && took < Duration::from_secs(60),
        format!("tag {}, margin {margin}, gap {gap:.3}, dimension {d:.4} (r² {r2:.4}) in {took:.2?}", rec.tag),
    )
}

fn lorenz_conditions() -> Verdict {
    let grid = SampleGrid::default();
    let bench = make_pl_lorenz(&PlLorenzParams::default()).unwrap();
    let r = check_lorenz_conditions(&bench, &grid).unwrap();
    let q = compute_q(&r, QVariant::Squared);
    let q_printed = compute_q(&r, QVariant::Printed);
    // (a) fails near the locus: ‖f_x‖ grows like 1/|y|
    let violator = SystemModel::custom_map("violator", 2, |s, out| {
        let y = s[1];
        out[0] = 0.5 * s[0] * (1.0 + 0.01 / y.abs());
        out[1] = 2.0 * y - y.signum();
    })
    .with_locus(1, 0.0);
    let v = check_lorenz_conditions(&violator, &grid).unwrap();
    let a = v.get("a").unwrap();
    let near = a.witness_point.get(1).is_some_and(|y| y.abs() < 0.01);
    verdict(
        r.all_hold() && q.as_ref().is_ok_and(|q| *q > 1.0) && q_printed.as_ref().is_ok_and(|q| *q > 1.0) && !a.holds && near,
        format!(
            "benchmark (a)–(d) hold: {}, q {:?} (printed variant {:?}); violator (a) fails: {}, witness {:?}",
            r.all_hold(),
            q.ok(),
            q_printed.ok(),
            !a.holds,
            a.witness_point
        ),
    )
}

fn kneading_invariance() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut matched = 0;
    let mut tried = 0;
    let mut mismatched = Vec::new();
    while matched + mismatched.len() < 20 {
        tried += 1;
        let sl: f64 = rng.gen_range(1.1..2.0);
        let sr: f64 = rng.gen_range(1.1..2.0);
        // increasing branches mapping [−1, 0) and (0, 1] into [−1, 1]
        let left = [sl, sl - 1.0 + rng.gen::<f64>() * (2.0 - sl)];
        let right = [sr, -1.0 + rng.gen::<f64>() * (2.0 - sr)];
        let g = IntervalMap1D::piecewise_linear(left, right).unwrap();
        let Ok(a) = KneadingInvariant::of(&g, 64) else { continue };
        let c = rng.gen_range(0.0..0.95);
        let b = KneadingInvariant::of(&g.conjugate_cubic(c).unwrap(), 64).unwrap();
        if a.plus == b.plus && a.minus == b.minus {
            matched += 1;
        } else {
            mismatched.push(tried);
        }
    }
    let two = KneadingInvariant::of(&IntervalMap1D::symmetric_slope(2.0).unwrap(), 64).unwrap();
    let other = KneadingInvariant::of(&IntervalMap1D::symmetric_slope(1.9).unwrap(), 64).unwrap();
    let diff = compare_kneading(&two, &other).unwrap().first_difference();
    verdict(
        matched == 20 && diff.is_some(),
        format!("{matched}/20 conjugate pairs match to N = 64; slopes 2 vs 1.9 first differ at {diff:?}"),
    )
}

fn wild_map_suite() -> Verdict {
    let start = Instant::now();
    let p = WildMapParams::default();
    let m = make_wild_map(&p).unwrap();
    let report = check_pseudohyperbolic(&m, &SampleGrid::default(), 0.5 * (p.rho + p.eta)).unwrap();
    let grid_ok = ["ct0", "ct2", "ct3", "ct5"].iter().all(|id| report.holds(id) == Some(true));
    let ct1 = report.get("ct1").unwrap();
    let seeds = seed_grid(&m, 100, 9);
    let settings = LyapunovSettings {
        transient: Some(Span::Steps(1000)),
        ..Default::default()
    };
    let lambdas: Vec<f64> = seeds
        .par_iter()
        .map(|s0| lyapunov_spectrum(&m, s0, Span::Steps(1_000_000), 1, &settings).map_or(f64::NAN, |r| r.exponents[0]))
        .collect();
    let min_lambda = lambdas.iter().cloned().fold(f64::INFINITY, f64::min);
    let newton_seeds = seed_grid(&m, 1000, 10);
    let attracting: usize = (1..=8)
        .map(|n| {
            find_periodic_points(&m, n, &newton_seeds)
                .unwrap()
                .iter()
                .filter(|r| r.is_attracting())
                .count()
        })
        .sum();
    let took = start.elapsed();
    verdict(
        grid_ok && ct1.holds && min_lambda > 0.1 && attracting == 0 && took < Duration::from_secs(300),
        format!(
            "ct0/ct2/ct3/ct5 pass: {grid_ok}; ct1 final {:.3e} (needs < 1e-3); min λ1 over 100 seeds {min_lambda:.4}; attracting orbits up to period 8: {attracting}; {took:.2?}",
            ct1.witness_value
        ),
    )
}

fn chain_attractor_sanity() -> Verdict {
    let m = lorenz();
    let root = integrate_flow(&m, &[1.0, 1.0, 20.0], 50.0, &StepSettings::default())
        .unwrap()
        .last_state()
        .unwrap()
        .0;
    let attractor = |eps: f64| {
        let spec = CellGraphSpec::new(vec![-25.0, -25.0, 0.0], vec![25.0, 25.0, 50.0], 1.0, eps, 0.5);
        let g = build_cell_graph(&m, &spec, std::slice::from_ref(&root)).unwrap();
        let a = chain_attractor(&g, g.locate(&root).unwrap()).unwrap();
        (g, a)
    };
    let (g, big) = attractor(0.5);
    let (_, small) = attractor(0.25);
    let big_set: HashSet<u64> = big.cells.iter().copied().collect();
    let nested = small.cells.iter().all(|c| big_set.contains(c));
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let starts: Vec<[f64; 3]> = (0..100)
        .map(|_| [rng.gen_range(-20.0..20.0), rng.gen_range(-20.0..20.0), rng.gen_range(5.0..45.0)])
        .collect();
    let missing: usize = starts
        .par_iter()
        .map(|s0| {
            let o = integrate_flow(&m, s0, 100.0, &StepSettings::default()).unwrap();
            (o.len() / 2..o.len())
                .step_by(5)
                .filter_map(|i| g.locate(o.state(i)))
                .filter(|c| !big_set.contains(c))
                .count()
        })
        .sum();
    verdict(
        nested && missing == 0,
        format!(
            "{} cells at ε = 0.5, {} at ε = 0.25, nested: {nested}; ω-limit samples outside: {missing}",
            big.cells.len(),
            small.cells.len()
        ),
    )
}

fn cli_reproducibility() -> Verdict {
    let dir = tempfile::TempDir::new().unwrap();
    let spec = dir.path().join("scan.json");
    std::fs::write(
        &spec,
        r#"{"family": "solenoid", "axes": [{"name": "mu_c", "lo": 0.1, "hi": 0.4, "n": 4}]}"#,
    )
    .unwrap();
    let runs: Vec<Vec<&str>> = vec![
        vec!["simulate", "--model", "lorenz", "--t", "50"],
        vec!["verify", "--model", "lorenz_pl"],
        vec!["verify", "--model", "wild"],
        vec!["analyze", "lyapunov", "--model", "lorenz", "--t", "100"],
        vec![
            "analyze",
            "dimension",
            "--model",
            "solid_torus",
            "--params",
            r#"{"m": 2, "mu_c": 0.2, "g": {"kind": "sine", "amp": 0.05}}"#,
            "--steps",
            "20000",
        ],
        vec!["analyze", "recurrence", "--model", "lorenz", "--t", "200", "--radius", "3"],
        vec!["analyze", "periodic", "--model", "wild", "--period", "2"],
        vec!["analyze", "attractor", "--model", "doubling"],
        vec!["scan", "--spec", spec.to_str().unwrap()],
        vec!["kneading", "--slope", "1.8", "--compare-slope", "1.9"],
    ];
    let bin = env!("CARGO_BIN_EXE_hyperlab");
    let mut failures = Vec::new();
    for (i, args) in runs.iter().enumerate() {
        let out = dir.path().join(format!("run{i}"));
        let first = Command::new(bin).args(args).arg("--out").arg(&out).output().unwrap();
        if !matches!(first.status.code(), Some(0 | 1)) || !Path::new(&out.join("manifest.json")).exists() {
            failures.push(format!("{}: run failed", args.join(" ")));
            continue;
        }
        let replay = Command::new(bin)
            .args(["replay", out.join("manifest.json").to_str().unwrap()])
            .output()
            .unwrap();
        if replay.status.code() != Some(0) {
            failures.push(format!("{}: replay differs", args.join(" ")));
        }
    }
    verdict(
        failures.is_empty(),
        format!("{} commands replayed; mismatches {:?}", runs.len(), failures),
    )
}

#[test]
fn acceptance() {
    type Check = fn() -> Verdict;
    let criteria: [(&str, Check); 11] = [
        ("Lorenz divergence identity", lorenz_divergence),
        ("positive chaos indicator", lorenz_positive_exponent),
        ("cat-map spectrum", cat_map_spectrum),
        ("doubling-map census", doubling_census),
        ("blue-sky scaling", blue_sky_scaling),
        ("solenoid verification", solenoid_verification),
        ("Lorenz-map condition suite", lorenz_conditions),
        ("kneading conjugacy invariance", kneading_invariance),
        ("wild-map evidence suite", wild_map_suite),
        ("chain attractor sanity", chain_attractor_sanity),
        ("CLI reproducibility", cli_reproducibility),
    ];
    let mut failed = Vec::new();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let v = check();
        println!("criterion {:>2} {}: {} ({})", i + 1, if v.pass { "PASS" } else { "FAIL" }, name, v.detail);
        if !v.pass {
            failed.push(i + 1);
        }
    }
    assert!(failed.is_empty(), "failing criteria: {failed:?}");
}
