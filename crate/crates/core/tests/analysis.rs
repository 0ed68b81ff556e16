use std::collections::{BTreeSet, HashSet};

use hyperlab::analysis::*;
use hyperlab::dynsys::{fmt17, integrate_flow, iterate_map, Span, StepSettings};
use hyperlab::zoo::*;
use hyperlab::SystemModel;
use num_rational::Rational64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn lorenz() -> SystemModel {
    make_lorenz(LorenzParams::default()).unwrap()
}

#[test]
fn lorenz_divergence_and_flow_direction() {
    let settings = LyapunovSettings {
        transient: Some(Span::Time(20.0)),
        ..Default::default()
    };
    let r = lyapunov_spectrum(&lorenz(), &[1.0, 1.0, 20.0], Span::Time(1000.0), 3, &settings).unwrap();
    let sum: f64 = r.exponents.iter().sum();
    let div = -41.0 / 3.0;
    assert!(((sum - div) / div).abs() < 0.02, "{:?}", r.exponents);
    assert!(r.exponents[1].abs() < 0.02, "{:?}", r.exponents);
    assert!(r.exponents[0] > 0.5);
    assert!(r.history.len() <= MAX_HISTORY + 1);
    assert!(r.exponents.windows(2).all(|w| w[0] >= w[1]));
}

#[test]
fn lorenz_sum_matches_divergence_at_other_parameters() {
    let p = LorenzParams { sigma: 16.0, r: 45.92, b: 4.0 };
    let m = make_lorenz(p).unwrap();
    let settings = LyapunovSettings {
        transient: Some(Span::Time(20.0)),
        ..Default::default()
    };
    let r = lyapunov_spectrum(&m, &[1.0, 1.0, 20.0], Span::Time(300.0), 3, &settings).unwrap();
    let sum: f64 = r.exponents.iter().sum();
    assert!(((sum - p.divergence()) / p.divergence()).abs() < 0.02, "{:?}", r.exponents);
}

#[test]
fn torus_automorphism_spectra_sum_to_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for a in [vec![vec![2, 1], vec![1, 1]], vec![vec![3, 2], vec![1, 1]], vec![vec![5, 2], vec![2, 1]]] {
        let m = make_torus_automorphism(&a).unwrap();
        let s0 = [rng.gen::<f64>(), rng.gen::<f64>()];
        let mut settings = LyapunovSettings::default();
        settings.tangent.renorm_every = 1;
        let r = lyapunov_spectrum(&m, &s0, Span::Steps(5000), 2, &settings).unwrap();
        assert!((r.exponents[0] + r.exponents[1]).abs() < 1e-6, "{a:?}: {:?}", r.exponents);
    }
}

/// Random points inside every interval of the depth-`depth` middle-thirds
/// construction.
fn cantor(depth: u32, per_interval: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let w = 3f64.powi(-(depth as i32));
    let mut out = Vec::new();
    for code in 0..(1u64 << depth) {
        let left: f64 = (0..depth)
            .filter(|k| code >> k & 1 == 1)
            .map(|k| 2.0 * 3f64.powi(-(depth as i32 - k as i32)))
            .sum();
        for _ in 0..per_interval {
            out.push(left + rng.gen::<f64>() * w);
        }
    }
    out
}

#[test]
fn middle_thirds_cantor_dimension() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let pts: Vec<Vec<f64>> = cantor(12, 4, &mut rng).into_iter().map(|x| vec![x]).collect();
    let r = box_counting_dimension(&pts, ScaleRange::dyadic(2, 14)).unwrap();
    let expected = 2f64.ln() / 3f64.ln();
    assert!((r.dimension - expected).abs() < 0.03, "{r:?}");
    assert!(!r.degenerate);
}

#[test]
fn product_dimension_adds() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let c = cantor(12, 64, &mut rng);
    let pts: Vec<Vec<f64>> = c.iter().map(|y| vec![rng.gen::<f64>(), *y]).collect();
    let r = box_counting_dimension(&pts, ScaleRange::dyadic(2, 8)).unwrap();
    let expected = 1.0 + 2f64.ln() / 3f64.ln();
    assert!((r.dimension - expected).abs() < 0.1, "{r:?}");
}

#[test]
fn golden_rotation_has_three_gaps() {
    let omega = (5f64.sqrt() - 1.0) / 2.0;
    let m = make_circle_family(1, PeriodicFn::Zero, omega).unwrap();
    let o = iterate_map(&m, &[0.0], 100_000).unwrap();
    for (c, r) in [(0.1, 0.01), (0.5, 0.003), (0.9, 0.02)] {
        let res = recurrence_times(&o, &[c], r).unwrap();
        let distinct: BTreeSet<u64> = res.gaps.iter().map(|g| *g as u64).collect();
        assert!(distinct.len() <= 3, "{distinct:?}");
        // brute-force census straight from the iterates
        let inside: Vec<bool> = (0..o.len())
            .map(|i| {
                let d = (o.state(i)[0] - c).rem_euclid(1.0);
                d.min(1.0 - d) <= r
            })
            .collect();
        let entries: Vec<usize> = (0..o.len()).filter(|&i| inside[i] && (i == 0 || !inside[i - 1])).collect();
        let census: BTreeSet<u64> = entries.windows(2).map(|w| (w[1] - w[0]) as u64).collect();
        assert_eq!(distinct, census);
    }
}

#[test]
fn lorenz_return_gaps_grow_with_orbit_length() {
    let st = StepSettings { record_every: 5, ..Default::default() };
    let long = integrate_flow(&lorenz(), &[1.0, 1.0, 20.0], 5000.0, &st).unwrap();
    let center = long.state(long.len() / 2).to_vec();
    let cut = long.len() / 10;
    let mut short = long.clone();
    short.truncate(cut);
    let a = recurrence_times(&short, &center, 1.0).unwrap();
    let b = recurrence_times(&long, &center, 1.0).unwrap();
    assert!(b.max_gap > a.max_gap, "{} vs {}", a.max_gap, b.max_gap);
}

#[test]
fn doubling_census_is_exact() {
    let m = make_doubling_map();
    for n in 1..=6usize {
        let r = find_periodic_points(&m, n, &[]).unwrap();
        let den = (1i64 << n) - 1;
        let exact: Vec<Rational64> = (0..den).map(|k| Rational64::new(k, den)).collect();
        assert_eq!(r.len(), exact.len());
        for (rec, q) in r.iter().zip(&exact) {
            let q = *q.numer() as f64 / *q.denom() as f64;
            assert!((rec.point[0] - q).abs() < 1e-12);
            assert_eq!(rec.stability, Stability::Repelling);
            assert_eq!(rec.multipliers[0][0], (1u64 << n) as f64);
        }
    }
}

#[test]
fn cat_map_period_two_points_are_saddles() {
    let m = make_torus_automorphism(&[vec![2, 1], vec![1, 1]]).unwrap();
    let r = find_periodic_points(&m, 2, &seed_grid(&m, 400, 5)).unwrap();
    // Fix(A²) has |det(A² − I)| = 5 points
    assert_eq!(r.len(), 5);
    assert!(r.iter().all(|p| p.stability == Stability::Saddle));
    for p in &r {
        for x in &p.point {
            assert!(((5.0 * x).round() - 5.0 * x).abs() < 1e-9);
        }
    }
}

#[test]
fn wild_map_has_no_attracting_orbits_at_low_period() {
    let m = make_wild_map(&WildMapParams::default()).unwrap();
    let seeds = seed_grid(&m, 200, 7);
    for n in 1..=3 {
        let r = find_periodic_points(&m, n, &seeds).unwrap();
        assert!(r.iter().all(|p| !p.is_attracting()), "period {n}: {r:?}");
    }
}

fn quadratic(a: f64) -> SystemModel {
    SystemModel::custom_map("quadratic", 2, move |s, o| {
        o[0] = 1.0 - a * s[0] * s[0];
        o[1] = 0.3 * s[1];
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn attracting_records_reverify(a in 0.8f64..1.2) {
        let m = quadratic(a);
        let seeds: Vec<Vec<f64>> = (0..40).map(|i| vec![-1.0 + i as f64 / 20.0, 0.5]).collect();
        let r = find_periodic_points(&m, 2, &seeds).unwrap();
        let attracting: Vec<_> = r.iter().filter(|p| p.is_attracting()).collect();
        prop_assert_eq!(attracting.len(), 2);
        for p in attracting {
            prop_assert_eq!(p.minimal_period, 2);
            prop_assert!(reverify_attracting(&m, p, 1e-4, 1000));
        }
    }

    #[test]
    fn stability_class_matches_multiplier_moduli(mods in proptest::collection::vec(0.0f64..3.0, 1..4)) {
        let (class, _) = classify(&mods);
        let attracting = mods.iter().all(|m| *m < 1.0 - 1e-9);
        prop_assert_eq!(class == Stability::Attracting, attracting);
    }
}

#[test]
fn contracting_map_attractor_is_the_origin_block() {
    let m = SystemModel::custom_map("contract", 2, |s, o| {
        o[0] = 0.6 * s[0] + 0.1 * s[1];
        o[1] = -0.2 * s[0] + 0.5 * s[1];
    });
    let spec = CellGraphSpec::new(vec![-1.0, -1.0], vec![1.0, 1.0], 0.1, 0.02, 3.0);
    let g = build_cell_graph(&m, &spec, &[]).unwrap();
    let a = chain_attractor(&g, g.locate(&[0.95, 0.95]).unwrap()).unwrap();
    let origin: HashSet<u64> = a.cells.iter().copied().collect();
    for c in &a.cells {
        let ctr = g.center(*c);
        assert!(ctr.iter().all(|v| v.abs() < 0.1), "{ctr:?}");
    }
    // every long enough path ends in the block
    let start = g.position(g.locate(&[-0.95, 0.3]).unwrap()).unwrap();
    let mut i = start;
    for _ in 0..200 {
        i = g.edges[i][0];
    }
    assert!(origin.contains(&g.cells[i]));
}

#[test]
fn rigid_rotation_graph_is_strongly_connected() {
    let m = make_circle_family(1, PeriodicFn::Zero, 0.3819660112501051).unwrap();
    let spec = CellGraphSpec::new(vec![0.0], vec![1.0], 1.0 / 64.0, 0.5 / 64.0, 1.0);
    let g = build_cell_graph(&m, &spec, &[]).unwrap();
    assert_eq!(g.len(), 64);
    let a = chain_attractor(&g, 0).unwrap();
    assert_eq!(a.cells.len(), 64);
    assert_eq!(a.components, 1);
    assert!(!a.touches_boundary);
}

#[test]
fn cell_csv_formats() {
    let m = make_circle_family(0, PeriodicFn::Zero, 0.3).unwrap();
    let spec = CellGraphSpec::new(vec![0.0], vec![1.0], 0.25, 0.01, 1.0);
    let g = build_cell_graph(&m, &spec, &[]).unwrap();
    let mut e = Vec::new();
    g.write_edges_csv(&mut e).unwrap();
    assert_eq!(String::from_utf8(e).unwrap(), "src,dst\n0,1\n1,1\n2,1\n3,1\n");
    let a = chain_attractor(&g, 3).unwrap();
    assert_eq!(a.cells, vec![1]);
    let mut c = Vec::new();
    g.write_cells_csv(&a.cells, &mut c).unwrap();
    let row = format!("1,{},{}", fmt17(0.25), fmt17(0.5));
    assert_eq!(String::from_utf8(c).unwrap(), format!("cell_index,x0_lo,x0_hi\n{row}\n"));
}

#[test]
fn solenoid_chain_attractor_hugs_the_orbit_cloud() {
    // plain doubling collapses float orbits onto θ = 0 after about 53 steps
    let p = SolidTorusParams {
        g: PeriodicFn::Sine { amp: 0.05 },
        ..SolidTorusParams::solenoid(0.2)
    };
    let m = make_solid_torus_map(&p).unwrap();
    let h = 1.0 / 32.0;
    let spec = CellGraphSpec::new(vec![-0.5, -0.5, 0.0], vec![0.5, 0.5, 1.0], h, h / 4.0, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut cloud = Vec::new();
    for _ in 0..20 {
        let s0 = [0.0, 0.0, rng.gen::<f64>()];
        let o = iterate_map(&m, &s0, 2000).unwrap();
        cloud.extend((100..o.len()).map(|i| o.state(i).to_vec()));
    }
    let g = build_cell_graph(&m, &spec, &[cloud[0].clone()]).unwrap();
    let a = chain_attractor(&g, g.locate(&cloud[0]).unwrap()).unwrap();
    let centers: Vec<Vec<f64>> = a.cells.iter().map(|c| g.center(*c)).collect();
    let d = |x: &[f64], y: &[f64]| m.distance(x, y);
    let one_way = |a: &[Vec<f64>], b: &[Vec<f64>]| {
        a.iter()
            .map(|x| b.iter().map(|y| d(x, y)).fold(f64::INFINITY, f64::min))
            .fold(0.0f64, f64::max)
    };
    let sub: Vec<Vec<f64>> = cloud.iter().step_by(7).cloned().collect();
    let hd = one_way(&centers, &sub).max(one_way(&sub, &centers));
    assert!(hd < 2.0 * h, "Hausdorff distance {hd}");
}

fn lorenz_attractor(eps: f64) -> (CellGraph, ChainAttractor) {
    let spec = CellGraphSpec::new(vec![-25.0, -25.0, 0.0], vec![25.0, 25.0, 50.0], 1.0, eps, 0.5);
    let m = lorenz();
    let root = integrate_flow(&m, &[1.0, 1.0, 20.0], 50.0, &StepSettings::default())
        .unwrap()
        .last_state()
        .unwrap();
    let g = build_cell_graph(&m, &spec, std::slice::from_ref(&root.0)).unwrap();
    let a = chain_attractor(&g, g.locate(&root.0).unwrap()).unwrap();
    (g, a)
}

#[test]
fn lorenz_chain_attractor_is_eps_monotone_and_holds_omega_limits() {
    let (g, big) = lorenz_attractor(0.5);
    let (_, small) = lorenz_attractor(0.25);
    let big_set: HashSet<u64> = big.cells.iter().copied().collect();
    assert!(small.cells.iter().all(|c| big_set.contains(c)));
    // |y| reaches about 27 on the attractor, so the pinned box is touched
    let m = lorenz();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut missing = 0;
    for _ in 0..100 {
        let s0 = [rng.gen_range(-20.0..20.0), rng.gen_range(-20.0..20.0), rng.gen_range(5.0..45.0)];
        let o = integrate_flow(&m, &s0, 100.0, &StepSettings::default()).unwrap();
        for i in (o.len() / 2..o.len()).step_by(5) {
            // samples outside the box have no cell
            if let Some(c) = g.locate(o.state(i)) {
                missing += usize::from(!big_set.contains(&c));
            }
        }
    }
    assert_eq!(missing, 0);
}
