use rayon::prelude::*;

use super::{circle_nodes, ConditionReport, ConditionResult, SampleGrid, Sup};
use crate::dynsys::{jacobian_at, SystemModel};
use crate::error::{Error, Result};
use crate::linalg::{eigenvalues, int_det, min_singular};

/// Unit-circle exclusion band for eigenvalues of integer matrices.
pub const EIGEN_TOL: f64 = 1e-9;

/// Checks that a square matrix is integral, unimodular and has no eigenvalue
/// on the unit circle. Witness points hold `(re, im)` of the offending
/// eigenvalue or the offending entry position.
pub fn check_anosov_matrix(a: &[Vec<f64>]) -> Result<ConditionReport> {
    let n = a.len();
    if n == 0 || a.iter().any(|r| r.len() != n) {
        return Err(Error::param("matrix", "must be a non-empty square matrix"));
    }
    let grid = SampleGrid {
        n,
        n_aux: 0,
        delta: 0.0,
        margin: EIGEN_TOL,
        locus_levels: 0,
    };
    let mut report = ConditionReport::new("matrix", grid.meta(1, "exact matrix check"), true);

    let mut worst = (0.0f64, Vec::new());
    for (i, row) in a.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            let off = (v - v.round()).abs();
            if !v.is_finite() || off > worst.0 || (off.is_nan()) {
                worst = (if v.is_finite() { off } else { f64::INFINITY }, vec![i as f64, j as f64]);
            }
        }
    }
    let integral = worst.0 == 0.0;
    report.conditions.push(ConditionResult {
        id: "integral".into(),
        holds: integral,
        witness_value: worst.0,
        witness_point: worst.1,
        threshold: 0.0,
        note: None,
    });

    let rounded: Vec<Vec<i64>> = a
        .iter()
        .map(|r| r.iter().map(|v| if v.is_finite() { v.round() as i64 } else { 0 }).collect())
        .collect();
    let det = if integral {
        int_det(&rounded)? as f64
    } else {
        crate::linalg::int_to_f64(&rounded).determinant()
    };
    report.derived.insert("det".into(), det);
    report.conditions.push(ConditionResult {
        id: "unimodular".into(),
        holds: integral && det.abs() == 1.0,
        witness_value: det,
        witness_point: Vec::new(),
        threshold: 1.0,
        note: None,
    });

    let m = nalgebra::DMatrix::from_fn(n, n, |i, j| a[i][j]);
    let ev = eigenvalues(&m);
    let closest = ev
        .iter()
        .min_by(|x, y| (x.norm() - 1.0).abs().total_cmp(&(y.norm() - 1.0).abs()))
        .copied()
        .expect("non-empty");
    for (k, e) in ev.iter().enumerate() {
        report.derived.insert(format!("eig{k}_re"), e.re);
        report.derived.insert(format!("eig{k}_im"), e.im);
    }
    let gap = (closest.norm() - 1.0).abs();
    report.conditions.push(ConditionResult {
        id: "hyperbolic".into(),
        holds: gap > EIGEN_TOL,
        witness_value: closest.norm(),
        witness_point: vec![closest.re, closest.im],
        threshold: 1.0,
        note: Some("modulus of the eigenvalue closest to the unit circle".into()),
    });
    Ok(report)
}

/// Sampled `sup ‖(G′)⁻¹‖` of a torus or circle endomorphism; holds iff the
/// supremum is below `1 − margin`.
pub fn check_expansion(map: &SystemModel, grid: &SampleGrid) -> Result<ConditionReport> {
    if !map.is_map() {
        return Err(Error::WrongKind { expected: "map" });
    }
    let periods: Vec<f64> = map
        .periods()
        .into_iter()
        .map(|p| p.ok_or_else(|| Error::Precondition("expansion check needs a torus map".into())))
        .collect::<Result<_>>()?;
    let dim = periods.len();
    if dim > 3 {
        return Err(Error::Precondition("expansion check supports tori up to dimension 3".into()));
    }
    let per_axis = if dim == 1 { grid.n * 16 } else { grid.n };
    let axes: Vec<Vec<f64>> = periods.iter().map(|&p| circle_nodes(p, per_axis)).collect();
    let total: usize = axes.iter().map(Vec::len).product();
    let point = |mut idx: usize| -> Vec<f64> {
        let mut s = vec![0.0; dim];
        for (d, ax) in axes.iter().enumerate().rev() {
            s[d] = ax[idx % ax.len()];
            idx /= ax.len();
        }
        s
    };
    let sup = (0..total)
        .into_par_iter()
        .map(|i| {
            let s = point(i);
            let v = match jacobian_at(map, &s) {
                Ok(j) => {
                    let sm = min_singular(&j.matrix);
                    if sm > 0.0 {
                        1.0 / sm
                    } else {
                        f64::INFINITY
                    }
                }
                Err(_) => f64::INFINITY,
            };
            Sup::at(v, i)
        })
        .reduce(|| Sup::EMPTY, Sup::merge);
    let mut report = ConditionReport::new(
        &map.id,
        grid.meta(total, format!("{per_axis} nodes per angle")),
        map.has_analytic_jacobian(),
    );
    report.derived.insert("sup_inverse_derivative".into(), sup.value);
    let mut c = ConditionResult::below("expansion", sup.value, 1.0 - grid.margin, point(sup.index));
    if sup.value.is_infinite() {
        c = c.with_note("singular derivative at witness");
    }
    report.conditions.push(c);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zoo::{make_circle_family, make_doubling_map, make_torus_endomorphism, PeriodicFn};

    #[test]
    fn cat_map_is_anosov() {
        let r = check_anosov_matrix(&[vec![2.0, 1.0], vec![1.0, 1.0]]).unwrap();
        assert!(r.all_hold());
        let disc = 5f64.sqrt();
        assert!((r.derived["eig0_re"] - (3.0 + disc) / 2.0).abs() < 1e-12);
        assert!((r.derived["eig1_re"] - (3.0 - disc) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn identity_and_shear_fail() {
        let r = check_anosov_matrix(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(r.holds("hyperbolic"), Some(false));
        assert_eq!(r.get("hyperbolic").unwrap().witness_point, vec![1.0, 0.0]);
        let r = check_anosov_matrix(&[vec![1.0, 1.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(r.holds("hyperbolic"), Some(false));
        let r = check_anosov_matrix(&[vec![1.5, 1.0], vec![1.0, 1.0]]).unwrap();
        assert_eq!(r.holds("integral"), Some(false));
    }

    #[test]
    fn expansion_examples() {
        let r = check_expansion(&make_doubling_map(), &SampleGrid::default()).unwrap();
        assert!(r.all_hold());
        assert!((r.derived["sup_inverse_derivative"] - 0.5).abs() < 1e-12);

        let m = make_circle_family(1, PeriodicFn::sine(0.1), 0.0).unwrap();
        let r = check_expansion(&m, &SampleGrid::default()).unwrap();
        assert!(!r.all_hold());
        let expected = 1.0 / (1.0 - 0.2 * std::f64::consts::PI);
        assert!((r.derived["sup_inverse_derivative"] - expected).abs() < 1e-6);

        let two = make_torus_endomorphism(&[vec![2, 0], vec![0, 2]], None).unwrap();
        let r = check_expansion(&two, &SampleGrid::with_n(16)).unwrap();
        assert!(r.all_hold());
        assert!((r.derived["sup_inverse_derivative"] - 0.5).abs() < 1e-12);
    }
}
