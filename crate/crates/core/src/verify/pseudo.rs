use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{circle_nodes, equispaced, ConditionReport, ConditionResult, SampleGrid, Sup};
use crate::dynsys::{jacobian_at, JacobianMethod, SystemModel};
use crate::error::{Error, Result};
use crate::linalg::{inverse, op_norm};

/// Characteristic exponents `γ, −λ ± iω, −α_j` of a saddle-focus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SaddleFocusExponents {
    pub gamma: f64,
    pub lambda: f64,
    pub omega: f64,
    #[serde(default)]
    pub alphas: Vec<f64>,
}

pub fn check_saddle_focus_gap(e: &SaddleFocusExponents) -> ConditionReport {
    let grid = SampleGrid {
        n: 0,
        n_aux: 0,
        delta: 0.0,
        margin: 0.0,
        locus_levels: 0,
    };
    let mut report = ConditionReport::new("saddle_focus", grid.meta(1, "exponent inequalities"), true);
    let mut point = vec![e.gamma, e.lambda, e.omega];
    point.extend(&e.alphas);
    let min_alpha = e.alphas.iter().copied().fold(f64::INFINITY, f64::min);
    let ordering = e.gamma > 0.0 && e.lambda > 0.0 && e.lambda < min_alpha;
    report.conditions.push(ConditionResult {
        id: "ordering".into(),
        holds: ordering,
        witness_value: e.lambda,
        witness_point: point.clone(),
        threshold: min_alpha,
        note: Some("γ > 0 and 0 < λ < min Re α_j".into()),
    });
    report.conditions.push(ConditionResult {
        id: "omega_nonzero".into(),
        holds: e.omega != 0.0,
        witness_value: e.omega,
        witness_point: point.clone(),
        threshold: 0.0,
        note: None,
    });
    report.conditions.push(ConditionResult {
        id: "gamma_gt_2lambda".into(),
        holds: e.gamma > 2.0 * e.lambda,
        witness_value: e.gamma - 2.0 * e.lambda,
        witness_point: point.clone(),
        threshold: 0.0,
        note: Some("value is γ − 2λ".into()),
    });
    let rho = e.lambda / e.gamma;
    report.derived.insert("rho".into(), rho);
    report.derived.insert("Omega".into(), e.omega / e.gamma);
    report.conditions.push(ConditionResult {
        id: "rho_lt_half".into(),
        holds: rho < 0.5,
        witness_value: rho,
        witness_point: point,
        threshold: 0.5,
        note: None,
    });
    report
}

/// The blocks of a map `(x̄, φ̄) = g(x, φ, z)`, `z̄ = f(x, φ, z)` at one point.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockDerivatives {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
    pub x: f64,
    pub det_g: f64,
    pub method: JacobianMethod,
}

/// `A = f_z − f_u D g_z`, `B = f_u D`, `C = D g_z`, `D = (g_u)⁻¹`, where `u`
/// are the first two coordinates and `z` the rest.
pub fn block_derivatives(map: &SystemModel, s: &[f64]) -> Result<BlockDerivatives> {
    let n = map.dim();
    if !map.is_map() || n < 3 {
        return Err(Error::Precondition("block split needs a map of dimension at least 3".into()));
    }
    let jac = jacobian_at(map, s)?;
    blocks_from(&jac.matrix, s, jac.method)
}

fn blocks_from(j: &DMatrix<f64>, s: &[f64], method: JacobianMethod) -> Result<BlockDerivatives> {
    let n = j.nrows();
    let k = n - 2;
    let g_u = j.view((0, 0), (2, 2)).into_owned();
    let g_z = j.view((0, 2), (2, k)).into_owned();
    let f_u = j.view((2, 0), (k, 2)).into_owned();
    let f_z = j.view((2, 2), (k, k)).into_owned();
    let det_g = g_u.determinant();
    if !(det_g != 0.0 && det_g.is_finite()) {
        return Err(Error::Singular(format!("∂g/∂(x,φ) is singular at {s:?}")));
    }
    let d = inverse(&g_u).map_err(|_| Error::Singular(format!("∂g/∂(x,φ) is singular at {s:?}")))?;
    let b = &f_u * &d;
    let c = &d * &g_z;
    let a = &f_z - &b * &g_z;
    Ok(BlockDerivatives {
        a,
        b,
        c,
        d,
        x: s[0],
        det_g,
        method,
    })
}

#[derive(Clone, Copy, Debug)]
struct Norms {
    a: f64,
    b: f64,
    c: f64,
    d: f64,
    sqrt_det_d: f64,
    det_g: f64,
}

fn norms(bd: &BlockDerivatives) -> Norms {
    Norms {
        a: op_norm(&bd.a),
        b: op_norm(&bd.b),
        c: op_norm(&bd.c),
        d: op_norm(&bd.d),
        sqrt_det_d: (1.0 / bd.det_g).abs().sqrt(),
        det_g: bd.det_g.abs(),
    }
}

/// Upper bound applied to the `ct4` boundedness sequences.
pub const CT4_CAP: f64 = 1e6;
/// Final value required of the `ct1` decay sequences.
pub const CT1_TOL: f64 = 1e-3;
/// Exponents `k` of the decay sequence `|x| = 2⁻ᵏ`.
pub const CT1_LEVELS: usize = 20;

/// Conditions `ct0`–`ct5` on a map with locus `{x = 0}` and state layout
/// `(x, φ, z…)`. `ct1` and `ct4` are evaluated along `|x| = 2⁻ᵏ`,
/// `k = 1..=20`; `ct4` checks boundedness only.
pub fn check_pseudohyperbolic(map: &SystemModel, grid: &SampleGrid, beta: f64) -> Result<ConditionReport> {
    if !map.is_map() || map.dim() < 3 {
        return Err(Error::Precondition("expects a map of dimension at least 3".into()));
    }
    let locus = map
        .locus
        .filter(|l| l.coord == 0)
        .ok_or_else(|| Error::Precondition("expects the discontinuity locus {x = const}".into()))?;
    if let (Some(rho), Some(eta)) = (map.param("rho"), map.param("eta")) {
        if !(beta > rho && beta < eta) {
            return Err(Error::Precondition(format!("beta = {beta} must lie in (rho, eta) = ({rho}, {eta})")));
        }
    } else if !(beta > 0.0) {
        return Err(Error::Precondition("beta must be positive".into()));
    }
    let bounds = |i: usize| match map.coords[i] {
        crate::dynsys::Coord::Real { lo, hi } if lo.is_finite() && hi.is_finite() => Ok((lo, hi, false)),
        crate::dynsys::Coord::Angle { period } => Ok((0.0, period, true)),
        _ => Err(Error::Precondition(format!("coordinate {i} must be bounded"))),
    };
    let (x_lo, x_hi, _) = bounds(0)?;
    let mut axes: Vec<Vec<f64>> = vec![grid.locus_axis(x_lo, x_hi, locus.value)];
    for i in 1..map.dim() {
        let (lo, hi, angle) = bounds(i)?;
        axes.push(if angle {
            circle_nodes(hi, grid.n_aux)
        } else {
            equispaced(lo, hi, grid.n_aux)
        });
    }
    let total: usize = axes.iter().map(Vec::len).product();
    let point = |mut idx: usize| -> Vec<f64> {
        let mut s = vec![0.0; axes.len()];
        for (d, ax) in axes.iter().enumerate().rev() {
            s[d] = ax[idx % ax.len()];
            idx /= ax.len();
        }
        s
    };

    // per-sample: [ct0 (−|det g_u|), √(‖A‖‖D‖), ‖A‖, ‖B‖, ‖C‖, √det D]
    type Sups = [Sup; 6];
    let merge = |a: Sups, b: Sups| -> Sups { std::array::from_fn(|k| a[k].merge(b[k])) };
    let sups: Sups = (0..total)
        .into_par_iter()
        .map(|i| {
            let s = point(i);
            match block_derivatives(map, &s) {
                Ok(bd) => {
                    let n = norms(&bd);
                    [
                        Sup::at(-n.det_g, i),
                        Sup::at((n.a * n.d).sqrt(), i),
                        Sup::at(n.a, i),
                        Sup::at(n.b, i),
                        Sup::at(n.c, i),
                        Sup::at(n.sqrt_det_d, i),
                    ]
                }
                Err(_) => [Sup::at(0.0, i), Sup::at(f64::INFINITY, i), Sup::at(f64::INFINITY, i), Sup::at(f64::INFINITY, i), Sup::at(f64::INFINITY, i), Sup::at(f64::INFINITY, i)],
            }
        })
        .reduce(|| [Sup::EMPTY; 6], merge);
    let [s_det, s_ad, s_a, s_b, s_c, s_detd] = sups;
    let cross = (s_b.value * s_c.value).sqrt();
    let cross_idx = if s_b.value * s_c.value == 0.0 {
        None
    } else if s_b.value >= s_c.value {
        Some(s_b.index)
    } else {
        Some(s_c.index)
    };
    let margin = grid.margin;
    let mut report = ConditionReport::new(
        &map.id,
        grid.meta(
            total,
            format!(
                "{} nodes in x (|x| >= delta), {} per remaining axis",
                axes[0].len(),
                grid.n_aux
            ),
        ),
        map.has_analytic_jacobian(),
    );
    report.derived.insert("beta".into(), beta);
    report.derived.insert("sup_norm_A".into(), s_a.value);
    report.derived.insert("sup_norm_B".into(), s_b.value);
    report.derived.insert("sup_norm_C".into(), s_c.value);
    report.derived.insert("sup_sqrt_AD".into(), s_ad.value);
    report.derived.insert("sup_sqrt_det_D".into(), s_detd.value);
    report.derived.insert("min_abs_det_g".into(), -s_det.value);

    let min_det = -s_det.value;
    report.conditions.push(ConditionResult {
        id: "ct0".into(),
        holds: min_det > 0.0 && min_det.is_finite(),
        witness_value: min_det,
        witness_point: point(s_det.index),
        threshold: 0.0,
        note: Some("value is min |det ∂g/∂(x,φ)|".into()),
    });

    // ct1 and ct4 along |x| = 2^-k
    let aux_total: usize = axes[1..].iter().map(Vec::len).product();
    let aux_point = |mut idx: usize, x: f64| -> Vec<f64> {
        let mut s = vec![x; axes.len()];
        for d in (1..axes.len()).rev() {
            s[d] = axes[d][idx % axes[d].len()];
            idx /= axes[d].len();
        }
        s
    };
    let mut seq_c = Vec::with_capacity(CT1_LEVELS);
    let mut seq_ad = Vec::with_capacity(CT1_LEVELS);
    let mut seq4: [Vec<f64>; 4] = Default::default();
    let mut ct1_witness = Vec::new();
    let mut ct4_witness = (f64::NEG_INFINITY, Vec::new());
    for k in 1..=CT1_LEVELS {
        let r = 2f64.powi(-(k as i32));
        let level: [Sup; 6] = (0..2 * aux_total)
            .into_par_iter()
            .map(|i| {
                let x = locus.value + if i < aux_total { r } else { -r };
                let s = aux_point(i % aux_total, x);
                match block_derivatives(map, &s) {
                    Ok(bd) => {
                        let n = norms(&bd);
                        let ax = r;
                        [
                            Sup::at(n.c, i),
                            Sup::at(n.a * n.d, i),
                            Sup::at(n.a * ax.powf(-beta), i),
                            Sup::at(n.d * ax.powf(beta), i),
                            Sup::at(n.b, i),
                            Sup::at(n.c, i),
                        ]
                    }
                    Err(_) => [Sup::at(f64::INFINITY, i); 6],
                }
            })
            .reduce(|| [Sup::EMPTY; 6], |a, b| std::array::from_fn(|j| a[j].merge(b[j])));
        let pt = |sup: Sup| {
            let x = locus.value + if sup.index < aux_total { r } else { -r };
            aux_point(sup.index % aux_total, x)
        };
        seq_c.push(level[0].value);
        seq_ad.push(level[1].value);
        if k == CT1_LEVELS {
            ct1_witness = if level[1].value >= level[0].value { pt(level[1]) } else { pt(level[0]) };
        }
        for (j, seq) in seq4.iter_mut().enumerate() {
            let sup = level[2 + j];
            seq.push(sup.value);
            if sup.value > ct4_witness.0 {
                ct4_witness = (sup.value, pt(sup));
            }
        }
    }
    let decreasing = |v: &[f64]| v.windows(2).all(|w| w[1] <= w[0]);
    let fin_c = *seq_c.last().expect("levels");
    let fin_ad = *seq_ad.last().expect("levels");
    let ct1_value = fin_c.max(fin_ad);
    let ct1_monotone = decreasing(&seq_c) && decreasing(&seq_ad);
    report.derived.insert("ct1_final_C".into(), fin_c);
    report.derived.insert("ct1_final_AD".into(), fin_ad);
    report.conditions.push(ConditionResult {
        id: "ct1".into(),
        holds: ct1_monotone && ct1_value < CT1_TOL,
        witness_value: ct1_value,
        witness_point: ct1_witness,
        threshold: CT1_TOL,
        note: Some(format!(
            "numerical evidence along |x| = 2^-k, k = 1..{CT1_LEVELS}; sequences {}",
            if ct1_monotone { "non-increasing" } else { "not monotone" }
        )),
    });
    report.sequences.insert("ct1_C".into(), seq_c);
    report.sequences.insert("ct1_AD".into(), seq_ad);

    let ct2 = s_ad.value + cross;
    report.conditions.push(ConditionResult::below(
        "ct2",
        ct2,
        1.0 - margin,
        point(if s_ad.value >= cross { s_ad.index } else { cross_idx.unwrap_or(s_ad.index) }),
    ));
    let ct3 = s_a.value + cross;
    report.conditions.push(ConditionResult::below(
        "ct3",
        ct3,
        1.0 - margin,
        point(if s_a.value >= cross { s_a.index } else { cross_idx.unwrap_or(s_a.index) }),
    ));

    let names = ["ct4_A_x^-beta", "ct4_D_x^beta", "ct4_B", "ct4_C"];
    let mut bounded = true;
    for (name, seq) in names.iter().zip(&seq4) {
        let half = seq.len() / 2;
        let head = seq[..half.max(1)].iter().copied().fold(0.0f64, f64::max);
        let tail = *seq.last().expect("levels");
        let ok = seq.iter().all(|v| v.is_finite() && *v <= CT4_CAP) && tail <= 10.0 * head.max(f64::MIN_POSITIVE);
        bounded &= ok;
        report.sequences.insert((*name).into(), seq.clone());
    }
    report.conditions.push(ConditionResult {
        id: "ct4".into(),
        holds: bounded,
        witness_value: ct4_witness.0,
        witness_point: ct4_witness.1,
        threshold: CT4_CAP,
        note: Some("boundedness only; Hölder continuity not checked".into()),
    });

    let ct5 = s_detd.value + cross;
    report.conditions.push(ConditionResult::below(
        "ct5",
        ct5,
        1.0 - margin,
        point(if s_detd.value >= cross { s_detd.index } else { cross_idx.unwrap_or(s_detd.index) }),
    ));
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zoo::{make_wild_map, WildMapParams};

    #[test]
    fn saddle_focus_examples() {
        let ok = check_saddle_focus_gap(&SaddleFocusExponents {
            gamma: 1.0,
            lambda: 0.4,
            omega: 1.0,
            alphas: vec![0.6],
        });
        assert!(ok.all_hold());
        assert!((ok.derived["rho"] - 0.4).abs() < 1e-15);
        let edge = check_saddle_focus_gap(&SaddleFocusExponents {
            gamma: 1.0,
            lambda: 0.5,
            omega: 1.0,
            alphas: vec![0.6],
        });
        assert_eq!(edge.holds("gamma_gt_2lambda"), Some(false));
        let order = check_saddle_focus_gap(&SaddleFocusExponents {
            gamma: 1.0,
            lambda: 0.7,
            omega: 1.0,
            alphas: vec![0.6],
        });
        assert_eq!(order.holds("ordering"), Some(false));
    }

    #[test]
    fn wild_blocks_have_zero_c() {
        let m = make_wild_map(&WildMapParams::default()).unwrap();
        let bd = block_derivatives(&m, &[1.0, 0.0, 0.0]).unwrap();
        assert!(bd.c.iter().all(|v| *v == 0.0));
        assert!((bd.a[(0, 0)] - 0.1).abs() < 1e-15);
        assert_eq!(bd.method, JacobianMethod::Analytic);
    }

    #[test]
    fn beta_outside_range_refused() {
        let m = make_wild_map(&WildMapParams::default()).unwrap();
        assert!(check_pseudohyperbolic(&m, &SampleGrid::with_n(8), 0.3).is_err());
    }
}
