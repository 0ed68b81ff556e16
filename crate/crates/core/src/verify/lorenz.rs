use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{equispaced, ConditionReport, ConditionResult, SampleGrid, Sup};
use crate::dynsys::{jacobian_at, SystemModel};
use crate::error::{Error, Result};

/// The four sampled sup-norms entering the Lorenz-map conditions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LorenzNorms {
    /// `‖f_x‖`
    pub fx: f64,
    /// `‖(g_y)⁻¹‖`
    pub gy_inv: f64,
    /// `‖g_x‖`
    pub gx: f64,
    /// `‖(g_y)⁻¹ f_y‖`
    pub gy_inv_fy: f64,
}

impl LorenzNorms {
    fn from_report(r: &ConditionReport) -> Result<Self> {
        let get = |k: &str| {
            r.derived
                .get(k)
                .copied()
                .ok_or_else(|| Error::Precondition(format!("report lacks `{k}`")))
        };
        Ok(LorenzNorms {
            fx: get("norm_fx")?,
            gy_inv: get("norm_gy_inv")?,
            gx: get("norm_gx")?,
            gy_inv_fy: get("norm_gy_inv_fy")?,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QVariant {
    /// Radicand `1 − b²a − 4bcd`.
    Printed,
    /// Radicand `(1 − ab)² − 4bcd`, whose positivity is condition (b).
    Squared,
}

/// `q = (1 + ab + √R) / (2b)` with `a = ‖f_x‖`, `b = ‖(g_y)⁻¹‖`, `c = ‖g_x‖`,
/// `d = ‖(g_y)⁻¹ f_y‖` and the radicand `R` chosen by `variant`.
pub fn q_formula(n: &LorenzNorms, variant: QVariant) -> Result<f64> {
    let (a, b, c, d) = (n.fx, n.gy_inv, n.gx, n.gy_inv_fy);
    let radicand = match variant {
        QVariant::Printed => 1.0 - b * b * a - 4.0 * b * c * d,
        QVariant::Squared => (1.0 - a * b).powi(2) - 4.0 * b * c * d,
    };
    if !(radicand >= 0.0) {
        return Err(Error::Inconsistent(format!(
            "negative radicand {radicand:e} in q ({variant:?}); condition (b) cannot hold"
        )));
    }
    if !(b > 0.0) {
        return Err(Error::Inconsistent("‖(g_y)⁻¹‖ must be positive".into()));
    }
    Ok((1.0 + a * b + radicand.sqrt()) / (2.0 * b))
}

/// Computes q from a report of [`check_lorenz_conditions`]. Refuses reports
/// in which any condition fails.
pub fn compute_q(report: &ConditionReport, variant: QVariant) -> Result<f64> {
    for id in ["a", "b", "c", "d"] {
        match report.holds(id) {
            Some(true) => {}
            Some(false) => {
                return Err(Error::Precondition(format!("condition ({id}) does not hold")));
            }
            None => return Err(Error::Precondition(format!("report lacks condition ({id})"))),
        }
    }
    let q = q_formula(&LorenzNorms::from_report(report)?, variant)?;
    if !(q > 1.0) {
        return Err(Error::Inconsistent(format!("q = {q} is not greater than 1")));
    }
    Ok(q)
}

#[derive(Clone, Copy)]
struct Local {
    fx: f64,
    gy_inv: f64,
    gx: f64,
    gy_inv_fy: f64,
}

/// Conditions (a)–(d) on a two-dimensional Lorenz-type map with locus
/// `{y = 0}`, sampled on `[−1, 1]²` minus the band `|y| < delta`.
pub fn check_lorenz_conditions(map: &SystemModel, grid: &SampleGrid) -> Result<ConditionReport> {
    if !map.is_map() || map.dim() != 2 {
        return Err(Error::Precondition("expects a two-dimensional map".into()));
    }
    let locus = map
        .locus
        .filter(|l| l.coord == 1)
        .ok_or_else(|| Error::Precondition("expects the discontinuity locus {y = const}".into()))?;
    let xs = equispaced(-1.0, 1.0, grid.n);
    let ys = grid.locus_axis(-1.0, 1.0, locus.value);
    let total = xs.len() * ys.len();
    let point = |i: usize| vec![xs[i / ys.len()], ys[i % ys.len()]];

    let eval = |i: usize| -> Local {
        let s = point(i);
        match jacobian_at(map, &s) {
            Ok(j) => {
                let m = j.matrix;
                let (fx, fy, gx, gy) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
                let gy_inv = if gy != 0.0 { 1.0 / gy.abs() } else { f64::INFINITY };
                Local {
                    fx: fx.abs(),
                    gy_inv,
                    gx: gx.abs(),
                    gy_inv_fy: if gy != 0.0 { (fy / gy).abs() } else { f64::INFINITY },
                }
            }
            Err(_) => Local {
                fx: f64::INFINITY,
                gy_inv: f64::INFINITY,
                gx: f64::INFINITY,
                gy_inv_fy: f64::INFINITY,
            },
        }
    };
    type Sups = [Sup; 6];
    let merge = |a: Sups, b: Sups| -> Sups { std::array::from_fn(|k| a[k].merge(b[k])) };
    let sups: Sups = (0..total)
        .into_par_iter()
        .map(|i| {
            let l = eval(i);
            // local combinations used only to locate witnesses of (b) and (d)
            let b_loc = l.gy_inv * l.fx + 2.0 * (l.gy_inv * l.gx * l.gy_inv_fy).sqrt();
            let d_loc = l.gy_inv_fy * l.gx + l.fx + l.gy_inv - l.fx * l.gy_inv;
            [
                Sup::at(l.fx, i),
                Sup::at(l.gy_inv, i),
                Sup::at(l.gx, i),
                Sup::at(l.gy_inv_fy, i),
                Sup::at(b_loc, i),
                Sup::at(d_loc, i),
            ]
        })
        .reduce(|| [Sup::EMPTY; 6], merge);
    let [sa, sb, sc, sd, sb_loc, sd_loc] = sups;
    let (a, b, c, d) = (sa.value, sb.value, sc.value, sd.value);
    let margin = grid.margin;

    let mut report = ConditionReport::new(
        &map.id,
        grid.meta(
            total,
            format!("{}x{} nodes on [-1,1]^2, |y| >= delta", xs.len(), ys.len()),
        ),
        map.has_analytic_jacobian(),
    );
    report.derived.insert("norm_fx".into(), a);
    report.derived.insert("norm_gy_inv".into(), b);
    report.derived.insert("norm_gx".into(), c);
    report.derived.insert("norm_gy_inv_fy".into(), d);

    report.conditions.push(ConditionResult::below("a", a, 1.0 - margin, point(sa.index)));
    // (b): 1 − b a > 2 √(b c d), tested as b a + 2√(bcd) < 1 − margin
    let lhs_b = b * a + 2.0 * (b * c * d).sqrt();
    report
        .conditions
        .push(ConditionResult::below("b", lhs_b, 1.0 - margin, point(sb_loc.index)).with_note(
            "value is ‖(g_y)⁻¹‖‖f_x‖ + 2√(‖(g_y)⁻¹‖‖g_x‖‖(g_y)⁻¹f_y‖)",
        ));
    let mut cc = ConditionResult::below("c", b, 1.0 - margin, point(sb.index));
    if b.is_infinite() {
        cc = cc.with_note("g_y not invertible at witness");
    }
    report.conditions.push(cc);
    // (d): d c < (1 − a)(1 − b), tested as d c + a + b − a b < 1 − margin
    let lhs_d = d * c + a + b - a * b;
    report.conditions.push(
        ConditionResult::below("d", lhs_d, 1.0 - margin, point(sd_loc.index))
            .with_note("value is ‖(g_y)⁻¹f_y‖‖g_x‖ + 1 − (1 − ‖f_x‖)(1 − ‖(g_y)⁻¹‖)"),
    );
    if report.all_hold() {
        for (name, v) in [("q_printed", QVariant::Printed), ("q_squared", QVariant::Squared)] {
            if let Ok(q) = q_formula(&LorenzNorms { fx: a, gy_inv: b, gx: c, gy_inv_fy: d }, v) {
                report.derived.insert(name.into(), q);
            }
        }
    }
    Ok(report)
}
