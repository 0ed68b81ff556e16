use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::model::{wrapped_diff, ModelKind, SystemModel};
use crate::error::{Error, Result};

/// Relative finite-difference step: `h_i = FD_STEP * max(1, |s_i|)`.
pub const FD_STEP: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum JacobianMethod {
    Analytic,
    FiniteDifference { relative_step: f64 },
}

#[derive(Clone, Debug)]
pub struct JacobianEval {
    pub matrix: DMatrix<f64>,
    pub method: JacobianMethod,
}

/// Jacobian of the rhs (flows) or of the map (maps) at `s`.
///
/// Uses the analytic rule when the model has one, otherwise central
/// differences. Finite differences refuse states within `2h` of the
/// discontinuity locus; analytic rules refuse only states on it.
pub fn jacobian_at(model: &SystemModel, s: &[f64]) -> Result<JacobianEval> {
    model.check_dim(s)?;
    let analytic = model.rule().jacobian(s);
    if let Some(locus) = model.locus {
        // analytic rules only need to stay off the locus itself
        let band = if analytic.is_some() {
            0.0
        } else {
            2.0 * FD_STEP * s[locus.coord].abs().max(1.0)
        };
        let d = locus.distance(s);
        if d <= band {
            return Err(Error::LocusHit {
                index: 0,
                band,
                state: s.to_vec(),
                partial: None,
            });
        }
    }
    if let Some(matrix) = analytic {
        return Ok(JacobianEval {
            matrix,
            method: JacobianMethod::Analytic,
        });
    }
    Ok(JacobianEval {
        matrix: finite_difference_jacobian(model, s),
        method: JacobianMethod::FiniteDifference {
            relative_step: FD_STEP,
        },
    })
}

/// Central-difference Jacobian, ignoring any analytic rule. Differences of
/// angular outputs of maps are wrapped.
pub fn finite_difference_jacobian(model: &SystemModel, s: &[f64]) -> DMatrix<f64> {
    let n = model.dim();
    let periods = model.periods();
    let wrap_out = model.kind == ModelKind::Map;
    let mut jac = DMatrix::zeros(n, n);
    let mut sp = s.to_vec();
    let mut sm = s.to_vec();
    let mut fp = vec![0.0; n];
    let mut fm = vec![0.0; n];
    for j in 0..n {
        let h = FD_STEP * s[j].abs().max(1.0);
        sp[j] = s[j] + h;
        sm[j] = s[j] - h;
        model.apply(&sp, &mut fp);
        model.apply(&sm, &mut fm);
        for i in 0..n {
            let diff = match periods[i] {
                Some(p) if wrap_out => wrapped_diff(fp[i], fm[i], p),
                _ => fp[i] - fm[i],
            };
            jac[(i, j)] = diff / (2.0 * h);
        }
        sp[j] = s[j];
        sm[j] = s[j];
    }
    jac
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fd_matches_polynomial_derivative() {
        let m = SystemModel::custom_map("poly", 2, |s, o| {
            o[0] = s[0] * s[0] * s[1];
            o[1] = s[1].sin();
        });
        let j = jacobian_at(&m, &[1.5, 0.3]).unwrap();
        assert!(matches!(j.method, JacobianMethod::FiniteDifference { .. }));
        assert!((j.matrix[(0, 0)] - 2.0 * 1.5 * 0.3).abs() < 1e-8);
        assert!((j.matrix[(0, 1)] - 2.25).abs() < 1e-8);
        assert!((j.matrix[(1, 1)] - 0.3f64.cos()).abs() < 1e-8);
        assert!(j.matrix[(1, 0)].abs() < 1e-12);
    }

    #[test]
    fn locus_proximity_rejected() {
        let m = SystemModel::custom_map("abs", 1, |s, o| o[0] = s[0].abs()).with_locus(0, 0.0);
        assert!(jacobian_at(&m, &[1e-7]).is_err());
        assert!(jacobian_at(&m, &[1e-3]).is_ok());
    }
}
