use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dynsys::{Coord, Dynamics, ModelKind, SystemModel};
use crate::error::{Error, Result};
use crate::linalg::eigenvalues;

/// Normal form `ẏ = C y, ż = μ + z², θ̇ = Ω` near a saddle-node periodic orbit.
/// State layout: `(y_0..y_{k-1}, z, θ_0..θ_{m-1})` with unit-period angles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SaddleNodeParams {
    pub mu: f64,
    /// Row-major square matrix, stable.
    #[serde(default = "default_c")]
    pub c: Vec<Vec<f64>>,
    #[serde(default = "default_omega")]
    pub omega: Vec<f64>,
}

fn default_c() -> Vec<Vec<f64>> {
    vec![vec![-1.0]]
}

fn default_omega() -> Vec<f64> {
    vec![1.0]
}

impl SaddleNodeParams {
    pub fn new(mu: f64) -> Self {
        SaddleNodeParams {
            mu,
            c: default_c(),
            omega: default_omega(),
        }
    }

    fn c_matrix(&self) -> Result<DMatrix<f64>> {
        let k = self.c.len();
        if self.c.iter().any(|r| r.len() != k) {
            return Err(Error::param("c", "must be a square matrix"));
        }
        Ok(DMatrix::from_fn(k, k, |i, j| self.c[i][j]))
    }

    /// Equilibria of the `z` equation: `±√(−μ)` for `μ < 0`, `0` for `μ = 0`.
    pub fn z_equilibria(&self) -> Vec<f64> {
        if self.mu < 0.0 {
            let r = (-self.mu).sqrt();
            vec![-r, r]
        } else if self.mu == 0.0 {
            vec![0.0]
        } else {
            Vec::new()
        }
    }
}

/// Time for `ż = μ + z²` to go from `z0` to `z1` (`μ > 0`).
pub fn saddle_node_passage_time(mu: f64, z0: f64, z1: f64) -> f64 {
    let s = mu.sqrt();
    ((z1 / s).atan() - (z0 / s).atan()) / s
}

struct SaddleNode {
    c: DMatrix<f64>,
    mu: f64,
    omega: Vec<f64>,
}

impl Dynamics for SaddleNode {
    fn apply(&self, s: &[f64], out: &mut [f64]) {
        let k = self.c.nrows();
        for i in 0..k {
            out[i] = (0..k).map(|j| self.c[(i, j)] * s[j]).sum();
        }
        out[k] = self.mu + s[k] * s[k];
        for (i, w) in self.omega.iter().enumerate() {
            out[k + 1 + i] = *w;
        }
    }

    fn jacobian(&self, s: &[f64]) -> Option<DMatrix<f64>> {
        let k = self.c.nrows();
        let n = k + 1 + self.omega.len();
        let mut j = DMatrix::zeros(n, n);
        j.view_mut((0, 0), (k, k)).copy_from(&self.c);
        j[(k, k)] = 2.0 * s[k];
        Some(j)
    }
}

pub fn make_saddle_node_flow(p: &SaddleNodeParams) -> Result<SystemModel> {
    let c = p.c_matrix()?;
    if let Some(ev) = eigenvalues(&c).iter().find(|e| e.re >= 0.0) {
        return Err(Error::param(
            "c",
            format!("must be stable; eigenvalue {} has non-negative real part", ev),
        ));
    }
    if !p.mu.is_finite() {
        return Err(Error::param("mu", "must be finite"));
    }
    let k = c.nrows();
    let mut coords = vec![Coord::FREE; k + 1];
    coords.extend(std::iter::repeat_n(Coord::unit_angle(), p.omega.len()));
    let rule = SaddleNode {
        c,
        mu: p.mu,
        omega: p.omega.clone(),
    };
    Ok(SystemModel::new("saddle_node", ModelKind::Flow, coords, Arc::new(rule)).with_param("mu", p.mu))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equilibria_of_z_equation() {
        let p = SaddleNodeParams::new(-0.04);
        let m = make_saddle_node_flow(&p).unwrap();
        for z in p.z_equilibria() {
            assert!((z.abs() - 0.2).abs() < 1e-15);
            let d = m.eval(&[0.0, z, 0.3]);
            assert!(d[0].abs() < 1e-15 && d[1].abs() < 1e-15);
        }
        assert_eq!(SaddleNodeParams::new(0.0).z_equilibria(), vec![0.0]);
    }

    #[test]
    fn unstable_c_rejected() {
        let mut p = SaddleNodeParams::new(0.01);
        p.c = vec![vec![0.5]];
        assert!(make_saddle_node_flow(&p).is_err());
        p.c = vec![vec![-1.0, 3.0], vec![0.0, -0.1]];
        assert!(make_saddle_node_flow(&p).is_ok());
    }

    #[test]
    fn passage_time_closed_form() {
        let t = saddle_node_passage_time(0.01, -1.0, 1.0);
        assert!((t - 2.0 * 10f64.atan() / 0.1).abs() < 1e-12);
    }
}
