use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dynsys::{Coord, Dynamics, ModelKind, SystemModel};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LorenzParams {
    pub sigma: f64,
    pub r: f64,
    pub b: f64,
}

impl Default for LorenzParams {
    fn default() -> Self {
        LorenzParams {
            sigma: 10.0,
            r: 28.0,
            b: 8.0 / 3.0,
        }
    }
}

impl LorenzParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("sigma", self.sigma), ("r", self.r), ("b", self.b)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::param(name, "must be strictly positive"));
            }
        }
        Ok(())
    }

    /// Constant divergence `-(σ + 1 + b)` of the vector field.
    pub fn divergence(&self) -> f64 {
        -(self.sigma + 1.0 + self.b)
    }

    /// The two symmetric equilibria `(±√(b(r−1)), ±√(b(r−1)), r−1)`, present
    /// for `r > 1`.
    pub fn nontrivial_equilibria(&self) -> Option<[[f64; 3]; 2]> {
        if self.r <= 1.0 {
            return None;
        }
        let c = (self.b * (self.r - 1.0)).sqrt();
        let z = self.r - 1.0;
        Some([[c, c, z], [-c, -c, z]])
    }
}

struct Lorenz(LorenzParams);

impl Dynamics for Lorenz {
    fn apply(&self, s: &[f64], out: &mut [f64]) {
        let LorenzParams { sigma, r, b } = self.0;
        let (x, y, z) = (s[0], s[1], s[2]);
        out[0] = sigma * (y - x);
        out[1] = x * (r - z) - y;
        out[2] = x * y - b * z;
    }

    fn jacobian(&self, s: &[f64]) -> Option<DMatrix<f64>> {
        let LorenzParams { sigma, r, b } = self.0;
        let (x, y, z) = (s[0], s[1], s[2]);
        Some(DMatrix::from_row_slice(
            3,
            3,
            &[-sigma, sigma, 0.0, r - z, -1.0, -x, y, x, -b],
        ))
    }
}

pub fn make_lorenz(p: LorenzParams) -> Result<SystemModel> {
    p.validate()?;
    Ok(SystemModel::new("lorenz", ModelKind::Flow, vec![Coord::FREE; 3], Arc::new(Lorenz(p)))
        .with_param("sigma", p.sigma)
        .with_param("r", p.r)
        .with_param("b", p.b)
        .with_symmetry(vec![-1.0, -1.0, 1.0]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classic_rhs_values() {
        let m = make_lorenz(LorenzParams::default()).unwrap();
        let d = m.eval(&[1.0, 1.0, 1.0]);
        assert_eq!(d[0], 0.0);
        assert_eq!(d[1], 26.0);
        assert!((d[2] + 5.0 / 3.0).abs() < 1e-15);
        assert_eq!(m.eval(&[0.0; 3]), vec![0.0; 3]);
    }

    #[test]
    fn nontrivial_equilibria_are_roots() {
        let p = LorenzParams::default();
        let m = make_lorenz(p).unwrap();
        for e in p.nontrivial_equilibria().unwrap() {
            assert!((e[0].abs() - 72f64.sqrt()).abs() < 1e-12);
            assert_eq!(e[2], 27.0);
            let d = m.eval(&e);
            assert!(d.iter().all(|v| v.abs() < 1e-12));
        }
    }

    #[test]
    fn rejects_nonpositive() {
        assert!(make_lorenz(LorenzParams { sigma: 0.0, ..Default::default() }).is_err());
        assert!(make_lorenz(LorenzParams { b: -1.0, ..Default::default() }).is_err());
    }

    #[test]
    fn jacobian_at_origin() {
        let m = make_lorenz(LorenzParams::default()).unwrap();
        let j = crate::dynsys::jacobian_at(&m, &[0.0; 3]).unwrap().matrix;
        let expect = DMatrix::from_row_slice(3, 3, &[-10.0, 10.0, 0.0, 28.0, -1.0, 0.0, 0.0, 0.0, -8.0 / 3.0]);
        assert_eq!(j, expect);
    }
}
