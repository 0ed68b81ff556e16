use std::f64::consts::TAU;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dynsys::{Coord, Dynamics, ModelKind, SystemModel};
use crate::error::{Error, Result};

/// Saddle-focus return map on `Π = {|x| ≤ 1, φ ∈ [0, 2π), |z| ≤ 1}`:
///
/// ```text
/// x̄ = cx |x|^ρ cos(Ω ln|x| + φ)
/// φ̄ = cphi |x|^ρ sin(Ω ln|x| + φ)     mod 2π
/// z̄ = (z0 + cz z |x|^η) sign x
/// ```
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WildMapParams {
    pub rho: f64,
    pub eta: f64,
    pub omega: f64,
    pub cx: f64,
    pub cphi: f64,
    pub z0: f64,
    pub cz: f64,
}

impl Default for WildMapParams {
    fn default() -> Self {
        WildMapParams {
            rho: 0.4,
            eta: 0.5,
            omega: 1.0,
            cx: 0.9,
            cphi: 3.0,
            z0: 0.5,
            cz: 0.1,
        }
    }
}

impl WildMapParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho < 0.5) {
            return Err(Error::param("rho", "must lie in (0, 1/2)"));
        }
        if !(self.eta > self.rho) {
            return Err(Error::param("eta", "must exceed rho"));
        }
        for (n, v) in [
            ("omega", self.omega),
            ("cx", self.cx),
            ("cphi", self.cphi),
            ("z0", self.z0),
            ("cz", self.cz),
        ] {
            if !v.is_finite() {
                return Err(Error::param(n, "must be finite"));
            }
        }
        Ok(())
    }
}

struct Wild(WildMapParams);

impl Dynamics for Wild {
    fn apply(&self, s: &[f64], out: &mut [f64]) {
        let p = &self.0;
        let (x, phi, z) = (s[0], s[1], s[2]);
        let ax = x.abs();
        let r = ax.powf(p.rho);
        let arg = p.omega * ax.ln() + phi;
        out[0] = p.cx * r * arg.cos();
        out[1] = p.cphi * r * arg.sin();
        out[2] = (p.z0 + p.cz * z * ax.powf(p.eta)) * x.signum();
    }

    fn jacobian(&self, s: &[f64]) -> Option<DMatrix<f64>> {
        let p = &self.0;
        let (x, phi, z) = (s[0], s[1], s[2]);
        let ax = x.abs();
        let sg = x.signum();
        let arg = p.omega * ax.ln() + phi;
        let (sn, cs) = arg.sin_cos();
        let r = ax.powf(p.rho);
        // d/dx of |x|^ρ and of the phase
        let dr = p.rho * ax.powf(p.rho - 1.0) * sg;
        let darg = p.omega / x;
        Some(DMatrix::from_row_slice(
            3,
            3,
            &[
                p.cx * (dr * cs - r * sn * darg),
                -p.cx * r * sn,
                0.0,
                p.cphi * (dr * sn + r * cs * darg),
                p.cphi * r * cs,
                0.0,
                p.cz * z * p.eta * ax.powf(p.eta - 1.0),
                0.0,
                p.cz * ax.powf(p.eta) * sg,
            ],
        ))
    }
}

pub fn make_wild_map(p: &WildMapParams) -> Result<SystemModel> {
    p.validate()?;
    let coords = vec![Coord::real(-1.0, 1.0), Coord::Angle { period: TAU }, Coord::real(-1.0, 1.0)];
    Ok(SystemModel::new("wild", ModelKind::Map, coords, Arc::new(Wild(*p)))
        .with_locus(0, 0.0)
        .with_param("rho", p.rho)
        .with_param("eta", p.eta)
        .with_param("omega", p.omega)
        .with_param("cx", p.cx)
        .with_param("cphi", p.cphi)
        .with_param("z0", p.z0)
        .with_param("cz", p.cz))
}
