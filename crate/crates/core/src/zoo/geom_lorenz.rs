use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dynsys::{Coord, Dynamics, ModelKind, SystemModel};
use crate::error::{Error, Result};

type Fn2 = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Smooth correction factor multiplying `|y|^α` in the singular branch form.
#[derive(Clone)]
pub enum Correction {
    Const(f64),
    /// `c0 + cx * x`.
    Affine { c0: f64, cx: f64 },
    /// Value and partial derivatives in `x` and `y`.
    Custom { value: Fn2, dx: Fn2, dy: Fn2 },
}

impl fmt::Debug for Correction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Correction::Const(c) => write!(f, "Const({c})"),
            Correction::Affine { c0, cx } => write!(f, "Affine {{ c0: {c0}, cx: {cx} }}"),
            Correction::Custom { .. } => write!(f, "Custom"),
        }
    }
}

impl Correction {
    pub fn custom<V, X, Y>(value: V, dx: X, dy: Y) -> Self
    where
        V: Fn(f64, f64) -> f64 + Send + Sync + 'static,
        X: Fn(f64, f64) -> f64 + Send + Sync + 'static,
        Y: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        Correction::Custom {
            value: Arc::new(value),
            dx: Arc::new(dx),
            dy: Arc::new(dy),
        }
    }

    pub fn value(&self, x: f64, y: f64) -> f64 {
        match self {
            Correction::Const(c) => *c,
            Correction::Affine { c0, cx } => c0 + cx * x,
            Correction::Custom { value, .. } => value(x, y),
        }
    }

    pub fn dx(&self, x: f64, y: f64) -> f64 {
        match self {
            Correction::Const(_) => 0.0,
            Correction::Affine { cx, .. } => *cx,
            Correction::Custom { dx, .. } => dx(x, y),
        }
    }

    pub fn dy(&self, x: f64, y: f64) -> f64 {
        match self {
            Correction::Const(_) | Correction::Affine { .. } => 0.0,
            Correction::Custom { dy, .. } => dy(x, y),
        }
    }

    /// The correction of the mirrored branch, `c₂(x, y) = −c₁(−x, −y)`.
    pub fn mirror(&self) -> Correction {
        match self {
            Correction::Const(c) => Correction::Const(-c),
            Correction::Affine { c0, cx } => Correction::Affine { c0: -c0, cx: *cx },
            Correction::Custom { value, dx, dy } => {
                let (v, a, b) = (value.clone(), dx.clone(), dy.clone());
                Correction::Custom {
                    value: Arc::new(move |x, y| -v(-x, -y)),
                    dx: Arc::new(move |x, y| a(-x, -y)),
                    dy: Arc::new(move |x, y| b(-x, -y)),
                }
            }
        }
    }
}

/// Configuration form of [`Correction`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CorrectionSpec {
    Const(f64),
    Affine { c0: f64, cx: f64 },
}

impl From<CorrectionSpec> for Correction {
    fn from(c: CorrectionSpec) -> Self {
        match c {
            CorrectionSpec::Const(v) => Correction::Const(v),
            CorrectionSpec::Affine { c0, cx } => Correction::Affine { c0, cx },
        }
    }
}

/// Poincaré map of a Lorenz-like flow near the stable manifold `{y = 0}`:
///
/// ```text
/// y > 0:  x̄ = x1s + φ₁(x,y) y^α,     ȳ = y1s + ψ₁(x,y) y^α
/// y < 0:  x̄ = x2s + φ₂(x,y) (−y)^α,  ȳ = y2s + ψ₂(x,y) (−y)^α
/// ```
#[derive(Clone, Debug)]
pub struct GeomLorenzParams {
    pub x1s: f64,
    pub x2s: f64,
    pub y1s: f64,
    pub y2s: f64,
    pub alpha: f64,
    pub phi1: Correction,
    pub psi1: Correction,
    pub phi2: Correction,
    pub psi2: Correction,
}

impl GeomLorenzParams {
    /// Map commuting with `(x, y) ↦ (−x, −y)`.
    pub fn symmetric(x1s: f64, y1s: f64, alpha: f64, phi: Correction, psi: Correction) -> Self {
        GeomLorenzParams {
            x1s,
            x2s: -x1s,
            y1s,
            y2s: -y1s,
            alpha,
            phi2: phi.mirror(),
            psi2: psi.mirror(),
            phi1: phi,
            psi1: psi,
        }
    }

    /// Separatrix value `A₁`, the limit of `φ₁` at the origin of `S`.
    pub fn a1(&self) -> f64 {
        self.phi1.value(0.0, 0.0)
    }

    /// Separatrix value `A₂`, the limit of `ψ₂` at the origin of `S`.
    pub fn a2(&self) -> f64 {
        self.psi2.value(0.0, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::param("alpha", "must lie in (0, 1)"));
        }
        if self.a1() * self.a2() == 0.0 || !(self.a1() * self.a2()).is_finite() {
            return Err(Error::param("phi1/psi2", "separatrix values A1, A2 must be nonzero"));
        }
        for (n, v) in [("x1s", self.x1s), ("x2s", self.x2s), ("y1s", self.y1s), ("y2s", self.y2s)] {
            if !v.is_finite() {
                return Err(Error::param(n, "must be finite"));
            }
        }
        Ok(())
    }
}

struct GeomLorenz(GeomLorenzParams);

impl GeomLorenz {
    fn branch(&self, y: f64) -> (f64, f64, &Correction, &Correction, f64, f64) {
        let p = &self.0;
        let a = p.alpha;
        if y > 0.0 {
            let u = y.powf(a);
            (p.x1s, p.y1s, &p.phi1, &p.psi1, u, a * y.powf(a - 1.0))
        } else {
            let u = (-y).powf(a);
            (p.x2s, p.y2s, &p.phi2, &p.psi2, u, -a * (-y).powf(a - 1.0))
        }
    }
}

impl Dynamics for GeomLorenz {
    fn apply(&self, s: &[f64], out: &mut [f64]) {
        let (x, y) = (s[0], s[1]);
        let (xs, ys, phi, psi, u, _) = self.branch(y);
        out[0] = xs + phi.value(x, y) * u;
        out[1] = ys + psi.value(x, y) * u;
    }

    fn jacobian(&self, s: &[f64]) -> Option<DMatrix<f64>> {
        let (x, y) = (s[0], s[1]);
        let (_, _, phi, psi, u, du) = self.branch(y);
        Some(DMatrix::from_row_slice(
            2,
            2,
            &[
                phi.dx(x, y) * u,
                phi.dy(x, y) * u + phi.value(x, y) * du,
                psi.dx(x, y) * u,
                psi.dy(x, y) * u + psi.value(x, y) * du,
            ],
        ))
    }
}

/// Geometric Lorenz map on `[−1, 1]²` with discontinuity locus `{y = 0}`.
/// Images outside the square are domain escapes.
pub fn make_geometric_lorenz(p: &GeomLorenzParams) -> Result<SystemModel> {
    p.validate()?;
    let mut m = SystemModel::new(
        "geometric_lorenz",
        ModelKind::Map,
        vec![Coord::real(-1.0, 1.0); 2],
        Arc::new(GeomLorenz(p.clone())),
    )
    .with_locus(1, 0.0)
    .with_param("x1s", p.x1s)
    .with_param("x2s", p.x2s)
    .with_param("y1s", p.y1s)
    .with_param("y2s", p.y2s)
    .with_param("alpha", p.alpha)
    .with_param("A1", p.a1())
    .with_param("A2", p.a2());
    if p.x2s == -p.x1s && p.y2s == -p.y1s {
        m = m.with_symmetry(vec![-1.0, -1.0]);
    }
    Ok(m)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeomLorenzConfig {
    pub x1s: f64,
    pub y1s: f64,
    #[serde(default)]
    pub x2s: Option<f64>,
    #[serde(default)]
    pub y2s: Option<f64>,
    pub alpha: f64,
    pub phi1: CorrectionSpec,
    pub psi1: CorrectionSpec,
    #[serde(default)]
    pub phi2: Option<CorrectionSpec>,
    #[serde(default)]
    pub psi2: Option<CorrectionSpec>,
}

impl From<GeomLorenzConfig> for GeomLorenzParams {
    fn from(c: GeomLorenzConfig) -> Self {
        let phi1: Correction = c.phi1.into();
        let psi1: Correction = c.psi1.into();
        GeomLorenzParams {
            x1s: c.x1s,
            x2s: c.x2s.unwrap_or(-c.x1s),
            y1s: c.y1s,
            y2s: c.y2s.unwrap_or(-c.y1s),
            alpha: c.alpha,
            phi2: c.phi2.map_or_else(|| phi1.mirror(), Into::into),
            psi2: c.psi2.map_or_else(|| psi1.mirror(), Into::into),
            phi1,
            psi1,
        }
    }
}

/// Piecewise-linear Lorenz-type map used as a benchmark for the sampled
/// conditions. The defaults map `[−1, 1]²` into itself:
///
/// ```text
/// y > 0:  x̄ = x1s + fx x + fy y,   ȳ = y1s + gx x + gy y
/// y < 0:  x̄ = x2s + fx x + fy y,   ȳ = y2s + gx x + gy y
/// ```
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlLorenzParams {
    pub x1s: f64,
    pub y1s: f64,
    pub x2s: f64,
    pub y2s: f64,
    pub fx: f64,
    pub fy: f64,
    pub gx: f64,
    pub gy: f64,
}

impl Default for PlLorenzParams {
    fn default() -> Self {
        PlLorenzParams {
            x1s: 0.5,
            y1s: -0.9,
            x2s: -0.5,
            y2s: 0.9,
            fx: 0.4,
            fy: 0.1,
            gx: 0.1,
            gy: 1.8,
        }
    }
}

impl PlLorenzParams {
    /// The decoupled map `x̄ = x*`, `ȳ = ∓1 + s y` with the given slope.
    pub fn decoupled(slope: f64) -> Self {
        PlLorenzParams {
            y1s: -1.0,
            y2s: 1.0,
            fx: 0.0,
            fy: 0.0,
            gx: 0.0,
            gy: slope,
            ..Default::default()
        }
    }
}

struct PlLorenz(PlLorenzParams);

impl Dynamics for PlLorenz {
    fn apply(&self, s: &[f64], out: &mut [f64]) {
        let p = &self.0;
        let (x, y) = (s[0], s[1]);
        let (xs, ys) = if y > 0.0 { (p.x1s, p.y1s) } else { (p.x2s, p.y2s) };
        out[0] = xs + p.fx * x + p.fy * y;
        out[1] = ys + p.gx * x + p.gy * y;
    }

    fn jacobian(&self, _s: &[f64]) -> Option<DMatrix<f64>> {
        let p = &self.0;
        Some(DMatrix::from_row_slice(2, 2, &[p.fx, p.fy, p.gx, p.gy]))
    }
}

pub fn make_pl_lorenz(p: &PlLorenzParams) -> Result<SystemModel> {
    if p.gy == 0.0 {
        return Err(Error::param("gy", "must be nonzero"));
    }
    Ok(SystemModel::new(
        "lorenz_pl",
        ModelKind::Map,
        vec![Coord::real(-1.0, 1.0); 2],
        Arc::new(PlLorenz(*p)),
    )
    .with_locus(1, 0.0)
    .with_param("x1s", p.x1s)
    .with_param("y1s", p.y1s)
    .with_param("x2s", p.x2s)
    .with_param("y2s", p.y2s)
    .with_param("fx", p.fx)
    .with_param("fy", p.fy)
    .with_param("gx", p.gx)
    .with_param("gy", p.gy))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynsys::iterate_map;
    use crate::Error;

    fn example() -> GeomLorenzParams {
        GeomLorenzParams::symmetric(0.75, -0.8, 0.5, Correction::Const(0.9), Correction::Const(1.5))
    }

    #[test]
    fn one_sided_limits_are_first_hit_points() {
        let m = make_geometric_lorenz(&example()).unwrap();
        let up = m.eval(&[0.3, 1e-300]);
        assert_eq!(up, vec![0.75, -0.8]);
        let down = m.eval(&[0.3, -1e-300]);
        assert_eq!(down, vec![-0.75, 0.8]);
    }

    #[test]
    fn escape_regression_case() {
        let m = make_geometric_lorenz(&example()).unwrap();
        let img = m.eval(&[0.0, 0.25]);
        assert!((img[0] - 1.2).abs() < 1e-15);
        assert!((img[1] + 0.05).abs() < 1e-15);
        match iterate_map(&m, &[0.0, 0.25], 3) {
            Err(Error::DomainEscape { index, coord, .. }) => {
                assert_eq!(index, 1);
                assert_eq!(coord, 0);
            }
            other => panic!("expected escape, got {other:?}"),
        }
    }

    #[test]
    fn symmetric_map_commutes_with_involution() {
        let p = GeomLorenzParams::symmetric(
            0.6,
            -0.9,
            0.7,
            Correction::Affine { c0: 0.3, cx: 0.1 },
            Correction::Const(1.9),
        );
        let m = make_geometric_lorenz(&p).unwrap();
        for &(x, y) in &[(0.1, 0.4), (-0.7, 0.9), (0.5, -0.2)] {
            let a = m.eval(&[x, y]);
            let b = m.eval(&[-x, -y]);
            assert!((a[0] + b[0]).abs() < 1e-15 && (a[1] + b[1]).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_bad_alpha() {
        let mut p = example();
        p.alpha = 1.0;
        assert!(make_geometric_lorenz(&p).is_err());
    }

    #[test]
    fn analytic_jacobian_matches_fd() {
        let p = GeomLorenzParams::symmetric(
            0.6,
            -0.9,
            0.7,
            Correction::Affine { c0: 0.3, cx: 0.1 },
            Correction::Const(1.9),
        );
        let m = make_geometric_lorenz(&p).unwrap();
        for s in [[0.2, 0.3], [-0.4, -0.6]] {
            let a = m.rule().jacobian(&s).unwrap();
            let f = crate::dynsys::finite_difference_jacobian(&m, &s);
            assert!((a - f).abs().max() < 1e-7);
        }
    }
}
