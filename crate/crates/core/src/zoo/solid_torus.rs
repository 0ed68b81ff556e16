use std::f64::consts::{PI, TAU};
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::periodic::{PeriodicFn, PeriodicSpec};
use crate::dynsys::{Coord, Dynamics, ModelKind, SystemModel};
use crate::error::{Error, Result};

/// User-supplied fiber map `x̄ = f(x, θ)` on the disk.
pub type FiberFn = Arc<dyn Fn([f64; 2], f64) -> [f64; 2] + Send + Sync>;

/// Map of the solid torus `D² × S¹`:
///
/// ```text
/// x̄ = μ_c x + a (cos 2πθ, sin 2πθ)
/// θ̄ = m θ + g(θ) + ω + μ h_amp x_0    mod 1
/// ```
///
/// `custom_f` replaces the built-in fiber map when present.
#[derive(Clone)]
pub struct SolidTorusParams {
    pub m: i64,
    pub omega: f64,
    pub g: PeriodicFn,
    /// Contraction factor of the built-in fiber map.
    pub mu_c: f64,
    /// Distance of the image disk centers from the core circle.
    pub offset: f64,
    pub mu: f64,
    pub h_amp: f64,
    pub fiber_radius: f64,
    pub custom_f: Option<FiberFn>,
}

impl fmt::Debug for SolidTorusParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SolidTorusParams")
            .field("m", &self.m)
            .field("omega", &self.omega)
            .field("g", &self.g)
            .field("mu_c", &self.mu_c)
            .field("offset", &self.offset)
            .field("mu", &self.mu)
            .field("h_amp", &self.h_amp)
            .field("fiber_radius", &self.fiber_radius)
            .field("custom_f", &self.custom_f.is_some())
            .finish()
    }
}

impl Default for SolidTorusParams {
    fn default() -> Self {
        SolidTorusParams {
            m: 2,
            omega: 0.0,
            g: PeriodicFn::Zero,
            mu_c: 0.2,
            offset: 0.25,
            mu: 0.0,
            h_amp: 0.0,
            fiber_radius: 1.0,
            custom_f: None,
        }
    }
}

impl SolidTorusParams {
    pub fn solenoid(mu_c: f64) -> Self {
        SolidTorusParams {
            mu_c,
            ..Default::default()
        }
    }

    /// Radius of the image of the fiber disk under the built-in family.
    pub fn image_radius(&self) -> f64 {
        self.mu_c * self.fiber_radius
    }

    /// Distance between the image-disk centers of two consecutive preimages
    /// of the same angle, `2a sin(π/|m|)`. `None` for `|m| < 2`.
    pub fn center_separation(&self) -> Option<f64> {
        if self.m.abs() < 2 {
            return None;
        }
        Some(2.0 * self.offset * (PI / self.m.abs() as f64).sin())
    }

    /// Closed-form disjointness bound of the built-in family.
    pub fn images_disjoint(&self) -> Option<bool> {
        if self.custom_f.is_some() {
            return None;
        }
        self.center_separation().map(|d| d > 2.0 * self.image_radius())
    }

    /// Invariant graph `x*(θ)` of the built-in family for `m = 1`, `g = 0`,
    /// `h = 0`, as a complex amplitude: `x*(θ) = a e(θ−ω) / (1 − μ_c e(−ω))`.
    pub fn rotation_invariant_graph(&self, theta: f64) -> Option<[f64; 2]> {
        if self.m != 1 || !matches!(self.g, PeriodicFn::Zero) || self.h_amp * self.mu != 0.0 {
            return None;
        }
        let (num_r, num_i) = ((TAU * (theta - self.omega)).cos(), (TAU * (theta - self.omega)).sin());
        let (den_r, den_i) = (
            1.0 - self.mu_c * (TAU * self.omega).cos(),
            self.mu_c * (TAU * self.omega).sin(),
        );
        let d2 = den_r * den_r + den_i * den_i;
        let re = (num_r * den_r + num_i * den_i) / d2;
        let im = (num_i * den_r - num_r * den_i) / d2;
        Some([self.offset * re, self.offset * im])
    }

    pub(crate) fn fiber(&self, x: [f64; 2], theta: f64) -> [f64; 2] {
        match &self.custom_f {
            Some(f) => f(x, theta),
            None => [
                self.mu_c * x[0] + self.offset * (TAU * theta).cos(),
                self.mu_c * x[1] + self.offset * (TAU * theta).sin(),
            ],
        }
    }

    pub(crate) fn angle_lift(&self, x: [f64; 2], theta: f64) -> f64 {
        self.m as f64 * theta + self.g.value(theta) + self.omega + self.mu * self.h_amp * x[0]
    }

    /// Sampled `sup ‖∂f/∂x‖` over the disk.
    pub fn sampled_fiber_contraction(&self, n: usize) -> f64 {
        if self.custom_f.is_none() {
            return self.mu_c.abs();
        }
        let h = 1e-6;
        let r = self.fiber_radius;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let x = [r * (2.0 * i as f64 / n as f64 - 1.0), r * (2.0 * j as f64 / n as f64 - 1.0)];
                    if x[0] * x[0] + x[1] * x[1] > r * r {
                        continue;
                    }
                    let t = k as f64 / n as f64;
                    let mut jm = DMatrix::zeros(2, 2);
                    for c in 0..2 {
                        let mut xp = x;
                        let mut xm = x;
                        xp[c] += h;
                        xm[c] -= h;
                        let (fp, fm) = (self.fiber(xp, t), self.fiber(xm, t));
                        jm[(0, c)] = (fp[0] - fm[0]) / (2.0 * h);
                        jm[(1, c)] = (fp[1] - fm[1]) / (2.0 * h);
                    }
                    worst = worst.max(crate::linalg::op_norm(&jm));
                }
            }
        }
        worst
    }

    /// Sampled C¹ size of the angular perturbation `h = μ h_amp x_0` over the
    /// solid torus: `max(|h|, |∂h|)`.
    pub fn h_c1_norm(&self) -> f64 {
        (self.mu * self.h_amp).abs() * self.fiber_radius.max(1.0)
    }
}

struct SolidTorus(SolidTorusParams);

impl Dynamics for SolidTorus {
    fn apply(&self, s: &[f64], out: &mut [f64]) {
        let x = [s[0], s[1]];
        let f = self.0.fiber(x, s[2]);
        out[0] = f[0];
        out[1] = f[1];
        out[2] = self.0.angle_lift(x, s[2]);
    }

    fn jacobian(&self, s: &[f64]) -> Option<DMatrix<f64>> {
        let p = &self.0;
        if p.custom_f.is_some() {
            return None;
        }
        let t = s[2];
        let a = p.offset;
        Some(DMatrix::from_row_slice(
            3,
            3,
            &[
                p.mu_c,
                0.0,
                -TAU * a * (TAU * t).sin(),
                0.0,
                p.mu_c,
                TAU * a * (TAU * t).cos(),
                p.mu * p.h_amp,
                0.0,
                p.m as f64 + p.g.derivative(t),
            ],
        ))
    }
}

pub fn make_solid_torus_map(p: &SolidTorusParams) -> Result<SystemModel> {
    if !(p.fiber_radius > 0.0) {
        return Err(Error::param("fiber_radius", "must be positive"));
    }
    if !(p.mu >= 0.0) {
        return Err(Error::param("mu", "must be non-negative"));
    }
    if !(0.0..1.0).contains(&p.omega) {
        return Err(Error::param("omega", "must lie in [0, 1)"));
    }
    let lip = p.sampled_fiber_contraction(12);
    if !(lip < 1.0) {
        return Err(Error::param(
            "mu_c",
            format!("fiber map is not a contraction (sampled ‖∂f/∂x‖ = {lip})"),
        ));
    }
    let r = p.fiber_radius;
    let coords = vec![Coord::real(-r, r), Coord::real(-r, r), Coord::unit_angle()];
    Ok(SystemModel::new("solid_torus", ModelKind::Map, coords, Arc::new(SolidTorus(p.clone())))
        .with_param("m", p.m as f64)
        .with_param("omega", p.omega)
        .with_param("mu_c", p.mu_c)
        .with_param("offset", p.offset)
        .with_param("mu", p.mu)
        .with_param("h_amp", p.h_amp)
        .with_param("fiber_radius", r))
}

/// Configuration form of [`SolidTorusParams`] (built-in fiber map only).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolidTorusConfig {
    pub m: i64,
    pub omega: f64,
    pub g: PeriodicSpec,
    pub mu_c: f64,
    pub offset: f64,
    pub mu: f64,
    pub h_amp: f64,
    pub fiber_radius: f64,
}

impl Default for SolidTorusConfig {
    fn default() -> Self {
        let d = SolidTorusParams::default();
        SolidTorusConfig {
            m: d.m,
            omega: d.omega,
            g: PeriodicSpec::Zero,
            mu_c: d.mu_c,
            offset: d.offset,
            mu: d.mu,
            h_amp: d.h_amp,
            fiber_radius: d.fiber_radius,
        }
    }
}

impl From<SolidTorusConfig> for SolidTorusParams {
    fn from(c: SolidTorusConfig) -> Self {
        SolidTorusParams {
            m: c.m,
            omega: c.omega,
            g: c.g.into(),
            mu_c: c.mu_c,
            offset: c.offset,
            mu: c.mu,
            h_amp: c.h_amp,
            fiber_radius: c.fiber_radius,
            custom_f: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynsys::iterate_map;

    #[test]
    fn degenerate_family_is_doubling_in_theta() {
        let p = SolidTorusParams {
            mu_c: 0.0,
            offset: 0.0,
            ..Default::default()
        };
        let m = make_solid_torus_map(&p).unwrap();
        let o = iterate_map(&m, &[0.3, -0.2, 0.3], 3).unwrap();
        assert_eq!(o.state(1)[..2], [0.0, 0.0]);
        assert!((o.state(1)[2] - 0.6).abs() < 1e-15);
        assert!((o.state(2)[2] - 0.2).abs() < 1e-14);
    }

    #[test]
    fn disjointness_bound() {
        assert_eq!(SolidTorusParams::solenoid(0.2).images_disjoint(), Some(true));
        assert!((SolidTorusParams::solenoid(0.2).center_separation().unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(SolidTorusParams::solenoid(0.35).images_disjoint(), Some(false));
        assert!(make_solid_torus_map(&SolidTorusParams::solenoid(0.35)).is_ok());
        assert!(make_solid_torus_map(&SolidTorusParams::solenoid(1.0)).is_err());
    }

    #[test]
    fn custom_fiber_contraction_checked() {
        let mut p = SolidTorusParams {
            custom_f: Some(Arc::new(|x, _| [1.5 * x[0], 0.1 * x[1]])),
            ..Default::default()
        };
        assert!(make_solid_torus_map(&p).is_err());
        p.custom_f = Some(Arc::new(|x, t| [0.3 * x[0] + 0.2 * (TAU * t).cos(), 0.3 * x[1]]));
        assert!(make_solid_torus_map(&p).is_ok());
    }

    #[test]
    fn rotation_graph_is_invariant() {
        let p = SolidTorusParams {
            m: 1,
            omega: 0.37,
            mu_c: 0.3,
            ..Default::default()
        };
        let m = make_solid_torus_map(&p).unwrap();
        for i in 0..10 {
            let t = i as f64 / 10.0;
            let x = p.rotation_invariant_graph(t).unwrap();
            let img = m.image(&[x[0], x[1], t], 0.0).unwrap();
            let x2 = p.rotation_invariant_graph(img[2]).unwrap();
            assert!((img[0] - x2[0]).abs() < 1e-14 && (img[1] - x2[1]).abs() < 1e-14);
        }
    }
}
