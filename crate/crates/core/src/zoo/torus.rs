use std::sync::Arc;

use nalgebra::DMatrix;

use super::periodic::PeriodicFn;
use crate::dynsys::{Coord, Dynamics, ModelKind, SystemModel};
use crate::error::{Error, Result};
use crate::linalg::{int_det, int_to_f64};

/// Coordinate-wise perturbation `g_i(θ) = p_i(θ_i)` added to a linear torus map.
pub type TorusPerturbation = Vec<PeriodicFn>;

struct LinearTorus {
    a: DMatrix<f64>,
    g: Option<TorusPerturbation>,
}

impl Dynamics for LinearTorus {
    fn apply(&self, s: &[f64], out: &mut [f64]) {
        let n = s.len();
        for i in 0..n {
            let mut v: f64 = (0..n).map(|j| self.a[(i, j)] * s[j]).sum();
            if let Some(g) = &self.g {
                v += g[i].value(s[i]);
            }
            out[i] = v;
        }
    }

    fn jacobian(&self, s: &[f64]) -> Option<DMatrix<f64>> {
        let mut j = self.a.clone();
        if let Some(g) = &self.g {
            for i in 0..s.len() {
                j[(i, i)] += g[i].derivative(s[i]);
            }
        }
        Some(j)
    }

    fn circle_lift(&self, theta: f64) -> Option<f64> {
        if self.a.nrows() != 1 {
            return None;
        }
        let mut out = [0.0];
        self.apply(&[theta], &mut out);
        Some(out[0])
    }

    fn circle_lift_derivative(&self, theta: f64) -> Option<f64> {
        if self.a.nrows() != 1 {
            return None;
        }
        Some(self.jacobian(&[theta]).expect("analytic")[(0, 0)])
    }
}

fn square(a: &[Vec<i64>]) -> Result<usize> {
    let n = a.len();
    if n == 0 || a.iter().any(|r| r.len() != n) {
        return Err(Error::param("matrix", "must be a non-empty square integer matrix"));
    }
    Ok(n)
}

fn linear_torus(id: &str, a: &[Vec<i64>], g: Option<TorusPerturbation>) -> SystemModel {
    let n = a.len();
    let mut m = SystemModel::new(
        id,
        ModelKind::Map,
        vec![Coord::unit_angle(); n],
        Arc::new(LinearTorus { a: int_to_f64(a), g }),
    );
    for (i, row) in a.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            m = m.with_param(&format!("a{i}{j}"), *v as f64);
        }
    }
    m
}

/// `θ̄ = Aθ mod 1` for an integer matrix with `|det A| = 1`.
pub fn make_torus_automorphism(a: &[Vec<i64>]) -> Result<SystemModel> {
    square(a)?;
    let det = int_det(a)?;
    if det.abs() != 1 {
        return Err(Error::param(
            "matrix",
            format!("|det A| = {} != 1; use a torus endomorphism", det.abs()),
        ));
    }
    Ok(linear_torus("torus_automorphism", a, None))
}

/// `θ̄ = Aθ + g(θ) mod 1` with `|det A| ≥ 1`: a covering of the torus.
pub fn make_torus_endomorphism(a: &[Vec<i64>], g: Option<TorusPerturbation>) -> Result<SystemModel> {
    let n = square(a)?;
    let det = int_det(a)?;
    if det == 0 {
        return Err(Error::param("matrix", "singular matrix is not a covering"));
    }
    if let Some(g) = &g {
        if g.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: g.len(),
            });
        }
    }
    Ok(linear_torus("torus_endomorphism", a, g))
}

/// The expanding circle map `θ̄ = mθ mod 1`.
pub fn make_expanding_circle(m: i64) -> Result<SystemModel> {
    if m.abs() < 2 {
        return Err(Error::param("m", "|m| must be at least 2"));
    }
    let mut model = make_torus_endomorphism(&[vec![m]], None)?;
    model.id = if m == 2 { "doubling".into() } else { "expanding_circle".into() };
    Ok(model)
}

pub fn make_doubling_map() -> SystemModel {
    make_expanding_circle(2).expect("m = 2 is valid")
}

struct CircleFamily {
    m: i64,
    g: PeriodicFn,
    omega: f64,
}

impl Dynamics for CircleFamily {
    fn apply(&self, s: &[f64], out: &mut [f64]) {
        out[0] = self.m as f64 * s[0] + self.g.value(s[0]) + self.omega;
    }

    fn jacobian(&self, s: &[f64]) -> Option<DMatrix<f64>> {
        Some(DMatrix::from_element(1, 1, self.m as f64 + self.g.derivative(s[0])))
    }

    fn circle_lift(&self, theta: f64) -> Option<f64> {
        Some(self.m as f64 * theta + self.g.value(theta) + self.omega)
    }

    fn circle_lift_derivative(&self, theta: f64) -> Option<f64> {
        Some(self.m as f64 + self.g.derivative(theta))
    }
}

/// `θ̄ = mθ + g(θ) + ω mod 1`.
pub fn make_circle_family(m: i64, g: PeriodicFn, omega: f64) -> Result<SystemModel> {
    if !omega.is_finite() {
        return Err(Error::param("omega", "must be finite"));
    }
    let mut model = SystemModel::new(
        "circle_family",
        ModelKind::Map,
        vec![Coord::unit_angle()],
        Arc::new(CircleFamily { m, g: g.clone(), omega }),
    )
    .with_param("m", m as f64)
    .with_param("omega", omega);
    if let PeriodicFn::Sine { amp } = g {
        model = model.with_param("g_amp", amp);
    }
    Ok(model)
}
