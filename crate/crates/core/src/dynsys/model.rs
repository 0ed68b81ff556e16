use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Deref, DerefMut};
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point of phase space. Angular components live in `[0, period)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct State(pub Vec<f64>);

impl State {
    pub fn new(coords: impl Into<Vec<f64>>) -> Self {
        State(coords.into())
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

impl Deref for State {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for State {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for State {
    fn from(v: Vec<f64>) -> Self {
        State(v)
    }
}

impl From<&[f64]> for State {
    fn from(v: &[f64]) -> Self {
        State(v.to_vec())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Flow,
    Map,
}

/// Domain factor of one coordinate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Coord {
    /// Real coordinate restricted to `[lo, hi]` (bounds may be infinite).
    Real { lo: f64, hi: f64 },
    /// Periodic coordinate stored in `[0, period)`.
    Angle { period: f64 },
}

impl Coord {
    pub const FREE: Coord = Coord::Real {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
    };

    pub fn real(lo: f64, hi: f64) -> Self {
        Coord::Real { lo, hi }
    }

    pub fn unit_angle() -> Self {
        Coord::Angle { period: 1.0 }
    }

    pub fn period(&self) -> Option<f64> {
        match *self {
            Coord::Angle { period } => Some(period),
            Coord::Real { .. } => None,
        }
    }

    pub fn contains(&self, v: f64) -> bool {
        match *self {
            Coord::Real { lo, hi } => v >= lo && v <= hi,
            Coord::Angle { .. } => v.is_finite(),
        }
    }
}

/// Reduce `v` into `[0, period)`.
pub fn wrap(v: f64, period: f64) -> f64 {
    let r = v.rem_euclid(period);
    if r >= period {
        0.0
    } else {
        r
    }
}

/// Signed difference `a - b` taken on the circle of the given period,
/// in `[-period/2, period/2)`.
pub fn wrapped_diff(a: f64, b: f64, period: f64) -> f64 {
    let d = (a - b).rem_euclid(period);
    if d >= 0.5 * period {
        d - period
    } else {
        d
    }
}

/// Codimension-one discontinuity set `{ s[coord] = value }`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Locus {
    pub coord: usize,
    pub value: f64,
}

impl Locus {
    pub fn distance(&self, s: &[f64]) -> f64 {
        (s[self.coord] - self.value).abs()
    }
}

/// Evaluation rule of a model: the right-hand side of a flow or the image of
/// a map. Implementations must be pure.
pub trait Dynamics: Send + Sync {
    fn apply(&self, s: &[f64], out: &mut [f64]);

    /// Analytic Jacobian, when the formulas permit one.
    fn jacobian(&self, _s: &[f64]) -> Option<DMatrix<f64>> {
        None
    }

    /// Lift `R -> R` of a one-dimensional circle map (before reduction mod 1).
    fn circle_lift(&self, _theta: f64) -> Option<f64> {
        None
    }

    /// Derivative of the lift.
    fn circle_lift_derivative(&self, _theta: f64) -> Option<f64> {
        None
    }
}

type RuleFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;
type JacFn = dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync;

struct ClosureDynamics {
    rule: Arc<RuleFn>,
    jac: Option<Arc<JacFn>>,
}

impl Dynamics for ClosureDynamics {
    fn apply(&self, s: &[f64], out: &mut [f64]) {
        (self.rule)(s, out)
    }

    fn jacobian(&self, s: &[f64]) -> Option<DMatrix<f64>> {
        self.jac.as_ref().map(|j| j(s))
    }
}

/// A flow or a discrete map together with its domain and metadata.
#[derive(Clone)]
pub struct SystemModel {
    pub id: String,
    pub kind: ModelKind,
    pub params: BTreeMap<String, f64>,
    pub coords: Vec<Coord>,
    pub locus: Option<Locus>,
    /// Coordinate-wise signs of an involution commuting with the dynamics.
    pub symmetry: Option<Vec<f64>>,
    rule: Arc<dyn Dynamics>,
}

impl fmt::Debug for SystemModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SystemModel")
            .field("id", &self.id)
            .field("kind", &self.kind)
            .field("params", &self.params)
            .field("coords", &self.coords)
            .field("locus", &self.locus)
            .finish_non_exhaustive()
    }
}

impl SystemModel {
    pub fn new(
        id: impl Into<String>,
        kind: ModelKind,
        coords: Vec<Coord>,
        rule: Arc<dyn Dynamics>,
    ) -> Self {
        SystemModel {
            id: id.into(),
            kind,
            params: BTreeMap::new(),
            coords,
            locus: None,
            symmetry: None,
            rule,
        }
    }

    /// Flow defined by a closure; coordinates are unbounded reals.
    pub fn custom_flow<F>(id: impl Into<String>, dim: usize, rhs: F) -> Self
    where
        F: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    {
        let rule = ClosureDynamics {
            rule: Arc::new(rhs),
            jac: None,
        };
        Self::new(id, ModelKind::Flow, vec![Coord::FREE; dim], Arc::new(rule))
    }

    /// Map defined by a closure; coordinates are unbounded reals.
    pub fn custom_map<F>(id: impl Into<String>, dim: usize, step: F) -> Self
    where
        F: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    {
        let rule = ClosureDynamics {
            rule: Arc::new(step),
            jac: None,
        };
        Self::new(id, ModelKind::Map, vec![Coord::FREE; dim], Arc::new(rule))
    }

    /// Attach an analytic Jacobian to a closure-defined model.
    ///
    /// Models built from a [`Dynamics`] implementation keep their own Jacobian;
    /// for those this wraps the rule so that `jac` takes precedence.
    pub fn with_jacobian<J>(mut self, jac: J) -> Self
    where
        J: Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static,
    {
        let inner = self.rule.clone();
        self.rule = Arc::new(ClosureDynamics {
            rule: Arc::new(move |s: &[f64], out: &mut [f64]| inner.apply(s, out)),
            jac: Some(Arc::new(jac)),
        });
        self
    }

    pub fn with_coords(mut self, coords: Vec<Coord>) -> Self {
        assert_eq!(coords.len(), self.coords.len(), "coordinate count");
        self.coords = coords;
        self
    }

    pub fn with_locus(mut self, coord: usize, value: f64) -> Self {
        self.locus = Some(Locus { coord, value });
        self
    }

    pub fn with_param(mut self, name: &str, value: f64) -> Self {
        self.params.insert(name.to_string(), value);
        self
    }

    pub fn with_symmetry(mut self, signs: Vec<f64>) -> Self {
        self.symmetry = Some(signs);
        self
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn is_flow(&self) -> bool {
        self.kind == ModelKind::Flow
    }

    pub fn is_map(&self) -> bool {
        self.kind == ModelKind::Map
    }

    pub fn rule(&self) -> &Arc<dyn Dynamics> {
        &self.rule
    }

    pub fn has_analytic_jacobian(&self) -> bool {
        let probe = vec![0.5; self.dim()];
        self.rule.jacobian(&probe).is_some()
    }

    pub fn periods(&self) -> Vec<Option<f64>> {
        self.coords.iter().map(Coord::period).collect()
    }

    /// Raw evaluation without any domain or locus checks.
    pub fn apply(&self, s: &[f64], out: &mut [f64]) {
        self.rule.apply(s, out)
    }

    /// Right-hand side of a flow or unreduced image of a map.
    pub fn eval(&self, s: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.rule.apply(s, &mut out);
        out
    }

    /// Image of a map with angular reduction; rejects states on the locus.
    pub fn image(&self, s: &[f64], band: f64) -> Result<State> {
        self.check_dim(s)?;
        if self.kind != ModelKind::Map {
            return Err(Error::WrongKind { expected: "map" });
        }
        if let Some(locus) = self.locus {
            if locus.distance(s) < band {
                return Err(Error::LocusHit {
                    index: 0,
                    band,
                    state: s.to_vec(),
                    partial: None,
                });
            }
        }
        let mut out = self.eval(s);
        self.reduce(&mut out);
        Ok(State(out))
    }

    /// Reduce every angular coordinate into its fundamental interval.
    pub fn reduce(&self, s: &mut [f64]) {
        for (v, c) in s.iter_mut().zip(&self.coords) {
            if let Coord::Angle { period } = *c {
                *v = wrap(*v, period);
            }
        }
    }

    /// Index and value of the first coordinate outside the domain.
    pub fn domain_violation(&self, s: &[f64]) -> Option<(usize, f64)> {
        s.iter()
            .zip(&self.coords)
            .position(|(v, c)| !c.contains(*v))
            .map(|i| (i, s[i]))
    }

    pub fn locus_distance(&self, s: &[f64]) -> Option<f64> {
        self.locus.map(|l| l.distance(s))
    }

    /// Componentwise difference `a - b`, wrapped on angular coordinates.
    pub fn difference(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        a.iter()
            .zip(b)
            .zip(&self.coords)
            .map(|((x, y), c)| match c.period() {
                Some(p) => wrapped_diff(*x, *y, p),
                None => x - y,
            })
            .collect()
    }

    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        self.difference(a, b)
            .iter()
            .map(|d| d * d)
            .sum::<f64>()
            .sqrt()
    }

    pub(crate) fn check_dim(&self, s: &[f64]) -> Result<()> {
        if s.len() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                got: s.len(),
            });
        }
        Ok(())
    }

    pub fn param(&self, name: &str) -> Option<f64> {
        self.params.get(name).copied()
    }
}
