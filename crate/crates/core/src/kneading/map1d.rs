use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::dd::Scalar;
use crate::error::{Error, Result};

/// Which side of the discontinuity at 0.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    /// `0⁺`, the right branch.
    Plus,
    /// `0⁻`, the left branch.
    Minus,
}

type BranchFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Branches {
    /// `G(y) = slope·y + intercept` on each side.
    Linear { left: [f64; 2], right: [f64; 2] },
    /// Piecewise-linear interpolation through sorted knots; the knot at 0
    /// carries the one-sided limit. Linear extrapolation beyond the ends.
    Table {
        left: Vec<[f64; 2]>,
        right: Vec<[f64; 2]>,
    },
    /// `h ∘ G ∘ h⁻¹` with `h(y) = (1 − c) y + c y³`.
    Conjugate { inner: Box<IntervalMap1D>, c: f64 },
    /// Closures on `[−1, 0]` and `[0, 1]`; evaluated in f64 only.
    Custom { left: BranchFn, right: BranchFn },
}

/// Reduction diagnostics attached to maps produced by `reduce_to_1d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitInfo {
    /// Maximal `|ȳ − G(y)|` over the fitted samples, relative to the span of
    /// the sampled `y`.
    pub residual: f64,
    pub threshold: f64,
    pub samples: usize,
    /// Least-squares slopes of the left and right branches.
    pub slopes: [f64; 2],
    pub span: [f64; 2],
}

/// A map of `[−1, 1]` with one discontinuity at 0.
#[derive(Clone)]
pub struct IntervalMap1D {
    branches: Branches,
    pub label: String,
    /// `G(0⁻)`.
    pub left_limit: f64,
    /// `G(0⁺)`.
    pub right_limit: f64,
    /// Sampled derivative of each branch is single-signed: `[left, right]`.
    pub monotone: [bool; 2],
    pub increasing: [bool; 2],
    /// `inf |G′|` over the sampled difference quotients.
    pub inf_derivative: f64,
    /// Some sampled image leaves `[−1, 1]`.
    pub escapes: bool,
    pub fit: Option<FitInfo>,
}

impl fmt::Debug for IntervalMap1D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("IntervalMap1D")
            .field("label", &self.label)
            .field("left_limit", &self.left_limit)
            .field("right_limit", &self.right_limit)
            .field("monotone", &self.monotone)
            .field("increasing", &self.increasing)
            .field("inf_derivative", &self.inf_derivative)
            .field("escapes", &self.escapes)
            .field("fit", &self.fit)
            .finish()
    }
}

const PROFILE_SAMPLES: usize = 1024;

fn h<S: Scalar>(c: f64, y: S) -> S {
    S::from_f64(1.0 - c) * y + S::from_f64(c) * y * y * y
}

fn h_inv<S: Scalar>(c: f64, t: S) -> S {
    let tf = t.to_f64();
    let mut y = tf;
    for _ in 0..100 {
        let step = ((1.0 - c) * y + c * y * y * y - tf) / ((1.0 - c) + 3.0 * c * y * y);
        y -= step;
        if step.abs() <= 1e-17 * y.abs().max(1e-300) {
            break;
        }
    }
    let mut y = S::from_f64(y);
    for _ in 0..3 {
        let d = S::from_f64(1.0 - c) + S::from_f64(3.0 * c) * y * y;
        y = y - (h(c, y) - t) / d;
    }
    y
}

fn interpolate<S: Scalar>(knots: &[[f64; 2]], y: S) -> S {
    let yf = y.to_f64();
    let n = knots.len();
    if n == 1 {
        return S::from_f64(knots[0][1]);
    }
    let k = knots.partition_point(|p| p[0] <= yf).clamp(1, n - 1);
    let [y0, g0] = knots[k - 1];
    let [y1, g1] = knots[k];
    let slope = (g1 - g0) / (y1 - y0);
    S::from_f64(g0) + S::from_f64(slope) * (y - S::from_f64(y0))
}

impl IntervalMap1D {
    fn build(branches: Branches, label: String) -> Result<Self> {
        let mut m = IntervalMap1D {
            branches,
            label,
            left_limit: 0.0,
            right_limit: 0.0,
            monotone: [true; 2],
            increasing: [true; 2],
            inf_derivative: 0.0,
            escapes: false,
            fit: None,
        };
        m.left_limit = m.branch::<f64>(Side::Minus, 0.0);
        m.right_limit = m.branch::<f64>(Side::Plus, 0.0);
        if !m.left_limit.is_finite() || !m.right_limit.is_finite() {
            return Err(Error::param("branches", "one-sided limits at 0 must be finite"));
        }
        m.profile();
        Ok(m)
    }

    /// `G(y) = sl·y + bl` for `y < 0` and `sr·y + br` for `y > 0`.
    pub fn piecewise_linear(left: [f64; 2], right: [f64; 2]) -> Result<Self> {
        if left.iter().chain(&right).any(|v| !v.is_finite()) {
            return Err(Error::param("branches", "coefficients must be finite"));
        }
        IntervalMap1D::build(
            Branches::Linear { left, right },
            format!("pl[{}y{:+}; {}y{:+}]", left[0], left[1], right[0], right[1]),
        )
    }

    /// Both branches with slope `s`, pinned so that `G(−1) = −1` and
    /// `G(1) = 1`: `G(0⁻) = s − 1`, `G(0⁺) = 1 − s`.
    pub fn symmetric_slope(s: f64) -> Result<Self> {
        IntervalMap1D::piecewise_linear([s, s - 1.0], [s, 1.0 - s])
    }

    /// Interpolating map through knots `(y, G(y))` per branch. Each branch
    /// should include a knot at `y = 0` carrying the one-sided limit.
    pub fn from_knots(mut left: Vec<[f64; 2]>, mut right: Vec<[f64; 2]>, label: &str) -> Result<Self> {
        for (name, k) in [("left", &mut left), ("right", &mut right)] {
            if k.is_empty() {
                return Err(Error::param(name, "needs at least one knot"));
            }
            if k.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::param(name, "knots must be finite"));
            }
            k.sort_by(|a, b| a[0].total_cmp(&b[0]));
            k.dedup_by(|a, b| a[0] == b[0]);
        }
        IntervalMap1D::build(Branches::Table { left, right }, label.to_string())
    }

    /// Branch closures defined on `[−1, 0]` and `[0, 1]` (values at 0 are the
    /// one-sided limits). Evaluated in f64 regardless of the requested
    /// arithmetic.
    pub fn from_branches<L, R>(left: L, right: R, label: &str) -> Result<Self>
    where
        L: Fn(f64) -> f64 + Send + Sync + 'static,
        R: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        IntervalMap1D::build(
            Branches::Custom {
                left: Arc::new(left),
                right: Arc::new(right),
            },
            label.to_string(),
        )
    }

    /// `h ∘ G ∘ h⁻¹` for the increasing homeomorphism
    /// `h(y) = (1 − c) y + c y³` of `[−1, 1]`, `0 ≤ c < 1`.
    pub fn conjugate_cubic(&self, c: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&c) {
            return Err(Error::param("c", "must lie in [0, 1)"));
        }
        IntervalMap1D::build(
            Branches::Conjugate {
                inner: Box::new(self.clone()),
                c,
            },
            format!("h_{c} o {} o h_{c}^-1", self.label),
        )
    }

    /// Formula of one branch, valid at 0 as the one-sided limit.
    pub fn branch<S: Scalar>(&self, side: Side, y: S) -> S {
        match &self.branches {
            Branches::Linear { left, right } => {
                let [a, b] = if side == Side::Minus { left } else { right };
                S::from_f64(*a) * y + S::from_f64(*b)
            }
            Branches::Table { left, right } => {
                interpolate(if side == Side::Minus { left } else { right }, y)
            }
            Branches::Conjugate { inner, c } => h(*c, inner.branch(side, h_inv(*c, y))),
            Branches::Custom { left, right } => {
                let f = if side == Side::Minus { left } else { right };
                S::from_f64(f(y.to_f64()))
            }
        }
    }

    /// `G(y)` for `y ≠ 0`; `None` at the discontinuity.
    pub fn eval<S: Scalar>(&self, y: S) -> Option<S> {
        match y.signum_cmp() {
            std::cmp::Ordering::Less => Some(self.branch(Side::Minus, y)),
            std::cmp::Ordering::Greater => Some(self.branch(Side::Plus, y)),
            std::cmp::Ordering::Equal => None,
        }
    }

    pub fn limit(&self, side: Side) -> f64 {
        match side {
            Side::Plus => self.right_limit,
            Side::Minus => self.left_limit,
        }
    }

    /// Has a genuine jump at 0.
    pub fn is_discontinuous(&self) -> bool {
        (self.left_limit - self.right_limit).abs() > 1e-12
    }

    fn profile(&mut self) {
        let n = PROFILE_SAMPLES;
        let mut inf = f64::INFINITY;
        let mut escapes = false;
        for (k, side) in [Side::Minus, Side::Plus].into_iter().enumerate() {
            let sign = if side == Side::Minus { -1.0 } else { 1.0 };
            let ys: Vec<f64> = (0..=n).map(|i| sign * i as f64 / n as f64).collect();
            let gs: Vec<f64> = ys.iter().map(|&y| self.branch::<f64>(side, y)).collect();
            escapes |= gs.iter().any(|g| !(g.abs() <= 1.0 + 1e-12));
            let (mut pos, mut neg) = (false, false);
            for i in 0..n {
                let q = (gs[i + 1] - gs[i]) / (ys[i + 1] - ys[i]);
                pos |= q > 0.0;
                neg |= q < 0.0;
                inf = inf.min(q.abs());
            }
            self.monotone[k] = !(pos && neg);
            self.increasing[k] = !neg;
        }
        self.inf_derivative = inf;
        self.escapes = escapes;
    }
}

/// Orbit points of `y0` under `G` in the chosen arithmetic, stopping at the
/// first exact zero, escape or non-finite value (which is included).
pub fn orbit<S: Scalar>(g: &IntervalMap1D, y0: S, n: usize) -> Vec<S> {
    let mut out = Vec::with_capacity(n);
    let mut y = y0;
    for i in 0..n {
        out.push(y);
        if i + 1 == n {
            break;
        }
        if !y.is_finite() || y > S::from_f64(1.0) || y < S::from_f64(-1.0) {
            break;
        }
        match g.eval(y) {
            Some(next) => y = next,
            None => break,
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::super::dd::Dd;
    use super::*;

    #[test]
    fn doubling_type_limits() {
        let g = IntervalMap1D::symmetric_slope(2.0).unwrap();
        assert_eq!(g.right_limit, -1.0);
        assert_eq!(g.left_limit, 1.0);
        assert_eq!(g.monotone, [true, true]);
        assert_eq!(g.increasing, [true, true]);
        assert!((g.inf_derivative - 2.0).abs() < 1e-9);
        assert!(!g.escapes);
        assert!(g.is_discontinuous());
    }

    #[test]
    fn cubic_conjugacy_round_trips() {
        for &c in &[0.0, 0.3, 0.9] {
            for &t in &[-1.0, -0.37, 1e-9, 0.5, 1.0] {
                let y = h_inv(c, Dd::from_f64(t));
                assert!((h(c, y) - Dd::from_f64(t)).to_f64().abs() < 1e-30);
            }
        }
    }

    #[test]
    fn conjugate_preserves_limits_through_h() {
        let g = IntervalMap1D::symmetric_slope(1.7).unwrap();
        let c = 0.4;
        let k = g.conjugate_cubic(c).unwrap();
        assert!((k.right_limit - h(c, g.right_limit)).abs() < 1e-15);
        assert!((k.left_limit - h(c, g.left_limit)).abs() < 1e-15);
        assert_eq!(k.increasing, [true, true]);
    }

    #[test]
    fn table_interpolates_and_extrapolates() {
        let g = IntervalMap1D::from_knots(
            vec![[-1.0, -1.0], [0.0, 1.0]],
            vec![[0.0, -1.0], [0.5, 0.0]],
            "t",
        )
        .unwrap();
        assert_eq!(g.eval(-0.5f64), Some(0.0));
        assert_eq!(g.eval(1.0f64), Some(1.0));
        assert_eq!(g.right_limit, -1.0);
    }
}
