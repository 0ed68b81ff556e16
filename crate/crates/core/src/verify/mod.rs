//! Sampled verification of hyperbolicity and pseudo-hyperbolicity inequalities.
//!
//! Suprema are approximated on nested grids with an excluded band around the
//! discontinuity locus plus a geometric refinement toward it. Results are
//! evidence, not proofs.

mod lorenz;
mod matrix;
mod pseudo;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use lorenz::{check_lorenz_conditions, compute_q, q_formula, LorenzNorms, QVariant};
pub use matrix::{check_anosov_matrix, check_expansion};
pub use pseudo::{
    block_derivatives, check_pseudohyperbolic, check_saddle_focus_gap, BlockDerivatives,
    SaddleFocusExponents,
};

/// Sampling metadata recorded in every report.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleGrid {
    /// Intervals along the main axis (the one crossing the locus).
    pub n: usize,
    /// Intervals along each remaining axis.
    pub n_aux: usize,
    /// Half-width of the excluded band around the locus.
    pub delta: f64,
    /// Strict inequalities are tested as `< 1 − margin`.
    pub margin: f64,
    /// Number of geometric levels between `delta` and the edge of the domain.
    pub locus_levels: usize,
}

impl Default for SampleGrid {
    fn default() -> Self {
        SampleGrid {
            n: 256,
            n_aux: 32,
            delta: 1e-4,
            margin: 1e-6,
            locus_levels: 40,
        }
    }
}

impl SampleGrid {
    pub fn with_n(n: usize) -> Self {
        SampleGrid {
            n,
            ..Default::default()
        }
    }

    /// Same grid with every resolution doubled. Every node of `self` is a
    /// node of the refinement.
    pub fn refined(&self) -> Self {
        SampleGrid {
            n: 2 * self.n,
            n_aux: 2 * self.n_aux,
            ..*self
        }
    }

    /// Nodes on `[lo, hi]` along the main axis with `|v − locus| ≥ delta`,
    /// including a geometric sequence accumulating at the band edge.
    pub(crate) fn locus_axis(&self, lo: f64, hi: f64, locus: f64) -> Vec<f64> {
        let mut v: Vec<f64> = equispaced(lo, hi, self.n)
            .into_iter()
            .filter(|y| (y - locus).abs() >= self.delta)
            .collect();
        let levels = self.locus_levels.max(1);
        for side in [-1.0, 1.0] {
            let reach = if side > 0.0 { hi - locus } else { locus - lo };
            if reach <= self.delta {
                continue;
            }
            let ratio = (reach / self.delta).powf(1.0 / levels as f64);
            for j in 0..=levels {
                let d = (self.delta * ratio.powi(j as i32)).min(reach);
                v.push(locus + side * d);
            }
        }
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    }

    pub(crate) fn meta(&self, samples: usize, description: impl Into<String>) -> GridMeta {
        GridMeta {
            n: self.n,
            n_aux: self.n_aux,
            delta: self.delta,
            margin: self.margin,
            samples,
            description: description.into(),
        }
    }
}

/// `n + 1` equispaced nodes including both ends.
pub(crate) fn equispaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let n = n.max(1);
    (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect()
}

/// `n` nodes `k·period/n` on a circle.
pub(crate) fn circle_nodes(period: f64, n: usize) -> Vec<f64> {
    let n = n.max(1);
    (0..n).map(|i| period * i as f64 / n as f64).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridMeta {
    pub n: usize,
    pub n_aux: usize,
    pub delta: f64,
    pub margin: f64,
    pub samples: usize,
    pub description: String,
}

/// Outcome of one inequality.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionResult {
    #[serde(rename = "condition")]
    pub id: String,
    pub holds: bool,
    /// Value of the tested quantity (left-hand side minus nothing: compare
    /// against `threshold`).
    pub witness_value: f64,
    /// State at which the dominant term was attained. Empty for checks that
    /// are not tied to a phase-space point.
    pub witness_point: Vec<f64>,
    pub threshold: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl ConditionResult {
    pub(crate) fn below(id: &str, value: f64, threshold: f64, point: Vec<f64>) -> Self {
        ConditionResult {
            id: id.to_string(),
            holds: value < threshold,
            witness_value: value,
            witness_point: point,
            threshold,
            note: None,
        }
    }

    pub(crate) fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub model_id: String,
    pub conditions: Vec<ConditionResult>,
    pub grid: GridMeta,
    pub derived: BTreeMap<String, f64>,
    /// `analytic` or `finite_difference`.
    pub jacobian: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub sequences: BTreeMap<String, Vec<f64>>,
}

impl ConditionReport {
    pub(crate) fn new(model_id: &str, grid: GridMeta, analytic: bool) -> Self {
        ConditionReport {
            model_id: model_id.to_string(),
            conditions: Vec::new(),
            grid,
            derived: BTreeMap::new(),
            jacobian: if analytic { "analytic" } else { "finite_difference" }.to_string(),
            sequences: BTreeMap::new(),
        }
    }

    pub fn condition_ids(&self) -> Vec<&str> {
        self.conditions.iter().map(|c| c.id.as_str()).collect()
    }

    pub fn get(&self, id: &str) -> Option<&ConditionResult> {
        self.conditions.iter().find(|c| c.id == id)
    }

    pub fn holds(&self, id: &str) -> Option<bool> {
        self.get(id).map(|c| c.holds)
    }

    pub fn all_hold(&self) -> bool {
        self.conditions.iter().all(|c| c.holds)
    }

    pub fn failing(&self) -> Vec<&ConditionResult> {
        self.conditions.iter().filter(|c| !c.holds).collect()
    }
}

/// Running supremum with the index where it was attained. Merging is
/// associative and commutative (ties keep the smaller index); NaN counts
/// as `+∞`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct Sup {
    pub value: f64,
    pub index: usize,
}

impl Sup {
    pub const EMPTY: Sup = Sup {
        value: f64::NEG_INFINITY,
        index: usize::MAX,
    };

    pub fn at(value: f64, index: usize) -> Sup {
        Sup {
            value: if value.is_nan() { f64::INFINITY } else { value },
            index,
        }
    }

    pub fn merge(self, o: Sup) -> Sup {
        if o.value > self.value || (o.value == self.value && o.index < self.index) {
            o
        } else {
            self
        }
    }
}
