use serde::{Deserialize, Serialize};

use crate::dynsys::{run_tangent, Span, SystemModel, TangentFrame, TangentSettings};
use crate::error::{Error, Result};

/// Maximal number of history entries kept in a [`LyapunovResult`].
pub const MAX_HISTORY: usize = 2000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LyapunovSettings {
    pub tangent: TangentSettings,
    /// Discarded before accumulation starts.
    pub transient: Option<Span>,
    /// Bound on the relative drift of the estimates over the final 10% of
    /// the run.
    pub drift_bound: f64,
    /// Recorded for provenance only.
    pub seed: Option<u64>,
}

impl Default for LyapunovSettings {
    fn default() -> Self {
        LyapunovSettings {
            tangent: TangentSettings::default(),
            transient: None,
            drift_bound: 1e-2,
            seed: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub t: f64,
    pub exponents: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LyapunovResult {
    pub model_id: String,
    /// Decreasing order.
    pub exponents: Vec<f64>,
    pub history: Vec<HistoryEntry>,
    /// `max |λᵢ(t) − λᵢ(T)|` over the final 10% of the history, divided by
    /// `max |λᵢ(T)|`.
    pub drift: f64,
    pub converged: bool,
    pub duration: f64,
    pub initial: Vec<f64>,
    pub settings: LyapunovSettings,
}

fn expected_renorms(span: Span, s: &TangentSettings) -> usize {
    let steps = match span {
        Span::Time(t) => (t / s.step.dt).round().max(1.0) as usize,
        Span::Steps(n) => n,
    };
    steps / s.renorm_every.max(1) + 1
}

/// First `k` Lyapunov exponents by tangent propagation of an orthonormal
/// frame with periodic Gram–Schmidt re-orthonormalisation.
pub fn lyapunov_spectrum(
    model: &SystemModel,
    s0: &[f64],
    duration: Span,
    k: usize,
    settings: &LyapunovSettings,
) -> Result<LyapunovResult> {
    let n = model.dim();
    if k == 0 || k > n {
        return Err(Error::param("k", format!("must lie in 1..={n}")));
    }
    if !(settings.drift_bound > 0.0) {
        return Err(Error::param("drift_bound", "must be positive"));
    }
    if let Some((coord, value)) = model.domain_violation(s0) {
        return Err(Error::OutOfDomain { coord, value });
    }
    let ts = &settings.tangent;
    let mut frame = TangentFrame::generic(n, k);
    let mut s = s0.to_vec();
    if let Some(tr) = settings.transient {
        let (end, _) = run_tangent(model, &s, &mut frame, tr, ts, |_, _, _| true)?;
        s = end;
        frame.log_growth.iter_mut().for_each(|g| *g = 0.0);
    }
    let stride = (expected_renorms(duration, ts) / MAX_HISTORY).max(1);
    let mut history = Vec::new();
    let mut count = 0usize;
    let mut last = HistoryEntry { t: 0.0, exponents: vec![0.0; k] };
    let (_, elapsed) = run_tangent(model, &s, &mut frame, duration, ts, |t, _, f| {
        count += 1;
        let e = HistoryEntry {
            t,
            exponents: f.log_growth.iter().map(|g| g / t).collect(),
        };
        if count.is_multiple_of(stride) {
            history.push(e.clone());
        }
        last = e;
        true
    })?;
    if history.last().map(|h| h.t) != Some(last.t) {
        history.push(last.clone());
    }
    if !(elapsed > 0.0) {
        return Err(Error::param("duration", "must be positive"));
    }
    let finals = last.exponents.clone();
    let scale = finals.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
    let drift = history
        .iter()
        .filter(|h| h.t >= 0.9 * elapsed)
        .flat_map(|h| h.exponents.iter().zip(&finals).map(|(a, b)| (a - b).abs()))
        .fold(0.0f64, f64::max)
        / scale;
    let mut exponents = finals;
    exponents.sort_by(|a, b| b.total_cmp(a));
    Ok(LyapunovResult {
        model_id: model.id.clone(),
        exponents,
        history,
        drift,
        converged: drift.is_finite() && drift < settings.drift_bound,
        duration: elapsed,
        initial: s0.to_vec(),
        settings: *settings,
    })
}
