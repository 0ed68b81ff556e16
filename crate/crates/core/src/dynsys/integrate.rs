use serde::{Deserialize, Serialize};

use super::model::{ModelKind, State, SystemModel};
use super::orbit::{Orbit, OrbitMeta};
use crate::error::{Error, Result};

/// Settings for flow integration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StepSettings {
    /// Fixed step (or initial step when adaptive).
    pub dt: f64,
    /// Local error tolerance used by the adaptive refinement.
    pub tol: f64,
    pub adaptive: bool,
    pub escape_radius: f64,
    /// Keep every `record_every`-th step in the returned orbit.
    pub record_every: usize,
    pub min_dt: f64,
}

impl Default for StepSettings {
    fn default() -> Self {
        StepSettings {
            dt: 0.01,
            tol: 1e-9,
            adaptive: false,
            escape_radius: 1e6,
            record_every: 1,
            min_dt: 1e-12,
        }
    }
}

impl StepSettings {
    pub fn fixed(dt: f64) -> Self {
        StepSettings {
            dt,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::param("dt", "must be positive and finite"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::param("tol", "must be positive"));
        }
        if self.record_every == 0 {
            return Err(Error::param("record_every", "must be at least 1"));
        }
        Ok(())
    }

    fn describe(&self) -> String {
        format!(
            "rk4 dt={} adaptive={} tol={:e} escape={:e}",
            self.dt, self.adaptive, self.tol, self.escape_radius
        )
    }
}

/// Settings for map iteration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MapSettings {
    /// Iterates closer than this to the discontinuity locus stop the orbit.
    pub locus_band: f64,
    pub record_every: usize,
    /// Reject iterates that leave the model domain.
    pub check_domain: bool,
}

impl Default for MapSettings {
    fn default() -> Self {
        MapSettings {
            locus_band: 1e-9,
            record_every: 1,
            check_domain: true,
        }
    }
}

/// Classical fourth-order Runge–Kutta stepper with reusable scratch space.
pub(crate) struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4 {
    pub(crate) fn new(n: usize) -> Self {
        Rk4 {
            k1: vec![0.0; n],
            k2: vec![0.0; n],
            k3: vec![0.0; n],
            k4: vec![0.0; n],
            tmp: vec![0.0; n],
        }
    }

    pub(crate) fn step<F>(&mut self, f: &F, s: &mut [f64], dt: f64)
    where
        F: Fn(&[f64], &mut [f64]) + ?Sized,
    {
        let n = s.len();
        f(s, &mut self.k1);
        for i in 0..n {
            self.tmp[i] = s[i] + 0.5 * dt * self.k1[i];
        }
        f(&self.tmp, &mut self.k2);
        for i in 0..n {
            self.tmp[i] = s[i] + 0.5 * dt * self.k2[i];
        }
        f(&self.tmp, &mut self.k3);
        for i in 0..n {
            self.tmp[i] = s[i] + dt * self.k3[i];
        }
        f(&self.tmp, &mut self.k4);
        for i in 0..n {
            s[i] += dt / 6.0 * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
    }
}

/// Step-doubling error control around [`Rk4`]. Returns the accepted step and
/// a suggestion for the next one.
pub(crate) struct AdaptiveRk4 {
    rk: Rk4,
    full: Vec<f64>,
    half: Vec<f64>,
}

impl AdaptiveRk4 {
    pub(crate) fn new(n: usize) -> Self {
        AdaptiveRk4 {
            rk: Rk4::new(n),
            full: vec![0.0; n],
            half: vec![0.0; n],
        }
    }

    pub(crate) fn step<F>(
        &mut self,
        f: &F,
        s: &mut [f64],
        dt: f64,
        tol: f64,
        min_dt: f64,
        t: f64,
    ) -> Result<(f64, f64)>
    where
        F: Fn(&[f64], &mut [f64]) + ?Sized,
    {
        let mut h = dt;
        loop {
            if h < min_dt {
                return Err(Error::StepUnderflow { t, dt: h });
            }
            self.full.copy_from_slice(s);
            self.rk.step(f, &mut self.full, h);
            self.half.copy_from_slice(s);
            self.rk.step(f, &mut self.half, 0.5 * h);
            self.rk.step(f, &mut self.half, 0.5 * h);
            let mut err = 0.0f64;
            for i in 0..s.len() {
                let scale = 1.0 + self.half[i].abs();
                err = err.max((self.half[i] - self.full[i]).abs() / 15.0 / scale);
            }
            if !err.is_finite() {
                h *= 0.25;
                continue;
            }
            if err <= tol {
                // Richardson extrapolation of the two estimates.
                for i in 0..s.len() {
                    s[i] = self.half[i] + (self.half[i] - self.full[i]) / 15.0;
                }
                let grow = if err == 0.0 {
                    2.0
                } else {
                    (0.9 * (tol / err).powf(0.2)).clamp(0.2, 2.0)
                };
                return Ok((h, h * grow));
            }
            h *= (0.9 * (tol / err).powf(0.2)).clamp(0.1, 0.5);
        }
    }
}

fn escape_check(s: &[f64], t: f64, radius: f64) -> Result<()> {
    let norm = s.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !norm.is_finite() || norm > radius {
        return Err(Error::Divergence { t, norm });
    }
    Ok(())
}

fn require_flow(model: &SystemModel) -> Result<()> {
    if model.kind != ModelKind::Flow {
        return Err(Error::WrongKind { expected: "flow" });
    }
    Ok(())
}

/// Integrate a flow over `[0, t_end]`. The last step is shortened so that the
/// final sample sits exactly at `t_end`.
pub fn integrate_flow(
    model: &SystemModel,
    s0: &[f64],
    t_end: f64,
    settings: &StepSettings,
) -> Result<Orbit> {
    require_flow(model)?;
    model.check_dim(s0)?;
    settings.validate()?;
    if !(t_end > 0.0) {
        return Err(Error::param("t_end", "must be positive"));
    }
    if let Some((coord, value)) = model.domain_violation(s0) {
        return Err(Error::OutOfDomain { coord, value });
    }
    let n = model.dim();
    let rhs = |s: &[f64], out: &mut [f64]| model.apply(s, out);
    let mut orbit = Orbit::new(n, OrbitMeta::for_model(model, s0, settings.describe()));
    let mut s = s0.to_vec();
    model.reduce(&mut s);
    orbit.push(0.0, &s);

    let mut t = 0.0;
    let mut steps = 0usize;
    let mut rk = Rk4::new(n);
    let mut ark = AdaptiveRk4::new(n);
    let mut dt = settings.dt;
    while t < t_end {
        let remaining = t_end - t;
        let (h, next) = if settings.adaptive {
            let trial = dt.min(remaining);
            ark.step(&rhs, &mut s, trial, settings.tol, settings.min_dt, t)?
        } else {
            let h = if remaining < settings.dt * (1.0 + 1e-9) {
                remaining
            } else {
                settings.dt
            };
            rk.step(&rhs, &mut s, h);
            (h, settings.dt)
        };
        dt = next;
        t = if (t_end - (t + h)).abs() <= 1e-12 * t_end.max(1.0) {
            t_end
        } else {
            t + h
        };
        model.reduce(&mut s);
        escape_check(&s, t, settings.escape_radius)?;
        steps += 1;
        if steps.is_multiple_of(settings.record_every) || t >= t_end {
            orbit.push(t, &s);
        }
    }
    Ok(orbit)
}

/// Integrate until coordinate `coord` first crosses `level` upward (or
/// downward when `upward` is false). The crossing is refined by bisection on
/// the step length to about 1e-12 in time.
pub fn integrate_to_crossing(
    model: &SystemModel,
    s0: &[f64],
    coord: usize,
    level: f64,
    upward: bool,
    t_max: f64,
    settings: &StepSettings,
) -> Result<(f64, State)> {
    require_flow(model)?;
    model.check_dim(s0)?;
    settings.validate()?;
    let n = model.dim();
    let rhs = |s: &[f64], out: &mut [f64]| model.apply(s, out);
    let side = |v: f64| if upward { v - level } else { level - v };
    let mut rk = Rk4::new(n);
    let mut s = s0.to_vec();
    let mut t = 0.0;
    let mut prev = s.clone();
    while t < t_max {
        prev.copy_from_slice(&s);
        rk.step(&rhs, &mut s, settings.dt);
        escape_check(&s, t + settings.dt, settings.escape_radius)?;
        if side(prev[coord]) < 0.0 && side(s[coord]) >= 0.0 {
            let (mut lo, mut hi) = (0.0, settings.dt);
            let mut trial = prev.clone();
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                trial.copy_from_slice(&prev);
                rk.step(&rhs, &mut trial, mid);
                if side(trial[coord]) >= 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
                if hi - lo < 1e-13 {
                    break;
                }
            }
            trial.copy_from_slice(&prev);
            rk.step(&rhs, &mut trial, hi);
            model.reduce(&mut trial);
            return Ok((t + hi, State(trial)));
        }
        t += settings.dt;
        model.reduce(&mut s);
    }
    Err(Error::NoCrossing {
        coord,
        level,
        t_max,
    })
}

/// Iterate a map `n` times with default settings.
pub fn iterate_map(model: &SystemModel, s0: &[f64], n: usize) -> Result<Orbit> {
    iterate_map_with(model, s0, n, &MapSettings::default())
}

/// Iterate a map `n` times, producing `n + 1` samples. Iterates inside the
/// locus guard band or outside the domain stop the orbit; the error carries
/// the truncated orbit.
pub fn iterate_map_with(
    model: &SystemModel,
    s0: &[f64],
    n: usize,
    settings: &MapSettings,
) -> Result<Orbit> {
    if model.kind != ModelKind::Map {
        return Err(Error::WrongKind { expected: "map" });
    }
    model.check_dim(s0)?;
    if settings.record_every == 0 {
        return Err(Error::param("record_every", "must be at least 1"));
    }
    let settings_desc = format!("map band={:e}", settings.locus_band);
    let mut orbit = Orbit::new(
        model.dim(),
        OrbitMeta::for_model(model, s0, settings_desc),
    );
    let mut s = s0.to_vec();
    model.reduce(&mut s);
    orbit.push(0.0, &s);
    let mut out = vec![0.0; model.dim()];
    for i in 0..n {
        if let Some(d) = model.locus_distance(&s) {
            if d < settings.locus_band {
                return Err(Error::LocusHit {
                    index: i,
                    band: settings.locus_band,
                    state: s,
                    partial: Some(Box::new(orbit)),
                });
            }
        }
        model.apply(&s, &mut out);
        model.reduce(&mut out);
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index: i + 1 });
        }
        if settings.check_domain {
            if let Some((coord, value)) = model.domain_violation(&out) {
                return Err(Error::DomainEscape {
                    index: i + 1,
                    coord,
                    value,
                    partial: Some(Box::new(orbit)),
                });
            }
        }
        s.copy_from_slice(&out);
        if (i + 1) % settings.record_every == 0 || i + 1 == n {
            orbit.push((i + 1) as f64, &s);
        }
    }
    Ok(orbit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynsys::model::Coord;

    fn decay() -> SystemModel {
        SystemModel::custom_flow("decay", 1, |s, o| o[0] = -s[0])
    }

    #[test]
    fn exponential_decay_endpoint() {
        let o = integrate_flow(&decay(), &[1.0], 1.0, &StepSettings::fixed(1e-3)).unwrap();
        let last = o.last_state().unwrap();
        assert!((last[0] - (-1.0f64).exp()).abs() < 1e-8);
        assert_eq!(o.time(o.len() - 1), 1.0);
    }

    #[test]
    fn adaptive_decay_endpoint() {
        let st = StepSettings {
            adaptive: true,
            tol: 1e-12,
            dt: 0.1,
            ..Default::default()
        };
        let o = integrate_flow(&decay(), &[1.0], 1.0, &st).unwrap();
        assert!((o.last_state().unwrap()[0] - (-1.0f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn rk4_is_fourth_order() {
        let exact = (-1.0f64).exp();
        let err = |dt: f64| {
            let o = integrate_flow(&decay(), &[1.0], 1.0, &StepSettings::fixed(dt)).unwrap();
            (o.last_state().unwrap()[0] - exact).abs()
        };
        let (e1, e2) = (err(0.1), err(0.05));
        // order 4: halving the step divides the error by ~16 >= 2^(4-1)
        assert!(e1 / e2 >= 8.0, "ratio {}", e1 / e2);
    }

    #[test]
    fn divergence_is_reported() {
        let grow = SystemModel::custom_flow("grow", 1, |s, o| o[0] = s[0] * s[0]);
        let st = StepSettings {
            escape_radius: 1e3,
            ..StepSettings::fixed(1e-3)
        };
        let e = integrate_flow(&grow, &[1.0], 2.0, &st).unwrap_err();
        assert!(matches!(e, Error::Divergence { .. }));
    }

    #[test]
    fn map_rejected_by_flow_integrator() {
        let m = SystemModel::custom_map("m", 1, |s, o| o[0] = s[0]);
        assert!(matches!(
            integrate_flow(&m, &[0.0], 1.0, &StepSettings::default()),
            Err(Error::WrongKind { .. })
        ));
    }

    #[test]
    fn locus_hit_truncates() {
        let m = SystemModel::custom_map("half", 1, |s, o| o[0] = s[0] - 0.5).with_locus(0, 0.0);
        match iterate_map(&m, &[1.0], 5) {
            Err(Error::LocusHit { index, partial, .. }) => {
                assert_eq!(index, 2);
                assert_eq!(partial.unwrap().len(), 3);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn domain_escape_truncates() {
        let m = SystemModel::custom_map("dbl", 1, |s, o| o[0] = 2.0 * s[0])
            .with_coords(vec![Coord::real(-1.0, 1.0)]);
        assert!(matches!(
            iterate_map(&m, &[0.3], 3),
            Err(Error::DomainEscape { index: 2, .. })
        ));
    }

    #[test]
    fn crossing_time_of_linear_flow() {
        let m = SystemModel::custom_flow("drift", 1, |_, o| o[0] = 2.0);
        let (t, s) =
            integrate_to_crossing(&m, &[0.0], 0, 1.0, true, 10.0, &StepSettings::fixed(0.03))
                .unwrap();
        assert!((t - 0.5).abs() < 1e-10);
        assert!((s[0] - 1.0).abs() < 1e-10);
    }
}
