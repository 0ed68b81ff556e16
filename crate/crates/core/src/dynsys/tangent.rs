use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::integrate::{MapSettings, Rk4, StepSettings};
use super::jacobian::jacobian_at;
use super::model::{ModelKind, SystemModel};
use super::orbit::{Orbit, OrbitMeta};
use crate::error::{Error, Result};

/// `k` orthonormal tangent vectors attached to a state, plus the accumulated
/// log expansion of each direction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TangentFrame {
    pub basis: Vec<Vec<f64>>,
    pub log_growth: Vec<f64>,
}

impl TangentFrame {
    /// First `k` standard basis vectors of `R^n`.
    pub fn identity(n: usize, k: usize) -> Self {
        let basis = (0..k)
            .map(|i| {
                let mut v = vec![0.0; n];
                v[i] = 1.0;
                v
            })
            .collect();
        TangentFrame {
            basis,
            log_growth: vec![0.0; k],
        }
    }

    /// Orthonormalised fixed pseudo-random vectors. Unlike the standard
    /// basis this frame has no component exactly in a coordinate kernel.
    pub fn generic(n: usize, k: usize) -> Self {
        let mut frame = TangentFrame::identity(n, k);
        let mut x = 0.5f64;
        for v in &mut frame.basis {
            for c in v.iter_mut() {
                x = (x * 997.0 + 0.618_033_988_749_895).fract();
                *c += x - 0.5;
            }
        }
        gram_schmidt(&mut frame.basis).expect("perturbed identity has full rank");
        frame
    }

    pub fn k(&self) -> usize {
        self.basis.len()
    }

    /// Largest off-diagonal inner product and largest deviation of a norm
    /// from one.
    pub fn orthonormality_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.k() {
            for j in i..self.k() {
                let d = dot(&self.basis[i], &self.basis[j]);
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((d - target).abs());
            }
        }
        worst
    }

    /// Modified Gram–Schmidt with one reorthogonalisation pass. Returns the
    /// stretch factor of each direction and adds its log to `log_growth`.
    pub fn renormalize(&mut self) -> Result<Vec<f64>> {
        let norms = gram_schmidt(&mut self.basis)?;
        for (g, n) in self.log_growth.iter_mut().zip(&norms) {
            *g += n.ln();
        }
        Ok(norms)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn gram_schmidt(basis: &mut [Vec<f64>]) -> Result<Vec<f64>> {
    let k = basis.len();
    let mut norms = vec![0.0; k];
    for i in 0..k {
        let (done, rest) = basis.split_at_mut(i);
        let v = &mut rest[0];
        let mut total = 0.0;
        for pass in 0..2 {
            for u in done.iter() {
                let c = dot(v, u);
                for (vi, ui) in v.iter_mut().zip(u) {
                    *vi -= c * ui;
                }
            }
            let n = dot(v, v).sqrt();
            if !(n > 0.0) || !n.is_finite() {
                return Err(Error::Singular(format!(
                    "tangent vector {i} collapsed during orthonormalisation"
                )));
            }
            for vi in v.iter_mut() {
                *vi /= n;
            }
            if pass == 0 {
                total = n;
            } else {
                total *= n;
            }
        }
        norms[i] = total;
    }
    Ok(norms)
}

/// Length of a tangent propagation: flow time or number of map iterations.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Span {
    Time(f64),
    Steps(usize),
}

/// Settings shared by [`propagate_tangent`] and the Lyapunov estimator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TangentSettings {
    pub step: StepSettings,
    pub map: MapSettings,
    /// Re-orthonormalise every this many integrator steps or map iterations.
    pub renorm_every: usize,
}

impl Default for TangentSettings {
    fn default() -> Self {
        TangentSettings {
            step: StepSettings::default(),
            map: MapSettings::default(),
            renorm_every: 10,
        }
    }
}

/// Streaming tangent propagation. `on_renorm(elapsed, state, frame)` is called
/// after every re-orthonormalisation; it returns `false` to stop early.
pub(crate) fn run_tangent<C>(
    model: &SystemModel,
    s0: &[f64],
    frame: &mut TangentFrame,
    span: Span,
    settings: &TangentSettings,
    mut on_renorm: C,
) -> Result<(Vec<f64>, f64)>
where
    C: FnMut(f64, &[f64], &TangentFrame) -> bool,
{
    model.check_dim(s0)?;
    if settings.renorm_every == 0 {
        return Err(Error::param("renorm_every", "must be positive"));
    }
    let n = model.dim();
    for v in &frame.basis {
        if v.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: v.len(),
            });
        }
    }
    if frame.orthonormality_defect() > 1e-10 {
        return Err(Error::Precondition("initial frame is not orthonormal".into()));
    }
    let k = frame.k();
    let mut s = s0.to_vec();
    model.reduce(&mut s);
    match (model.kind, span) {
        (ModelKind::Flow, Span::Time(t_end)) => {
            settings.step.validate()?;
            if !(t_end > 0.0) {
                return Err(Error::param("span", "must be positive"));
            }
            let analytic = model.rule().jacobian(&s).is_some();
            let dim_aug = n + n * k;
            let rhs = |y: &[f64], out: &mut [f64]| {
                let (x, vs) = y.split_at(n);
                model.apply(x, &mut out[..n]);
                let jac: DMatrix<f64> = if analytic {
                    model.rule().jacobian(x).expect("analytic jacobian")
                } else {
                    super::jacobian::finite_difference_jacobian(model, x)
                };
                for c in 0..k {
                    let v = &vs[c * n..(c + 1) * n];
                    let o = &mut out[n + c * n..n + (c + 1) * n];
                    for i in 0..n {
                        let mut acc = 0.0;
                        for j in 0..n {
                            acc += jac[(i, j)] * v[j];
                        }
                        o[i] = acc;
                    }
                }
            };
            let mut y = vec![0.0; dim_aug];
            let mut rk = Rk4::new(dim_aug);
            let dt = settings.step.dt;
            let steps = (t_end / dt).round().max(1.0) as usize;
            let h = t_end / steps as f64;
            let mut t = 0.0;
            for i in 0..steps {
                y[..n].copy_from_slice(&s);
                for c in 0..k {
                    y[n + c * n..n + (c + 1) * n].copy_from_slice(&frame.basis[c]);
                }
                rk.step(&rhs, &mut y, h);
                s.copy_from_slice(&y[..n]);
                model.reduce(&mut s);
                for c in 0..k {
                    frame.basis[c].copy_from_slice(&y[n + c * n..n + (c + 1) * n]);
                }
                t = (i + 1) as f64 * h;
                let norm = s.iter().map(|v| v * v).sum::<f64>().sqrt();
                if !norm.is_finite() || norm > settings.step.escape_radius {
                    return Err(Error::Divergence { t, norm });
                }
                if (i + 1) % settings.renorm_every == 0 || i + 1 == steps {
                    frame.renormalize()?;
                    if !on_renorm(t, &s, frame) {
                        break;
                    }
                }
            }
            Ok((s, t))
        }
        (ModelKind::Map, Span::Steps(steps)) => {
            let mut out = vec![0.0; n];
            let mut tmp = vec![vec![0.0; n]; k];
            let mut done = 0usize;
            for i in 0..steps {
                if let Some(d) = model.locus_distance(&s) {
                    if d < settings.map.locus_band {
                        return Err(Error::LocusHit {
                            index: i,
                            band: settings.map.locus_band,
                            state: s,
                            partial: None,
                        });
                    }
                }
                let jac = jacobian_at(model, &s)?.matrix;
                for c in 0..k {
                    let v = &frame.basis[c];
                    for r in 0..n {
                        let mut acc = 0.0;
                        for j in 0..n {
                            acc += jac[(r, j)] * v[j];
                        }
                        tmp[c][r] = acc;
                    }
                }
                for c in 0..k {
                    frame.basis[c].copy_from_slice(&tmp[c]);
                }
                model.apply(&s, &mut out);
                model.reduce(&mut out);
                if out.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite { index: i + 1 });
                }
                if settings.map.check_domain {
                    if let Some((coord, value)) = model.domain_violation(&out) {
                        return Err(Error::DomainEscape {
                            index: i + 1,
                            coord,
                            value,
                            partial: None,
                        });
                    }
                }
                s.copy_from_slice(&out);
                done = i + 1;
                if done.is_multiple_of(settings.renorm_every) || done == steps {
                    frame.renormalize()?;
                    if !on_renorm(done as f64, &s, frame) {
                        break;
                    }
                }
            }
            Ok((s, done as f64))
        }
        (ModelKind::Flow, Span::Steps(_)) => Err(Error::param("span", "flows need a time span")),
        (ModelKind::Map, Span::Time(_)) => Err(Error::param("span", "maps need a step count")),
    }
}

/// Propagate an orthonormal frame along the orbit of `s0`, re-orthonormalising
/// every `settings.renorm_every` steps. The orbit is sampled at each
/// renormalisation.
pub fn propagate_tangent(
    model: &SystemModel,
    s0: &[f64],
    frame0: &TangentFrame,
    span: Span,
    settings: &TangentSettings,
) -> Result<(Orbit, TangentFrame)> {
    let mut frame = frame0.clone();
    let desc = format!("tangent renorm_every={}", settings.renorm_every);
    let mut orbit = Orbit::new(model.dim(), OrbitMeta::for_model(model, s0, desc));
    let mut s = s0.to_vec();
    model.reduce(&mut s);
    orbit.push(0.0, &s);
    run_tangent(model, s0, &mut frame, span, settings, |t, s, _| {
        orbit.push(t, s);
        true
    })?;
    Ok((orbit, frame))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gram_schmidt_orthonormalizes() {
        let mut f = TangentFrame {
            basis: vec![vec![1.0, 1.0, 0.0], vec![1.0, 0.0, 1.0], vec![0.0, 1.0, 1e-3]],
            log_growth: vec![0.0; 3],
        };
        f.renormalize().unwrap();
        assert!(f.orthonormality_defect() < 1e-12);
        assert!((f.log_growth[0] - 2f64.sqrt().ln()).abs() < 1e-12);
    }

    #[test]
    fn collapsed_frame_is_singular() {
        let mut f = TangentFrame {
            basis: vec![vec![1.0, 0.0], vec![2.0, 0.0]],
            log_growth: vec![0.0; 2],
        };
        assert!(f.renormalize().is_err());
    }

    #[test]
    fn decay_log_growth() {
        let m = SystemModel::custom_flow("decay", 1, |s, o| o[0] = -s[0]);
        let st = TangentSettings {
            step: StepSettings::fixed(1e-3),
            ..Default::default()
        };
        let (orbit, frame) =
            propagate_tangent(&m, &[1.0], &TangentFrame::identity(1, 1), Span::Time(1.0), &st)
                .unwrap();
        assert!((frame.log_growth[0] + 1.0).abs() < 1e-8);
        assert!(orbit.len() > 2);
    }

    #[test]
    fn propagation_is_deterministic() {
        let m = SystemModel::custom_map("henon", 2, |s, o| {
            o[0] = 1.0 - 1.4 * s[0] * s[0] + s[1];
            o[1] = 0.3 * s[0];
        });
        let st = TangentSettings::default();
        let run = || {
            propagate_tangent(&m, &[0.1, 0.1], &TangentFrame::identity(2, 2), Span::Steps(500), &st)
                .unwrap()
        };
        let (o1, f1) = run();
        let (o2, f2) = run();
        assert_eq!(o1, o2);
        assert_eq!(f1, f2);
    }
}
