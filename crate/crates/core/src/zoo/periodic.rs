use std::f64::consts::TAU;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A 1-periodic smooth function of one angle, with its derivative.
#[derive(Clone, Default)]
pub enum PeriodicFn {
    #[default]
    Zero,
    /// `amp * sin(2πθ)`.
    Sine { amp: f64 },
    /// `amp * sin(2π(kθ + phase))`.
    Harmonic { amp: f64, k: i32, phase: f64 },
    Custom { value: ScalarFn, derivative: ScalarFn },
}

impl fmt::Debug for PeriodicFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PeriodicFn::Zero => write!(f, "Zero"),
            PeriodicFn::Sine { amp } => write!(f, "Sine {{ amp: {amp} }}"),
            PeriodicFn::Harmonic { amp, k, phase } => {
                write!(f, "Harmonic {{ amp: {amp}, k: {k}, phase: {phase} }}")
            }
            PeriodicFn::Custom { .. } => write!(f, "Custom"),
        }
    }
}

impl PeriodicFn {
    pub fn sine(amp: f64) -> Self {
        PeriodicFn::Sine { amp }
    }

    pub fn custom<F, D>(value: F, derivative: D) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
        D: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        PeriodicFn::Custom {
            value: Arc::new(value),
            derivative: Arc::new(derivative),
        }
    }

    pub fn value(&self, theta: f64) -> f64 {
        match self {
            PeriodicFn::Zero => 0.0,
            PeriodicFn::Sine { amp } => amp * (TAU * theta).sin(),
            PeriodicFn::Harmonic { amp, k, phase } => {
                amp * (TAU * (*k as f64 * theta + phase)).sin()
            }
            PeriodicFn::Custom { value, .. } => value(theta),
        }
    }

    pub fn derivative(&self, theta: f64) -> f64 {
        match self {
            PeriodicFn::Zero => 0.0,
            PeriodicFn::Sine { amp } => amp * TAU * (TAU * theta).cos(),
            PeriodicFn::Harmonic { amp, k, phase } => {
                let kf = *k as f64;
                amp * TAU * kf * (TAU * (kf * theta + phase)).cos()
            }
            PeriodicFn::Custom { derivative, .. } => derivative(theta),
        }
    }

    /// `max |g'|`: closed form for the trigonometric variants, otherwise
    /// sampled on `samples` equispaced points.
    pub fn max_abs_derivative(&self, samples: usize) -> f64 {
        match self {
            PeriodicFn::Zero => 0.0,
            PeriodicFn::Sine { amp } => amp.abs() * TAU,
            PeriodicFn::Harmonic { amp, k, .. } => amp.abs() * TAU * (*k as f64).abs(),
            PeriodicFn::Custom { .. } => self.sampled_max_abs_derivative(samples),
        }
    }

    pub fn sampled_max_abs_derivative(&self, samples: usize) -> f64 {
        let n = samples.max(1);
        (0..n)
            .map(|i| self.derivative(i as f64 / n as f64).abs())
            .fold(0.0, f64::max)
    }

    /// Serializable description, if the function is not a custom handle.
    pub fn spec(&self) -> Option<PeriodicSpec> {
        match *self {
            PeriodicFn::Zero => Some(PeriodicSpec::Zero),
            PeriodicFn::Sine { amp } => Some(PeriodicSpec::Sine { amp }),
            PeriodicFn::Harmonic { amp, k, phase } => Some(PeriodicSpec::Harmonic { amp, k, phase }),
            PeriodicFn::Custom { .. } => None,
        }
    }
}

/// Configuration form of [`PeriodicFn`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PeriodicSpec {
    #[default]
    Zero,
    Sine { amp: f64 },
    Harmonic {
        amp: f64,
        k: i32,
        #[serde(default)]
        phase: f64,
    },
}

impl From<PeriodicSpec> for PeriodicFn {
    fn from(s: PeriodicSpec) -> Self {
        match s {
            PeriodicSpec::Zero => PeriodicFn::Zero,
            PeriodicSpec::Sine { amp } => PeriodicFn::Sine { amp },
            PeriodicSpec::Harmonic { amp, k, phase } => PeriodicFn::Harmonic { amp, k, phase },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sine_derivative_bound_matches_sampling() {
        for amp in [0.1, 0.2] {
            let g = PeriodicFn::sine(amp);
            let sampled = g.sampled_max_abs_derivative(100_000);
            assert!((g.max_abs_derivative(0) - sampled).abs() < 1e-6);
        }
        assert!(PeriodicFn::sine(0.2).max_abs_derivative(0) > 1.0);
        assert!(PeriodicFn::sine(0.1).max_abs_derivative(0) < 1.0);
    }

    #[test]
    fn harmonic_derivative_matches_difference_quotient() {
        let g = PeriodicFn::Harmonic { amp: 0.03, k: 3, phase: 0.1 };
        let h = 1e-6;
        for i in 0..20 {
            let t = i as f64 / 20.0;
            let fd = (g.value(t + h) - g.value(t - h)) / (2.0 * h);
            assert!((fd - g.derivative(t)).abs() < 1e-7);
        }
    }
}
