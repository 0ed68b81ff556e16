//! Parameter sweeps: blue-sky period growth, solenoid birth, circle-family
//! classification and the two-parameter Lorenz-map family.

mod blue_sky;
mod circle;
mod lorenz_family;
mod solenoid;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::dynsys::fmt17;
use crate::error::{Error, Result};
use crate::zoo::{GeomLorenzConfig, PeriodicSpec, SolidTorusConfig};

pub use blue_sky::{blue_sky_scan, blue_sky_period, PASSAGE_Z};
pub use circle::{circle_family_scan, circle_lyapunov, ROTATION_TOL};
pub use lorenz_family::{demo_lorenz_base, lorenz_family_scan, shifted, LorenzScanSettings};
pub use solenoid::{fiber_section, solenoid_birth_check, SolenoidSettings};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tag {
    /// Contracting circle map with a unique attracting fixed point.
    FixedPoint,
    /// Zero Lyapunov exponent.
    Rotation,
    /// Negative exponent without a global contraction: attracting cycle.
    Locked,
    ExpandingChaos,
    /// Unique attracting fixed point of the return map; period reconstructed.
    BlueSky,
    HypothesisViolation,
    Solenoid,
    NotASolenoid,
    FullBranch,
    PartialBranch,
    ReductionInvalid,
    DomainEscape,
}

impl Tag {
    pub fn as_str(&self) -> &'static str {
        match self {
            Tag::FixedPoint => "fixed_point",
            Tag::Rotation => "rotation",
            Tag::Locked => "locked",
            Tag::ExpandingChaos => "expanding_chaos",
            Tag::BlueSky => "blue_sky",
            Tag::HypothesisViolation => "hypothesis_violation",
            Tag::Solenoid => "solenoid",
            Tag::NotASolenoid => "not_a_solenoid",
            Tag::FullBranch => "full_branch",
            Tag::PartialBranch => "partial_branch",
            Tag::ReductionInvalid => "reduction_invalid",
            Tag::DomainEscape => "domain_escape",
        }
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    BlueSky,
    Solenoid,
    CircleFamily,
    LorenzFamily,
}

impl Family {
    /// Names that may be swept, in the order they must appear.
    pub fn axis_names(&self) -> &'static [&'static str] {
        match self {
            Family::BlueSky => &["mu"],
            Family::Solenoid => &["mu", "mu_c", "omega", "h_amp", "offset"],
            Family::CircleFamily => &["omega"],
            Family::LorenzFamily => &["mu1", "mu2"],
        }
    }
}

/// Extra per-point analyses on top of the family's own diagnostics.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnalysisKind {
    Lyapunov,
    Periodic,
    Kneading,
    Verify,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisScale {
    #[default]
    Linear,
    Log,
}

/// One swept parameter: either explicit `values` or `n` points from `lo` to
/// `hi` (inclusive).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lo: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default)]
    pub scale: AxisScale,
}

impl Axis {
    pub fn values(name: &str, values: Vec<f64>) -> Self {
        Axis {
            name: name.to_string(),
            values: Some(values),
            lo: None,
            hi: None,
            n: None,
            scale: AxisScale::Linear,
        }
    }

    pub fn range(name: &str, lo: f64, hi: f64, n: usize) -> Self {
        Axis {
            name: name.to_string(),
            values: None,
            lo: Some(lo),
            hi: Some(hi),
            n: Some(n),
            scale: AxisScale::Linear,
        }
    }

    /// Grid points; `field` names the axis in error messages.
    pub fn points(&self, field: &str) -> Result<Vec<f64>> {
        let v = match (&self.values, self.lo, self.hi, self.n) {
            (Some(v), None, None, None) => v.clone(),
            (None, Some(lo), Some(hi), Some(n)) => {
                if n < 2 {
                    return Err(Error::param(&format!("{field}.n"), "grid size must be at least 2"));
                }
                match self.scale {
                    AxisScale::Linear => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
                    AxisScale::Log => {
                        if !(lo > 0.0 && hi > 0.0) {
                            return Err(Error::param(&format!("{field}.lo"), "log axes need positive bounds"));
                        }
                        let (a, b) = (lo.ln(), hi.ln());
                        (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
                    }
                }
            }
            _ => {
                return Err(Error::param(
                    field,
                    "give either `values` or all of `lo`, `hi`, `n`",
                ))
            }
        };
        if v.len() < 2 {
            return Err(Error::param(&format!("{field}.values"), "grid size must be at least 2"));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::param(&format!("{field}.values"), "must be finite"));
        }
        Ok(v)
    }
}

/// JSON description of a sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSpec {
    pub family: Family,
    /// Family parameters held fixed; an empty object selects the defaults.
    #[serde(default = "empty_object")]
    pub base: Value,
    pub axes: Vec<Axis>,
    #[serde(default)]
    pub analyses: Vec<AnalysisKind>,
    /// Master seed; per-point seeds derive from it and the grid index.
    #[serde(default)]
    pub seed: u64,
}

fn empty_object() -> Value {
    Value::Object(Default::default())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanRecord {
    pub index: Vec<usize>,
    /// Swept values in axis order.
    pub params: Vec<f64>,
    pub tag: Tag,
    pub diagnostics: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub notes: BTreeMap<String, String>,
}

impl ScanRecord {
    pub(crate) fn new(index: Vec<usize>, params: Vec<f64>, tag: Tag) -> Self {
        ScanRecord {
            index,
            params,
            tag,
            diagnostics: BTreeMap::new(),
            notes: BTreeMap::new(),
        }
    }

    pub(crate) fn diag(mut self, name: &str, v: f64) -> Self {
        self.diagnostics.insert(name.to_string(), v);
        self
    }

    pub(crate) fn note(mut self, name: &str, v: impl Into<String>) -> Self {
        self.notes.insert(name.to_string(), v.into());
        self
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.diagnostics.get(name).copied()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanResult {
    pub family: Family,
    pub axes: Vec<String>,
    pub shape: Vec<usize>,
    /// Row-major over the axes.
    pub records: Vec<ScanRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<ScanSpec>,
    pub version: String,
}

impl ScanResult {
    pub(crate) fn new(family: Family, axes: &[&str], shape: Vec<usize>, records: Vec<ScanRecord>) -> Self {
        ScanResult {
            family,
            axes: axes.iter().map(|s| s.to_string()).collect(),
            shape,
            records,
            spec: None,
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    pub fn column(&self, name: &str) -> Vec<f64> {
        self.records.iter().map(|r| r.get(name).unwrap_or(f64::NAN)).collect()
    }

    pub fn tags(&self) -> Vec<Tag> {
        self.records.iter().map(|r| r.tag).collect()
    }

    /// One row per grid point: swept values, tag, diagnostics, notes.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let diags: BTreeSet<&str> = self
            .records
            .iter()
            .flat_map(|r| r.diagnostics.keys().map(String::as_str))
            .collect();
        let notes: BTreeSet<&str> = self
            .records
            .iter()
            .flat_map(|r| r.notes.keys().map(String::as_str))
            .collect();
        let mut head: Vec<&str> = self.axes.iter().map(String::as_str).collect();
        head.push("tag");
        head.extend(&diags);
        head.extend(&notes);
        writeln!(w, "{}", head.join(","))?;
        for r in &self.records {
            let mut row: Vec<String> = r.params.iter().map(|v| fmt17(*v)).collect();
            row.push(r.tag.to_string());
            row.extend(diags.iter().map(|k| r.get(k).map(fmt17).unwrap_or_default()));
            row.extend(notes.iter().map(|k| quote(r.notes.get(*k).map(String::as_str).unwrap_or(""))));
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

fn quote(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Seed of grid point `index` under master seed `seed` (splitmix64).
pub fn point_seed(seed: u64, index: usize) -> u64 {
    let mut z = seed ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BlueSkyBase {
    #[serde(default)]
    omega: f64,
    #[serde(default)]
    g: PeriodicSpec,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CircleBase {
    #[serde(default = "one")]
    m: i64,
    #[serde(default)]
    g: PeriodicSpec,
}

fn one() -> i64 {
    1
}

fn parse_base<T: serde::de::DeserializeOwned>(v: &Value) -> Result<T> {
    T::deserialize(v).map_err(|e| Error::InvalidParam {
        name: "base".into(),
        reason: e.to_string(),
    })
}

impl ScanSpec {
    pub fn parse_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidParam {
            name: "scan spec".into(),
            reason: e.to_string(),
        })
    }

    /// Axis grids after validating names against the family.
    pub fn grids(&self) -> Result<Vec<Vec<f64>>> {
        let allowed = self.family.axis_names();
        if self.axes.is_empty() {
            return Err(Error::param("axes", "grid is empty"));
        }
        let required = match self.family {
            Family::LorenzFamily => 2,
            _ => 1,
        };
        if self.axes.len() != required {
            return Err(Error::param("axes", format!("family expects {required} axis/axes")));
        }
        let mut seen = BTreeSet::new();
        for (i, a) in self.axes.iter().enumerate() {
            if !allowed.contains(&a.name.as_str()) {
                return Err(Error::param(
                    &format!("axes[{i}].name"),
                    format!("unknown parameter `{}`; expected one of {}", a.name, allowed.join(", ")),
                ));
            }
            if !seen.insert(a.name.as_str()) {
                return Err(Error::param(&format!("axes[{i}].name"), "duplicate axis"));
            }
        }
        if self.family == Family::LorenzFamily && (self.axes[0].name != "mu1" || self.axes[1].name != "mu2") {
            return Err(Error::param("axes", "expected axes mu1, mu2 in this order"));
        }
        self.axes
            .iter()
            .enumerate()
            .map(|(i, a)| a.points(&format!("axes[{i}]")))
            .collect()
    }

    fn check_analyses(&self, allowed: &[AnalysisKind]) -> Result<()> {
        for (i, a) in self.analyses.iter().enumerate() {
            if !allowed.contains(a) {
                return Err(Error::param(
                    &format!("analyses[{i}]"),
                    format!("{a:?} is not available for this family").to_lowercase(),
                ));
            }
        }
        Ok(())
    }

    pub fn wants(&self, a: AnalysisKind) -> bool {
        self.analyses.contains(&a)
    }
}

/// Runs a sweep described by `spec`.
pub fn run_scan(spec: &ScanSpec) -> Result<ScanResult> {
    let grids = spec.grids()?;
    let mut result = match spec.family {
        Family::BlueSky => {
            spec.check_analyses(&[AnalysisKind::Periodic])?;
            let b: BlueSkyBase = parse_base(&spec.base)?;
            blue_sky_scan(b.omega, &b.g.into(), &grids[0])?
        }
        Family::CircleFamily => {
            spec.check_analyses(&[AnalysisKind::Lyapunov, AnalysisKind::Periodic])?;
            let b: CircleBase = parse_base(&spec.base)?;
            circle_family_scan(b.m, &b.g.into(), &grids[0], spec.seed, spec.wants(AnalysisKind::Periodic))?
        }
        Family::Solenoid => {
            spec.check_analyses(&[AnalysisKind::Lyapunov])?;
            let b: SolidTorusConfig = parse_base(&spec.base)?;
            let settings = SolenoidSettings {
                lyapunov: spec.wants(AnalysisKind::Lyapunov),
                ..Default::default()
            };
            solenoid::sweep(&b.into(), &spec.axes[0].name, &grids[0], &settings, spec.seed)?
        }
        Family::LorenzFamily => {
            spec.check_analyses(&[
                AnalysisKind::Lyapunov,
                AnalysisKind::Kneading,
                AnalysisKind::Verify,
                AnalysisKind::Periodic,
            ])?;
            let base = if spec.base.as_object().is_some_and(|o| o.is_empty()) {
                demo_lorenz_base()
            } else {
                parse_base::<GeomLorenzConfig>(&spec.base)?.into()
            };
            let settings = LorenzScanSettings {
                verify: spec.wants(AnalysisKind::Verify),
                periodic: spec.wants(AnalysisKind::Periodic),
                ..Default::default()
            };
            lorenz_family_scan(&base, &grids[0], &grids[1], &settings, spec.seed)?
        }
    };
    result.spec = Some(spec.clone());
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_validation() {
        assert!(Axis::range("mu", 0.0, 1.0, 1).points("axes[0]").is_err());
        assert!(Axis::values("mu", vec![]).points("axes[0]").is_err());
        let a = Axis {
            scale: AxisScale::Log,
            ..Axis::range("mu", 1e-4, 1e-2, 3)
        };
        let p = a.points("axes[0]").unwrap();
        assert!((p[1] - 1e-3).abs() < 1e-15);
    }

    #[test]
    fn spec_errors_name_the_field() {
        let e = ScanSpec::parse_json(r#"{"family": "blue_sky", "axes": [{"name": "nu", "values": [1, 2]}]}"#)
            .unwrap()
            .grids()
            .unwrap_err();
        assert!(e.to_string().contains("axes[0].name"), "{e}");
        let e = ScanSpec::parse_json(r#"{"family": "blue_sky", "axis": []}"#).unwrap_err();
        assert!(e.to_string().contains("axis"), "{e}");
        let e = ScanSpec::parse_json(r#"{"family": "blue_sky", "axes": []}"#).unwrap().grids().unwrap_err();
        assert!(e.to_string().contains("empty"), "{e}");
    }

    #[test]
    fn point_seeds_differ() {
        assert_ne!(point_seed(0, 0), point_seed(0, 1));
        assert_eq!(point_seed(7, 3), point_seed(7, 3));
    }
}
