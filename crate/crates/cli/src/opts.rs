//! Command-line and configuration-file options. Every command's options
//! deserialize from the same JSON keys as its long flags (with `_` for `-`);
//! flags override the configuration file.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{CliError, CliResult};

/// Seed used when neither `--seed` nor the configuration sets one.
pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_OUT: &str = "hyperlab-out";

#[derive(Debug, Parser)]
#[command(name = "hyperlab", version, about = "Simulate, verify and analyse strange attractors")]
pub struct Cli {
    /// JSON file with the command's options (or the scan spec).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed of every random choice.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory [default: hyperlab-out].
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate a flow or iterate a map and write the orbit.
    Simulate(SimulateOpts),
    /// Check hyperbolicity conditions; exit 1 when one fails.
    Verify(VerifyOpts),
    /// Lyapunov spectrum, box dimension, recurrence, periodic points or
    /// chain attractor.
    #[command(subcommand)]
    Analyze(AnalyzeCommand),
    /// Run a parameter sweep described by a JSON spec.
    Scan(ScanOpts),
    /// Kneading invariant of a one-dimensional Lorenz-type map.
    Kneading(KneadingOpts),
    /// Re-run a manifest and compare output hashes.
    Replay(ReplayOpts),
}

#[derive(Debug, Subcommand)]
pub enum AnalyzeCommand {
    Lyapunov(LyapunovOpts),
    Dimension(DimensionOpts),
    Recurrence(RecurrenceOpts),
    Periodic(PeriodicOpts),
    Attractor(AttractorOpts),
}

pub fn parse_json_arg(s: &str) -> Result<Value, String> {
    serde_json::from_str(s).map_err(|e| format!("not valid JSON: {e}"))
}

/// Declares an options struct that is both a clap argument group and a
/// serde object with optional fields.
macro_rules! options {
    ($(#[$m:meta])* $name:ident { $($(#[$fm:meta])* $field:ident : $ty:ty),* $(,)? }) => {
        $(#[$m])*
        #[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
        #[serde(deny_unknown_fields)]
        pub struct $name {
            $(
                $(#[$fm])*
                #[serde(default, skip_serializing_if = "Option::is_none")]
                pub $field: Option<$ty>,
            )*
        }
    };
}

options!(SimulateOpts {
    /// Model name.
    #[arg(long)]
    model: String,
    /// Model parameters as a JSON object.
    #[arg(long, value_parser = parse_json_arg)]
    params: Value,
    /// Initial state, comma separated (default: seeded draw in the domain).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    initial: Vec<f64>,
    /// Flow time [default: 100].
    #[arg(long)]
    t: f64,
    /// Map iterations [default: 10000].
    #[arg(long)]
    steps: usize,
    /// Integrator step [default: 0.01].
    #[arg(long)]
    dt: f64,
    /// Keep every n-th sample [default: 1].
    #[arg(long)]
    record_every: usize,
});

options!(VerifyOpts {
    #[arg(long)]
    model: String,
    #[arg(long, value_parser = parse_json_arg)]
    params: Value,
    /// Integer matrix as JSON, e.g. [[2,1],[1,1]]; selects the Anosov check.
    #[arg(long, value_parser = parse_json_arg)]
    matrix: Value,
    /// anosov, expansion, lorenz or pseudo [default: chosen from the model].
    #[arg(long)]
    check: String,
    /// Grid intervals along the main axis [default: 256].
    #[arg(long)]
    grid: usize,
    /// Grid intervals along the other axes [default: 32].
    #[arg(long)]
    grid_aux: usize,
    /// Excluded band around the discontinuity locus [default: 1e-4].
    #[arg(long)]
    delta: f64,
    /// Pseudo-hyperbolicity exponent [default: midpoint of (rho, eta)].
    #[arg(long)]
    beta: f64,
});

options!(LyapunovOpts {
    #[arg(long)]
    model: String,
    #[arg(long, value_parser = parse_json_arg)]
    params: Value,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    initial: Vec<f64>,
    /// Flow time [default: 1000].
    #[arg(long)]
    t: f64,
    /// Map iterations [default: 100000].
    #[arg(long)]
    steps: usize,
    #[arg(long)]
    dt: f64,
    /// Discarded flow time or iterations [default: 20 or 1000].
    #[arg(long)]
    transient: f64,
    /// Number of exponents [default: all].
    #[arg(long)]
    k: usize,
    /// Re-orthonormalisation interval in steps [default: 1].
    #[arg(long)]
    renorm_every: usize,
});

options!(DimensionOpts {
    /// Orbit CSV to measure instead of simulating.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    model: String,
    #[arg(long, value_parser = parse_json_arg)]
    params: Value,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    initial: Vec<f64>,
    /// Flow time [default: 1000].
    #[arg(long)]
    t: f64,
    /// Map iterations [default: 100000].
    #[arg(long)]
    steps: usize,
    #[arg(long)]
    dt: f64,
    #[arg(long)]
    transient: f64,
    /// Coarsest dyadic level [default: 2].
    #[arg(long)]
    scale_lo: u32,
    /// Finest dyadic level [default: 8].
    #[arg(long)]
    scale_hi: u32,
});

options!(RecurrenceOpts {
    #[arg(long)]
    model: String,
    #[arg(long, value_parser = parse_json_arg)]
    params: Value,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    initial: Vec<f64>,
    /// Flow time [default: 1000].
    #[arg(long)]
    t: f64,
    /// Map iterations [default: 100000].
    #[arg(long)]
    steps: usize,
    #[arg(long)]
    dt: f64,
    #[arg(long)]
    transient: f64,
    /// Ball center [default: first sample after the transient].
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    center: Vec<f64>,
    /// Ball radius [default: 1].
    #[arg(long)]
    radius: f64,
});

options!(PeriodicOpts {
    #[arg(long)]
    model: String,
    #[arg(long, value_parser = parse_json_arg)]
    params: Value,
    /// Period n [default: 1].
    #[arg(long)]
    period: usize,
    /// Newton seeds [default: 200].
    #[arg(long)]
    seeds: usize,
});

options!(AttractorOpts {
    #[arg(long)]
    model: String,
    #[arg(long, value_parser = parse_json_arg)]
    params: Value,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    initial: Vec<f64>,
    /// Box lower corner [default: model domain].
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    lo: Vec<f64>,
    /// Box upper corner [default: model domain].
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    hi: Vec<f64>,
    /// Cell side [default: longest box side / 50].
    #[arg(long)]
    h: f64,
    /// Image inflation [default: h / 2].
    #[arg(long)]
    eps: f64,
    /// Flow time or iterations per edge [default: 0.5 or 1].
    #[arg(long)]
    tau: f64,
    /// Flow time or iterations before the root sample [default: 50 or 1000].
    #[arg(long)]
    transient: f64,
    /// Also write every edge of the cell graph.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    edges: bool,
});

options!(ScanOpts {
    /// Scan spec JSON file (alternatively passed with --config).
    #[arg(long)]
    spec: PathBuf,
});

options!(KneadingOpts {
    /// Map as JSON: {"kind": "symmetric_slope", "slope": s},
    /// {"kind": "piecewise_linear", "left": [a, b], "right": [c, d]} or
    /// {"kind": "reduce", "model": ..., "params": {...}}.
    #[arg(long, value_parser = parse_json_arg)]
    map: Value,
    /// Shorthand for a symmetric map with this slope [default: 2].
    #[arg(long)]
    slope: f64,
    /// Second map to compare with, same forms as --map.
    #[arg(long, value_parser = parse_json_arg)]
    compare: Value,
    /// Shorthand for comparing with a symmetric map of this slope.
    #[arg(long)]
    compare_slope: f64,
    /// Sequence length [default: 64].
    #[arg(short, long)]
    n: usize,
    /// Markov partition depth for the entropy [default: 8].
    #[arg(long)]
    depth: usize,
});

#[derive(Debug, Clone, Args)]
pub struct ReplayOpts {
    /// Manifest written by an earlier run.
    pub manifest: PathBuf,
}

/// A resolved command: its name in manifests and its merged options.
#[derive(Debug, Clone, PartialEq)]
pub enum Job {
    Simulate(SimulateOpts),
    Verify(VerifyOpts),
    Lyapunov(LyapunovOpts),
    Dimension(DimensionOpts),
    Recurrence(RecurrenceOpts),
    Periodic(PeriodicOpts),
    Attractor(AttractorOpts),
    Scan(Value),
    Kneading(KneadingOpts),
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

/// `serde_json` error with the JSON path of the offending key.
pub fn from_value<T: DeserializeOwned>(what: &str, v: Value) -> CliResult<T> {
    serde_path_to_error::deserialize(v).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if path == "." {
            CliError::Usage(format!("{what}: {inner}"))
        } else {
            CliError::Usage(format!("{what}: `{path}`: {inner}"))
        }
    })
}

impl Job {
    pub fn name(&self) -> &'static str {
        match self {
            Job::Simulate(_) => "simulate",
            Job::Verify(_) => "verify",
            Job::Lyapunov(_) => "analyze lyapunov",
            Job::Dimension(_) => "analyze dimension",
            Job::Recurrence(_) => "analyze recurrence",
            Job::Periodic(_) => "analyze periodic",
            Job::Attractor(_) => "analyze attractor",
            Job::Scan(_) => "scan",
            Job::Kneading(_) => "kneading",
        }
    }

    pub fn config(&self) -> Value {
        match self {
            Job::Simulate(o) => to_value(o),
            Job::Verify(o) => to_value(o),
            Job::Lyapunov(o) => to_value(o),
            Job::Dimension(o) => to_value(o),
            Job::Recurrence(o) => to_value(o),
            Job::Periodic(o) => to_value(o),
            Job::Attractor(o) => to_value(o),
            Job::Scan(v) => v.clone(),
            Job::Kneading(o) => to_value(o),
        }
    }

    pub fn from_parts(name: &str, config: Value) -> CliResult<Job> {
        let what = "manifest config";
        Ok(match name {
            "simulate" => Job::Simulate(from_value(what, config)?),
            "verify" => Job::Verify(from_value(what, config)?),
            "analyze lyapunov" => Job::Lyapunov(from_value(what, config)?),
            "analyze dimension" => Job::Dimension(from_value(what, config)?),
            "analyze recurrence" => Job::Recurrence(from_value(what, config)?),
            "analyze periodic" => Job::Periodic(from_value(what, config)?),
            "analyze attractor" => Job::Attractor(from_value(what, config)?),
            "scan" => Job::Scan(config),
            "kneading" => Job::Kneading(from_value(what, config)?),
            other => return Err(CliError::Usage(format!("manifest names unknown command `{other}`"))),
        })
    }
}

/// Options from the configuration file overlaid with the flags that were
/// given. A top-level `seed` key is taken out and returned separately.
pub fn merge<T: Serialize + DeserializeOwned>(flags: &T, config: Option<Value>) -> CliResult<(T, Option<u64>)> {
    let mut base = match config {
        None => serde_json::Map::new(),
        Some(Value::Object(m)) => m,
        Some(_) => return Err(CliError::Usage("config: expected a JSON object".into())),
    };
    let seed = match base.remove("seed") {
        None => None,
        Some(v) => Some(from_value::<u64>("config: `seed`", v)?),
    };
    if let Value::Object(f) = to_value(flags) {
        base.extend(f);
    }
    Ok((from_value("config", Value::Object(base))?, seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn flags_override_config() {
        let flags = SimulateOpts {
            t: Some(5.0),
            ..Default::default()
        };
        let (o, seed) = merge(&flags, Some(json!({"model": "lorenz", "t": 1.0, "seed": 9}))).unwrap();
        assert_eq!(o.model.as_deref(), Some("lorenz"));
        assert_eq!(o.t, Some(5.0));
        assert_eq!(seed, Some(9));
    }

    #[test]
    fn unknown_and_mistyped_keys_are_named() {
        let e = merge(&SimulateOpts::default(), Some(json!({"modle": "lorenz"}))).unwrap_err();
        assert!(e.to_string().contains("modle"), "{e}");
        let e = merge(&SimulateOpts::default(), Some(json!({"t": "long"}))).unwrap_err();
        assert!(e.to_string().contains("`t`"), "{e}");
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn jobs_round_trip_through_manifest_form() {
        let j = Job::Periodic(PeriodicOpts {
            model: Some("doubling".into()),
            period: Some(4),
            ..Default::default()
        });
        assert_eq!(Job::from_parts(j.name(), j.config()).unwrap(), j);
    }
}
