//! Constructors for the concrete systems, and their JSON configuration.

mod geom_lorenz;
mod lorenz;
mod periodic;
mod saddle_node;
mod solid_torus;
mod torus;
mod wild;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub use geom_lorenz::{
    make_geometric_lorenz, make_pl_lorenz, Correction, CorrectionSpec, GeomLorenzConfig,
    GeomLorenzParams, PlLorenzParams,
};
pub use lorenz::{make_lorenz, LorenzParams};
pub use periodic::{PeriodicFn, PeriodicSpec};
pub use saddle_node::{make_saddle_node_flow, saddle_node_passage_time, SaddleNodeParams};
pub use solid_torus::{make_solid_torus_map, FiberFn, SolidTorusConfig, SolidTorusParams};
pub use torus::{
    make_circle_family, make_doubling_map, make_expanding_circle, make_torus_automorphism,
    make_torus_endomorphism, TorusPerturbation,
};
pub use wild::{make_wild_map, WildMapParams};

use crate::dynsys::SystemModel;
use crate::error::{Error, Result};

/// Names accepted in the `model` field of a configuration.
pub const MODEL_NAMES: &[&str] = &[
    "lorenz",
    "saddle_node",
    "torus_automorphism",
    "cat_map",
    "torus_endomorphism",
    "doubling",
    "expanding_circle",
    "circle_family",
    "solid_torus",
    "geometric_lorenz",
    "lorenz_pl",
    "wild",
];

/// `{"model": <name>, "params": {...}}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub model: String,
    #[serde(default = "empty_object")]
    pub params: Value,
}

fn empty_object() -> Value {
    Value::Object(Default::default())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MatrixParams {
    matrix: Vec<Vec<i64>>,
    #[serde(default)]
    perturbation: Option<Vec<PeriodicSpec>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Empty {}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ExpandingParams {
    m: i64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CircleParams {
    m: i64,
    #[serde(default)]
    g: PeriodicSpec,
    omega: f64,
}

fn parse<T: DeserializeOwned>(model: &str, v: &Value) -> Result<T> {
    T::deserialize(v).map_err(|e| Error::InvalidParam {
        name: format!("{model}.params"),
        reason: e.to_string(),
    })
}

impl ModelConfig {
    pub fn new(model: &str, params: Value) -> Self {
        ModelConfig {
            model: model.to_string(),
            params,
        }
    }

    pub fn parse_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidParam {
            name: "config".into(),
            reason: e.to_string(),
        })
    }

    pub fn build(&self) -> Result<SystemModel> {
        let name = self.model.as_str();
        let p = &self.params;
        match name {
            "lorenz" => make_lorenz(parse(name, p)?),
            "saddle_node" => make_saddle_node_flow(&parse(name, p)?),
            "torus_automorphism" => {
                let m: MatrixParams = parse(name, p)?;
                if m.perturbation.is_some() {
                    return Err(Error::param("torus_automorphism.params.perturbation", "not supported"));
                }
                make_torus_automorphism(&m.matrix)
            }
            "cat_map" => {
                parse::<Empty>(name, p)?;
                let mut m = make_torus_automorphism(&[vec![2, 1], vec![1, 1]])?;
                m.id = "cat_map".into();
                Ok(m)
            }
            "torus_endomorphism" => {
                let m: MatrixParams = parse(name, p)?;
                let g = m
                    .perturbation
                    .map(|v| v.into_iter().map(PeriodicFn::from).collect());
                make_torus_endomorphism(&m.matrix, g)
            }
            "doubling" => {
                parse::<Empty>(name, p)?;
                Ok(make_doubling_map())
            }
            "expanding_circle" => make_expanding_circle(parse::<ExpandingParams>(name, p)?.m),
            "circle_family" => {
                let c: CircleParams = parse(name, p)?;
                make_circle_family(c.m, c.g.into(), c.omega)
            }
            "solid_torus" => make_solid_torus_map(&parse::<SolidTorusConfig>(name, p)?.into()),
            "geometric_lorenz" => make_geometric_lorenz(&parse::<GeomLorenzConfig>(name, p)?.into()),
            "lorenz_pl" => make_pl_lorenz(&parse(name, p)?),
            "wild" => make_wild_map(&parse(name, p)?),
            other => Err(Error::InvalidParam {
                name: "model".into(),
                reason: format!(
                    "unknown model `{other}`; available models: {}",
                    MODEL_NAMES.join(", ")
                ),
            }),
        }
    }
}
