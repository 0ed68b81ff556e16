use std::collections::BTreeMap;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use super::model::{State, SystemModel};

/// Provenance attached to every orbit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrbitMeta {
    pub model_id: String,
    pub params: BTreeMap<String, f64>,
    pub initial: Vec<f64>,
    /// Human-readable integrator or iteration settings.
    pub settings: String,
    pub seed: Option<u64>,
    /// Period of each coordinate (`None` for real coordinates).
    pub periods: Vec<Option<f64>>,
}

impl OrbitMeta {
    pub fn for_model(model: &SystemModel, initial: &[f64], settings: String) -> Self {
        OrbitMeta {
            model_id: model.id.clone(),
            params: model.params.clone(),
            initial: initial.to_vec(),
            settings,
            seed: None,
            periods: model.periods(),
        }
    }
}

/// Time-stamped sequence of states. Times are strictly increasing for flows;
/// for maps they are the consecutive iterate indices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Orbit {
    dim: usize,
    times: Vec<f64>,
    data: Vec<f64>,
    pub meta: OrbitMeta,
}

impl Orbit {
    pub fn new(dim: usize, meta: OrbitMeta) -> Self {
        Orbit {
            dim,
            times: Vec::new(),
            data: Vec::new(),
            meta,
        }
    }

    pub(crate) fn push(&mut self, t: f64, s: &[f64]) {
        debug_assert_eq!(s.len(), self.dim);
        debug_assert!(self.times.last().is_none_or(|&last| t > last));
        self.times.push(t);
        self.data.extend_from_slice(s);
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Keep only the first `len` samples.
    pub fn truncate(&mut self, len: usize) {
        self.times.truncate(len);
        self.data.truncate(len * self.dim);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn time(&self, i: usize) -> f64 {
        self.times[i]
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn last_state(&self) -> Option<State> {
        if self.is_empty() {
            None
        } else {
            Some(State::from(self.state(self.len() - 1)))
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, &[f64])> + '_ {
        self.times
            .iter()
            .copied()
            .zip(self.data.chunks_exact(self.dim))
    }

    /// Write `t,c0,...,c{n-1}` rows with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let header: Vec<String> = std::iter::once("t".to_string())
            .chain((0..self.dim).map(|i| format!("c{i}")))
            .collect();
        writeln!(w, "{}", header.join(","))?;
        let mut line = String::new();
        for (t, s) in self.iter() {
            line.clear();
            line.push_str(&fmt17(t));
            for v in s {
                line.push(',');
                line.push_str(&fmt17(*v));
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    /// Parse an orbit CSV written by [`Orbit::write_csv`]. Metadata is not
    /// stored in the CSV and comes back empty.
    pub fn read_csv(text: &str) -> Result<Orbit, String> {
        let mut lines = text.lines();
        let header = lines.next().ok_or("empty orbit CSV")?;
        let cols: Vec<&str> = header.split(',').collect();
        if cols.first() != Some(&"t") {
            return Err(format!("bad header `{header}`"));
        }
        let dim = cols.len() - 1;
        for (i, c) in cols[1..].iter().enumerate() {
            if *c != format!("c{i}") {
                return Err(format!("bad column `{c}`"));
            }
        }
        let meta = OrbitMeta {
            model_id: String::new(),
            params: BTreeMap::new(),
            initial: Vec::new(),
            settings: String::new(),
            seed: None,
            periods: vec![None; dim],
        };
        let mut orbit = Orbit::new(dim, meta);
        for (ln, line) in lines.enumerate() {
            let vals: Result<Vec<f64>, _> = line.split(',').map(str::parse::<f64>).collect();
            let vals = vals.map_err(|e| format!("line {}: {e}", ln + 2))?;
            if vals.len() != dim + 1 {
                return Err(format!("line {}: expected {} fields", ln + 2, dim + 1));
            }
            orbit.times.push(vals[0]);
            orbit.data.extend_from_slice(&vals[1..]);
        }
        Ok(orbit)
    }
}

/// Format with 17 significant digits (round-trips every f64).
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}
