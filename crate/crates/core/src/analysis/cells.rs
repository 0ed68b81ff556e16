use std::collections::{HashMap, HashSet};
use std::io::{self, Write};

use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynsys::{fmt17, Coord, Rk4, SystemModel};
use crate::error::{Error, Result};

/// Largest RK4 step used to realise the time-`τ` flow map.
pub const FLOW_DT: f64 = 0.01;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellGraphSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    /// Cell side.
    pub h: f64,
    /// Inflation radius (sup norm) of every sample image.
    pub eps: f64,
    /// Number of map iterations (rounded, at least 1) or flow time.
    pub tau: f64,
    /// Lattice points per cell; rounded up to a full `kᵈ` corner lattice.
    pub samples_per_cell: usize,
    /// Upper bound on lattice points per axis reached by refinement. The
    /// lattice of a cell is refined (`k → 2k − 1`) while the images of two
    /// neighbouring lattice points are more than `2ε` apart.
    pub max_per_axis: usize,
    /// Largest number of cells the graph may visit.
    pub cap: usize,
}

impl CellGraphSpec {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, h: f64, eps: f64, tau: f64) -> Self {
        CellGraphSpec {
            lo,
            hi,
            h,
            eps,
            tau,
            samples_per_cell: 8,
            max_per_axis: 9,
            cap: 1_000_000,
        }
    }
}

/// Finite directed graph on the cells of a box. Only cells reachable from
/// the roots given to [`build_cell_graph`] are materialised.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CellGraph {
    pub spec: CellGraphSpec,
    /// Cells per axis.
    pub shape: Vec<usize>,
    /// Axes that wrap around (angular coordinates spanning a full period).
    pub wraps: Vec<bool>,
    /// Global (row-major) index of every visited cell, in visit order.
    pub cells: Vec<u64>,
    /// Successors of every visited cell as positions in `cells`, sorted.
    pub edges: Vec<Vec<usize>>,
    /// Some sample image of the cell, inflated by `eps`, left the box.
    pub leaks: Vec<bool>,
    #[serde(skip)]
    position: HashMap<u64, usize>,
}

fn lattice(k: usize, d: usize) -> Vec<Vec<f64>> {
    let ticks: Vec<f64> = if k == 1 {
        vec![0.5]
    } else {
        (0..k).map(|j| j as f64 / (k - 1) as f64).collect()
    };
    let mut out = vec![Vec::new()];
    for _ in 0..d {
        out = out
            .into_iter()
            .flat_map(|p| {
                ticks.iter().map(move |t| {
                    let mut q = p.clone();
                    q.push(*t);
                    q
                })
            })
            .collect();
    }
    out
}

impl CellGraph {
    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.iter().map(Vec::len).sum()
    }

    fn multi_index(&self, g: u64) -> Vec<usize> {
        let mut g = g;
        let mut idx = vec![0; self.dim()];
        for i in (0..self.dim()).rev() {
            idx[i] = (g % self.shape[i] as u64) as usize;
            g /= self.shape[i] as u64;
        }
        idx
    }

    fn global(&self, idx: &[usize]) -> u64 {
        idx.iter()
            .zip(&self.shape)
            .fold(0u64, |g, (i, n)| g * *n as u64 + *i as u64)
    }

    /// Global index of the cell containing `p`, if `p` lies in the box.
    pub fn locate(&self, p: &[f64]) -> Option<u64> {
        let mut idx = Vec::with_capacity(self.dim());
        for i in 0..self.dim() {
            let t = ((p[i] - self.spec.lo[i]) / self.spec.h).floor();
            if !(t >= 0.0 && t < self.shape[i] as f64) {
                return None;
            }
            idx.push(t as usize);
        }
        Some(self.global(&idx))
    }

    /// Position in [`CellGraph::cells`] of a visited cell.
    pub fn position(&self, global: u64) -> Option<usize> {
        self.position.get(&global).copied()
    }

    pub fn bounds(&self, global: u64) -> (Vec<f64>, Vec<f64>) {
        let idx = self.multi_index(global);
        let lo: Vec<f64> = idx
            .iter()
            .enumerate()
            .map(|(i, k)| self.spec.lo[i] + *k as f64 * self.spec.h)
            .collect();
        let hi = lo.iter().map(|v| v + self.spec.h).collect();
        (lo, hi)
    }

    pub fn center(&self, global: u64) -> Vec<f64> {
        let (lo, hi) = self.bounds(global);
        lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect()
    }

    /// Cells met by the sup-norm ball of radius `eps` around `q`; the flag
    /// reports whether the ball sticks out of the box.
    fn targets(&self, q: &[f64]) -> (Vec<u64>, bool) {
        let mut ranges = Vec::with_capacity(self.dim());
        let mut leak = false;
        for i in 0..self.dim() {
            if !q[i].is_finite() {
                return (Vec::new(), true);
            }
            let n = self.shape[i] as i64;
            let a = ((q[i] - self.spec.eps - self.spec.lo[i]) / self.spec.h).floor() as i64;
            let b = ((q[i] + self.spec.eps - self.spec.lo[i]) / self.spec.h).floor() as i64;
            let mut r: Vec<usize> = Vec::new();
            if self.wraps[i] {
                let b = b.min(a + n - 1);
                r.extend((a..=b).map(|k| k.rem_euclid(n) as usize));
            } else {
                if a < 0 || b >= n {
                    leak = true;
                }
                r.extend((a.max(0)..=b.min(n - 1)).map(|k| k as usize));
            }
            if r.is_empty() {
                return (Vec::new(), true);
            }
            ranges.push(r);
        }
        let mut out = vec![0u64];
        for (i, r) in ranges.iter().enumerate() {
            out = out
                .into_iter()
                .flat_map(|g| r.iter().map(move |k| g * self.shape[i] as u64 + *k as u64))
                .collect();
        }
        (out, leak)
    }
}

/// Largest sup-norm distance between images of lattice neighbours.
fn spread(model: &SystemModel, images: &[Vec<f64>], k: usize, d: usize) -> f64 {
    let mut worst = 0.0f64;
    for (i, a) in images.iter().enumerate() {
        let mut stride = 1;
        for _ in 0..d {
            if (i / stride) % k + 1 < k {
                let b = &images[i + stride];
                let gap = model
                    .difference(a, b)
                    .iter()
                    .fold(0.0f64, |m, v| if v.is_finite() { m.max(v.abs()) } else { f64::INFINITY });
                worst = worst.max(gap);
            }
            stride *= k;
        }
    }
    worst
}

fn time_tau(model: &SystemModel, p: &[f64], tau: f64, rk: &mut Rk4) -> Vec<f64> {
    let mut s = p.to_vec();
    if model.is_map() {
        let n = tau.round().max(1.0) as usize;
        for _ in 0..n {
            let mut out = model.eval(&s);
            model.reduce(&mut out);
            s = out;
            if s.iter().any(|v| !v.is_finite()) {
                break;
            }
        }
    } else {
        let steps = (tau / FLOW_DT).ceil().max(1.0) as usize;
        let dt = tau / steps as f64;
        let f = |x: &[f64], o: &mut [f64]| model.apply(x, o);
        for _ in 0..steps {
            rk.step(&f, &mut s, dt);
        }
        model.reduce(&mut s);
    }
    s
}

/// Cell graph of `model` on a box: `i → j` iff the time-`τ` image of some
/// lattice sample of cell `i` lies within `ε` (sup norm) of cell `j`.
///
/// Exploration is breadth-first from the cells containing `roots`; with no
/// roots every cell of the box is a root. Fails with
/// [`Error::ResolutionTooFine`] when more than `spec.cap` cells would be
/// visited.
pub fn build_cell_graph(model: &SystemModel, spec: &CellGraphSpec, roots: &[Vec<f64>]) -> Result<CellGraph> {
    let d = model.dim();
    if spec.lo.len() != d || spec.hi.len() != d {
        return Err(Error::Dimension {
            expected: d,
            got: spec.lo.len().max(spec.hi.len()),
        });
    }
    for (name, v) in [("h", spec.h), ("eps", spec.eps), ("tau", spec.tau)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::param(name, "must be positive and finite"));
        }
    }
    if spec.samples_per_cell == 0 {
        return Err(Error::param("samples_per_cell", "must be positive"));
    }
    let mut shape = Vec::with_capacity(d);
    for i in 0..d {
        let w = spec.hi[i] - spec.lo[i];
        if !(w > 0.0 && w.is_finite()) {
            return Err(Error::param("box", "must be bounded with hi > lo"));
        }
        shape.push(((w / spec.h) - 1e-9).ceil().max(1.0) as usize);
    }
    let total = shape.iter().fold(1f64, |a, n| a * *n as f64);
    if total > u64::MAX as f64 / 2.0 {
        return Err(Error::ResolutionTooFine {
            count: usize::MAX,
            cap: spec.cap,
        });
    }
    let wraps = (0..d)
        .map(|i| match model.coords[i] {
            Coord::Angle { period } => {
                spec.lo[i] == 0.0 && (shape[i] as f64 * spec.h - period).abs() < 1e-9 * period
            }
            Coord::Real { .. } => false,
        })
        .collect();
    let mut g = CellGraph {
        spec: spec.clone(),
        shape,
        wraps,
        cells: Vec::new(),
        edges: Vec::new(),
        leaks: Vec::new(),
        position: HashMap::new(),
    };
    let mut frontier: Vec<u64> = if roots.is_empty() {
        if total > spec.cap as f64 {
            return Err(Error::ResolutionTooFine {
                count: total as usize,
                cap: spec.cap,
            });
        }
        (0..total as u64).collect()
    } else {
        let mut f: Vec<u64> = roots.iter().filter_map(|r| g.locate(r)).collect();
        f.sort_unstable();
        f.dedup();
        if f.is_empty() {
            return Err(Error::Precondition("no root lies in the box".into()));
        }
        f
    };
    let k0 = (1..)
        .find(|k: &usize| k.pow(d as u32) >= spec.samples_per_cell)
        .unwrap_or(1);
    let mut lattices = vec![(k0, lattice(k0, d))];
    let mut k = k0;
    while k >= 2 && 2 * k - 1 <= spec.max_per_axis {
        k = 2 * k - 1;
        lattices.push((k, lattice(k, d)));
    }
    for c in &frontier {
        g.position.insert(*c, g.cells.len());
        g.cells.push(*c);
    }
    g.edges.resize(g.cells.len(), Vec::new());
    g.leaks.resize(g.cells.len(), false);
    while !frontier.is_empty() {
        let results: Vec<(u64, Vec<u64>, bool)> = frontier
            .par_iter()
            .map_init(
                || Rk4::new(d),
                |rk, &c| {
                    let (lo, _) = g.bounds(c);
                    let mut images = Vec::new();
                    for (level, (k, unit)) in lattices.iter().enumerate() {
                        images = unit
                            .iter()
                            .map(|u| {
                                let p: Vec<f64> = lo.iter().zip(u).map(|(a, t)| a + t * spec.h).collect();
                                time_tau(model, &p, spec.tau, rk)
                            })
                            .collect();
                        if level + 1 == lattices.len() || spread(model, &images, *k, d) <= 2.0 * spec.eps {
                            break;
                        }
                    }
                    let mut out = HashSet::new();
                    let mut leak = false;
                    for q in &images {
                        let (t, l) = g.targets(q);
                        leak |= l;
                        out.extend(t);
                    }
                    let mut out: Vec<u64> = out.into_iter().collect();
                    out.sort_unstable();
                    (c, out, leak)
                },
            )
            .collect();
        let mut next = Vec::new();
        for (c, targets, leak) in results {
            for t in &targets {
                if !g.position.contains_key(t) {
                    if g.cells.len() >= spec.cap {
                        return Err(Error::ResolutionTooFine {
                            count: g.cells.len() + 1,
                            cap: spec.cap,
                        });
                    }
                    g.position.insert(*t, g.cells.len());
                    g.cells.push(*t);
                    g.edges.push(Vec::new());
                    g.leaks.push(false);
                    next.push(*t);
                }
            }
            let i = g.position[&c];
            let mut e: Vec<usize> = targets.iter().map(|t| g.position[t]).collect();
            e.sort_unstable();
            g.edges[i] = e;
            g.leaks[i] = leak;
        }
        frontier = next;
    }
    Ok(g)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainAttractor {
    /// Global cell indices, increasing.
    pub cells: Vec<u64>,
    /// Number of terminal components found.
    pub components: usize,
    /// Some attractor cell lies on the outer layer of the box or leaks out of
    /// it; the box is probably too small.
    pub touches_boundary: bool,
}

/// Union of the terminal strongly connected components reachable from
/// `seed` (a global cell index). Components without a cycle are ignored.
pub fn chain_attractor(graph: &CellGraph, seed: u64) -> Result<ChainAttractor> {
    let start = graph
        .position(seed)
        .ok_or_else(|| Error::Precondition(format!("cell {seed} is not in the graph")))?;
    let mut reach = vec![false; graph.len()];
    let mut stack = vec![start];
    reach[start] = true;
    while let Some(i) = stack.pop() {
        for &j in &graph.edges[i] {
            if !reach[j] {
                reach[j] = true;
                stack.push(j);
            }
        }
    }
    let mut dg: DiGraph<usize, ()> = DiGraph::new();
    let mut node = vec![NodeIndex::end(); graph.len()];
    for i in (0..graph.len()).filter(|i| reach[*i]) {
        node[i] = dg.add_node(i);
    }
    for i in (0..graph.len()).filter(|i| reach[*i]) {
        for &j in &graph.edges[i] {
            dg.add_edge(node[i], node[j], ());
        }
    }
    let sccs = tarjan_scc(&dg);
    let mut comp = vec![usize::MAX; graph.len()];
    for (c, members) in sccs.iter().enumerate() {
        for n in members {
            comp[dg[*n]] = c;
        }
    }
    let mut cells = Vec::new();
    let mut components = 0;
    let mut touches = false;
    for (c, members) in sccs.iter().enumerate() {
        let idx: Vec<usize> = members.iter().map(|n| dg[*n]).collect();
        let terminal = idx.iter().all(|i| graph.edges[*i].iter().all(|j| comp[*j] == c));
        let cyclic = idx.len() > 1 || graph.edges[idx[0]].contains(&idx[0]);
        if !terminal {
            continue;
        }
        if !cyclic {
            touches = true;
            continue;
        }
        components += 1;
        for i in idx {
            touches |= graph.leaks[i] || on_boundary(graph, graph.cells[i]);
            cells.push(graph.cells[i]);
        }
    }
    if cells.is_empty() {
        return Err(Error::Precondition(
            "no recurrent terminal component is reachable from the seed".into(),
        ));
    }
    cells.sort_unstable();
    Ok(ChainAttractor {
        cells,
        components,
        touches_boundary: touches,
    })
}

fn on_boundary(graph: &CellGraph, global: u64) -> bool {
    graph
        .multi_index(global)
        .iter()
        .enumerate()
        .any(|(i, k)| !graph.wraps[i] && (*k == 0 || *k + 1 == graph.shape[i]))
}

impl CellGraph {
    /// `src,dst` rows of global cell indices.
    pub fn write_edges_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "src,dst")?;
        for (i, e) in self.edges.iter().enumerate() {
            for j in e {
                writeln!(w, "{},{}", self.cells[i], self.cells[*j])?;
            }
        }
        Ok(())
    }

    /// `cell_index,x0_lo,…,x0_hi,…` rows of the given cells.
    pub fn write_cells_csv<W: Write>(&self, cells: &[u64], mut w: W) -> io::Result<()> {
        let d = self.dim();
        let head: Vec<String> = (0..d)
            .map(|i| format!("x{i}_lo"))
            .chain((0..d).map(|i| format!("x{i}_hi")))
            .collect();
        writeln!(w, "cell_index,{}", head.join(","))?;
        for c in cells {
            let (lo, hi) = self.bounds(*c);
            let row: Vec<String> = lo.iter().chain(&hi).map(|v| fmt17(*v)).collect();
            writeln!(w, "{c},{}", row.join(","))?;
        }
        Ok(())
    }
}
