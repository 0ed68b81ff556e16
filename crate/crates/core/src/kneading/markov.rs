use std::io::{self, Write};

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::{Deserialize, Serialize};

use super::map1d::{IntervalMap1D, Side};
use crate::error::{Error, Result};

const COVER_TOL: f64 = 1e-12;
/// Cells narrower than this are merged into a neighbour.
pub const MIN_CELL_WIDTH: f64 = 1e-12;
pub const POWER_TOL: f64 = 1e-12;
pub const POWER_MAX_ITER: usize = 100_000;

fn hull(a: f64, b: f64) -> [f64; 2] {
    [a.min(b), a.max(b)]
}

fn covers(img: [f64; 2], target: [f64; 2]) -> bool {
    img[0] <= target[0] + COVER_TOL && img[1] >= target[1] - COVER_TOL
}

/// Interval spanned by the one-sided limits `G(0±)`, clipped to `[−1, 1]`.
pub fn core_interval(g: &IntervalMap1D) -> [f64; 2] {
    let [a, b] = hull(g.left_limit, g.right_limit);
    [a.max(-1.0), b.min(1.0)]
}

/// True iff the right branch on `[0, b]` and the left branch on `[a, 0]`
/// each cover the core interval `[a, b]`, taking branch orientation into
/// account.
pub fn verify_two_full_branches(g: &IntervalMap1D) -> Result<bool> {
    if !g.is_discontinuous() {
        return Err(Error::Precondition(
            "map has no discontinuity at 0; full-branch test needs a Lorenz-type map".into(),
        ));
    }
    if !g.monotone[0] || !g.monotone[1] {
        return Err(Error::Precondition("branches must be monotone".into()));
    }
    let core = core_interval(g);
    if !(core[0] < 0.0 && core[1] > 0.0) {
        return Ok(false);
    }
    let right = hull(g.right_limit, g.branch(Side::Plus, core[1]));
    let left = hull(g.branch(Side::Minus, core[0]), g.left_limit);
    Ok(covers(right, core) && covers(left, core))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransitionMatrix {
    pub depth: usize,
    /// Cell boundaries in increasing order; cell `i` is `[b[i], b[i+1]]`.
    pub boundaries: Vec<f64>,
    pub matrix: Vec<Vec<u8>>,
    pub spectral_radius: f64,
    pub entropy: f64,
    /// Boundaries dropped because they produced cells narrower than
    /// [`MIN_CELL_WIDTH`].
    pub merged: Vec<f64>,
    pub converged: bool,
}

impl TransitionMatrix {
    pub fn cells(&self) -> usize {
        self.boundaries.len().saturating_sub(1)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        for row in &self.matrix {
            let line: Vec<String> = row.iter().map(u8::to_string).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }

    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({ "entropy": self.entropy, "depth": self.depth })
    }
}

/// Preimages of `t` in `(lo, hi)` under one monotone branch, by bisection.
fn branch_preimage(g: &IntervalMap1D, side: Side, t: f64, lo: f64, hi: f64) -> Option<f64> {
    let f = |y: f64| g.branch(side, y) - t;
    let (mut a, mut b) = (lo, hi);
    let (fa, fb) = (f(a), f(b));
    if fa == 0.0 || fb == 0.0 || fa.signum() == fb.signum() {
        return None;
    }
    let rising = fb > fa;
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if (f(m) < 0.0) == rising {
            a = m;
        } else {
            b = m;
        }
    }
    Some(0.5 * (a + b))
}

/// Partition of the core interval (or `[−1, 1]` when the core does not
/// straddle 0) by the points `y` with `Gʲ(y) = 0`, `0 ≤ j < k`. Entry
/// `(i, j)` is 1 iff the image of cell `i` covers cell `j`.
pub fn build_transition_matrix(g: &IntervalMap1D, k: usize) -> Result<TransitionMatrix> {
    if k == 0 {
        return Err(Error::param("k", "partition depth must be at least 1"));
    }
    if !g.monotone[0] || !g.monotone[1] {
        return Err(Error::Precondition("branches must be monotone".into()));
    }
    let core = core_interval(g);
    let [lo, hi] = if core[0] < 0.0 && core[1] > 0.0 { core } else { [-1.0, 1.0] };

    let mut points = vec![0.0];
    let mut level = vec![0.0];
    for _ in 1..k {
        let mut next = Vec::new();
        for &t in &level {
            next.extend(branch_preimage(g, Side::Minus, t, lo, 0.0));
            next.extend(branch_preimage(g, Side::Plus, t, 0.0, hi));
        }
        next.retain(|y| *y > lo && *y < hi && *y != 0.0);
        points.extend(&next);
        level = next;
    }
    points.push(lo);
    points.push(hi);
    points.sort_by(f64::total_cmp);
    points.dedup();

    let mut boundaries = vec![points[0]];
    let mut merged = Vec::new();
    for &p in &points[1..] {
        let last = *boundaries.last().expect("non-empty");
        if p - last < MIN_CELL_WIDTH {
            // keep 0 and the outer ends, drop the other point
            if p == 0.0 || p == hi {
                merged.push(last);
                *boundaries.last_mut().expect("non-empty") = p;
            } else {
                merged.push(p);
            }
        } else {
            boundaries.push(p);
        }
    }
    let n = boundaries.len() - 1;
    let image = |i: usize| -> [f64; 2] {
        let (a, b) = (boundaries[i], boundaries[i + 1]);
        let side = if b <= 0.0 { Side::Minus } else { Side::Plus };
        hull(g.branch(side, a), g.branch(side, b))
    };
    let matrix: Vec<Vec<u8>> = (0..n)
        .map(|i| {
            let img = image(i);
            (0..n)
                .map(|j| covers(img, [boundaries[j], boundaries[j + 1]]) as u8)
                .collect()
        })
        .collect();
    let (rho, converged) = spectral_radius(&matrix);
    Ok(TransitionMatrix {
        depth: k,
        boundaries,
        spectral_radius: rho,
        entropy: rho.max(1.0).ln(),
        matrix,
        merged,
        converged,
    })
}

/// Perron root of a 0/1 matrix: the largest root over its irreducible
/// blocks, each found by power iteration on `A + I`.
pub fn spectral_radius(a: &[Vec<u8>]) -> (f64, bool) {
    let n = a.len();
    let mut graph = DiGraph::<(), ()>::new();
    let nodes: Vec<_> = (0..n).map(|_| graph.add_node(())).collect();
    for i in 0..n {
        for j in 0..n {
            if a[i][j] != 0 {
                graph.add_edge(nodes[i], nodes[j], ());
            }
        }
    }
    let mut best = 0.0f64;
    let mut all_converged = true;
    for scc in tarjan_scc(&graph) {
        let idx: Vec<usize> = scc.iter().map(|v| v.index()).collect();
        if idx.len() == 1 && a[idx[0]][idx[0]] == 0 {
            continue;
        }
        let (r, ok) = block_power_iteration(a, &idx);
        all_converged &= ok;
        best = best.max(r);
    }
    (best, all_converged)
}

fn block_power_iteration(a: &[Vec<u8>], idx: &[usize]) -> (f64, bool) {
    let m = idx.len();
    let mut x = vec![1.0; m];
    let mut lambda = 0.0;
    for _ in 0..POWER_MAX_ITER {
        let y: Vec<f64> = (0..m)
            .map(|r| x[r] + (0..m).filter(|&c| a[idx[r]][idx[c]] != 0).map(|c| x[c]).sum::<f64>())
            .collect();
        let norm = y.iter().fold(0.0f64, |s, v| s.max(*v));
        let next = norm / x.iter().fold(0.0f64, |s, v| s.max(*v));
        x = y.iter().map(|v| v / norm).collect();
        if (next - lambda).abs() <= POWER_TOL * next {
            return (next - 1.0, true);
        }
        lambda = next;
    }
    (lambda - 1.0, false)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_shift_at_depth_one() {
        let g = IntervalMap1D::symmetric_slope(2.0).unwrap();
        assert!(verify_two_full_branches(&g).unwrap());
        let t = build_transition_matrix(&g, 1).unwrap();
        assert_eq!(t.matrix, vec![vec![1, 1], vec![1, 1]]);
        assert_eq!(t.spectral_radius, 2.0);
        assert_eq!(t.entropy, 2f64.ln());
        let mut csv = Vec::new();
        t.write_csv(&mut csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap(), "1,1\n1,1\n");
    }

    #[test]
    fn slow_branches_are_not_full() {
        let g = IntervalMap1D::piecewise_linear([1.2, 1.0], [1.2, -1.0]).unwrap();
        assert!(!verify_two_full_branches(&g).unwrap());
    }

    #[test]
    fn continuous_map_is_refused() {
        let g = IntervalMap1D::piecewise_linear([1.5, 0.0], [1.5, 0.0]).unwrap();
        assert!(matches!(verify_two_full_branches(&g), Err(Error::Precondition(_))));
    }

    #[test]
    fn missing_branch_lowers_entropy() {
        let g = IntervalMap1D::piecewise_linear([2.0, 1.0], [0.9, 0.1]).unwrap();
        let t = build_transition_matrix(&g, 1).unwrap();
        assert!(t.entropy < 2f64.ln());
        assert!(t.entropy >= 0.0);
    }

    #[test]
    fn golden_mean_shift() {
        let a = vec![vec![1, 1], vec![1, 0]];
        let (r, ok) = spectral_radius(&a);
        assert!(ok);
        assert!((r - (1.0 + 5f64.sqrt()) / 2.0).abs() < 1e-10);
    }

    #[test]
    fn depth_refines_partition() {
        let g = IntervalMap1D::symmetric_slope(2.0).unwrap();
        let t = build_transition_matrix(&g, 3).unwrap();
        assert_eq!(t.cells(), 8);
        assert!((t.entropy - 2f64.ln()).abs() < 1e-9);
    }
}
