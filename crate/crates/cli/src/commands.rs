//! Execution of resolved jobs. Each job returns its output files in memory;
//! nothing here touches the filesystem except reading inputs.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;

use hyperlab::analysis::{
    box_counting_dimension, build_cell_graph, chain_attractor, find_periodic_points, lyapunov_spectrum,
    recurrence_times, seed_grid, CellGraphSpec, LyapunovSettings, ScaleRange, Stability,
};
use hyperlab::dynsys::{
    fmt17, integrate_flow, iterate_map_with, MapSettings, Span, StepSettings, TangentSettings,
};
use hyperlab::kneading::{
    build_transition_matrix, compare_kneading, reduce_to_1d, verify_two_full_branches, IntervalMap1D,
    KneadingInvariant,
};
use hyperlab::scan::{run_scan, Family, ScanSpec, Tag};
use hyperlab::verify::{
    check_anosov_matrix, check_expansion, check_lorenz_conditions, check_pseudohyperbolic, compute_q,
    ConditionReport, QVariant, SampleGrid,
};
use hyperlab::zoo::{ModelConfig, MODEL_NAMES};
use hyperlab::{Coord, Orbit, SystemModel};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::error::{CliError, CliResult};
use crate::opts::*;
use crate::svg::{self, Frame};

/// Files produced by a job, a human-readable summary and the verdict.
pub struct Outcome {
    pub files: Vec<(String, Vec<u8>)>,
    pub summary: String,
    pub ok: bool,
}

impl Outcome {
    fn new(summary: String) -> Self {
        Outcome {
            files: Vec::new(),
            summary,
            ok: true,
        }
    }

    fn file(mut self, name: &str, data: impl Into<Vec<u8>>) -> Self {
        self.files.push((name.to_string(), data.into()));
        self
    }

    fn json<T: serde::Serialize>(self, name: &str, v: &T) -> CliResult<Self> {
        let mut data = serde_json::to_vec_pretty(v).map_err(|e| CliError::Failed(e.to_string()))?;
        data.push(b'\n');
        Ok(self.file(name, data))
    }
}

pub fn run(job: &Job, seed: u64) -> CliResult<Outcome> {
    match job {
        Job::Simulate(o) => simulate(o, seed),
        Job::Verify(o) => verify(o),
        Job::Lyapunov(o) => lyapunov(o, seed),
        Job::Dimension(o) => dimension(o, seed),
        Job::Recurrence(o) => recurrence(o, seed),
        Job::Periodic(o) => periodic(o, seed),
        Job::Attractor(o) => attractor(o, seed),
        Job::Scan(spec) => scan(spec),
        Job::Kneading(o) => kneading(o),
    }
}

fn build_model(name: &Option<String>, params: &Option<Value>) -> CliResult<SystemModel> {
    let name = name.as_deref().ok_or_else(|| {
        CliError::Usage(format!("missing `model`; available models: {}", MODEL_NAMES.join(", ")))
    })?;
    let params = params.clone().unwrap_or_else(|| json!({}));
    Ok(ModelConfig::new(name, params).build()?)
}

fn initial_state(m: &SystemModel, given: &Option<Vec<f64>>, seed: u64) -> CliResult<Vec<f64>> {
    match given {
        Some(v) => {
            if v.len() != m.dim() {
                return Err(CliError::Usage(format!(
                    "`initial` has {} coordinates; model `{}` needs {}",
                    v.len(),
                    m.id,
                    m.dim()
                )));
            }
            if let Some((c, x)) = m.domain_violation(v) {
                return Err(CliError::Usage(format!("`initial`: coordinate {c} = {x} lies outside the domain")));
            }
            Ok(v.clone())
        }
        None => Ok(seed_grid(m, 1, seed).remove(0)),
    }
}

fn span(m: &SystemModel, t: Option<f64>, steps: Option<usize>, default_t: f64, default_steps: usize) -> CliResult<Span> {
    if m.is_flow() {
        if steps.is_some() {
            return Err(CliError::Usage("`steps` applies to maps; use `t` for flows".into()));
        }
        let t = t.unwrap_or(default_t);
        if !(t > 0.0 && t.is_finite()) {
            return Err(CliError::Usage("`t` must be positive and finite".into()));
        }
        Ok(Span::Time(t))
    } else {
        if t.is_some() {
            return Err(CliError::Usage("`t` applies to flows; use `steps` for maps".into()));
        }
        Ok(Span::Steps(steps.unwrap_or(default_steps)))
    }
}

fn orbit(m: &SystemModel, s0: &[f64], span: Span, dt: f64, record_every: usize) -> CliResult<Orbit> {
    Ok(match span {
        Span::Time(t) => integrate_flow(
            m,
            s0,
            t,
            &StepSettings {
                dt,
                record_every,
                ..Default::default()
            },
        )?,
        Span::Steps(n) => iterate_map_with(
            m,
            s0,
            n,
            &MapSettings {
                record_every,
                ..Default::default()
            },
        )?,
    })
}

/// Transient length as a span: flow time, or a whole number of iterations.
fn transient_span(m: &SystemModel, v: Option<f64>, flow: f64, map: usize) -> CliResult<Span> {
    if m.is_flow() {
        let t = v.unwrap_or(flow);
        if !(t >= 0.0 && t.is_finite()) {
            return Err(CliError::Usage("`transient` must be non-negative".into()));
        }
        Ok(Span::Time(t))
    } else {
        let n = v.unwrap_or(map as f64);
        if !(n >= 0.0 && n.fract() == 0.0 && n < 1e15) {
            return Err(CliError::Usage("`transient` must be a whole number of iterations for maps".into()));
        }
        Ok(Span::Steps(n as usize))
    }
}

/// State reached after the transient.
fn settle(m: &SystemModel, s0: Vec<f64>, transient: Span, dt: f64) -> CliResult<Vec<f64>> {
    match transient {
        Span::Time(0.0) | Span::Steps(0) => Ok(s0),
        // only the final state is needed; it is always recorded
        span => Ok(orbit(m, &s0, span, dt, usize::MAX)?
            .last_state()
            .map(|s| s.0)
            .unwrap_or(s0)),
    }
}

/// Orbit after an optional transient, shared by simulate, dimension and
/// recurrence.
struct OrbitArgs<'a> {
    initial: &'a Option<Vec<f64>>,
    t: Option<f64>,
    steps: Option<usize>,
    dt: Option<f64>,
    transient: Option<f64>,
}

fn settled_orbit(m: &SystemModel, a: OrbitArgs, seed: u64, defaults: (f64, usize)) -> CliResult<Orbit> {
    let dt = a.dt.unwrap_or(0.01);
    let s0 = initial_state(m, a.initial, seed)?;
    let s = settle(m, s0, transient_span(m, a.transient, 20.0, 1000)?, dt)?;
    let span = span(m, a.t, a.steps, defaults.0, defaults.1)?;
    orbit(m, &s, span, dt, 1)
}

fn projection_axes(dim: usize) -> (usize, usize) {
    match dim {
        1 => (0, 0),
        2 => (0, 1),
        d => (0, d - 1),
    }
}

fn orbit_svg(o: &Orbit, title: &str, join: bool) -> String {
    let (a, b) = projection_axes(o.dim());
    let pts: Vec<(f64, f64)> = if o.dim() == 1 {
        o.iter().map(|(t, s)| (t, s[0])).collect()
    } else {
        o.iter().map(|(_, s)| (s[a], s[b])).collect()
    };
    let mut f = Frame::fit(pts.iter().copied());
    if join {
        f.polyline(&pts, 0);
    } else {
        f.markers(&pts, 0);
    }
    let (xl, yl) = if o.dim() == 1 {
        ("t".to_string(), "c0".to_string())
    } else {
        (format!("c{a}"), format!("c{b}"))
    };
    f.finish(title, &xl, &yl)
}

fn simulate(o: &SimulateOpts, seed: u64) -> CliResult<Outcome> {
    let m = build_model(&o.model, &o.params)?;
    let s0 = initial_state(&m, &o.initial, seed)?;
    let span = span(&m, o.t, o.steps, 100.0, 10_000)?;
    let orb = orbit(&m, &s0, span, o.dt.unwrap_or(0.01), o.record_every.unwrap_or(1))?;
    let mut csv = Vec::new();
    orb.write_csv(&mut csv).map_err(CliError::io("formatting orbit"))?;
    let last = orb.time(orb.len() - 1);
    let summary = format!("simulate {}: {} samples, final time {}", m.id, orb.len(), last);
    let svg = orbit_svg(&orb, &format!("{} orbit", m.id), m.is_flow());
    Ok(Outcome::new(summary).file("orbit.csv", csv).file("orbit.svg", svg))
}

fn condition_lines(r: &ConditionReport) -> String {
    let mut s = String::new();
    for c in &r.conditions {
        let _ = write!(
            s,
            "{:<8} {:<5} value {} threshold {}",
            c.id,
            if c.holds { "pass" } else { "FAIL" },
            fmt17(c.witness_value),
            fmt17(c.threshold)
        );
        if !c.holds && !c.witness_point.is_empty() {
            let p: Vec<String> = c.witness_point.iter().map(|v| fmt17(*v)).collect();
            let _ = write!(s, " witness [{}]", p.join(", "));
        }
        if let Some(n) = &c.note {
            let _ = write!(s, " ({n})");
        }
        s.push('\n');
    }
    s
}

fn verify(o: &VerifyOpts) -> CliResult<Outcome> {
    let d = SampleGrid::default();
    let grid = SampleGrid {
        n: o.grid.unwrap_or(d.n),
        n_aux: o.grid_aux.unwrap_or(d.n_aux),
        delta: o.delta.unwrap_or(d.delta),
        ..d
    };
    if grid.n == 0 || grid.n_aux == 0 || grid.delta.is_nan() || grid.delta <= 0.0 {
        return Err(CliError::Usage("`grid`, `grid_aux` and `delta` must be positive".into()));
    }
    let matrix_of = |v: &Value, what: &str| from_value::<Vec<Vec<f64>>>(what, v.clone());
    let model = match (&o.model, &o.matrix) {
        (Some(_), Some(_)) => return Err(CliError::Usage("give either `model` or `matrix`, not both".into())),
        (None, Some(_)) => None,
        _ => Some(build_model(&o.model, &o.params)?),
    };
    let auto = match model.as_ref().map(|m| m.id.as_str()) {
        None | Some("cat_map") => "anosov",
        Some(id) if id.starts_with("torus_automorphism") => "anosov",
        Some("wild") => "pseudo",
        _ => match o.model.as_deref() {
            Some("torus_automorphism") => "anosov",
            Some("geometric_lorenz" | "lorenz_pl") => "lorenz",
            Some("wild") => "pseudo",
            Some("doubling" | "expanding_circle" | "torus_endomorphism" | "circle_family") => "expansion",
            _ => "",
        },
    };
    let check = o.check.as_deref().unwrap_or(auto);
    let mut extra = serde_json::Map::new();
    let report = match check {
        "anosov" => {
            let a = match (&o.matrix, o.model.as_deref()) {
                (Some(v), _) => matrix_of(v, "`matrix`")?,
                (None, Some("cat_map")) => vec![vec![2.0, 1.0], vec![1.0, 1.0]],
                (None, Some("torus_automorphism")) => {
                    let p = o.params.clone().unwrap_or_else(|| json!({}));
                    matrix_of(&p["matrix"], "`params.matrix`")?
                }
                _ => return Err(CliError::Usage("the anosov check needs `matrix` or a torus automorphism".into())),
            };
            check_anosov_matrix(&a)?
        }
        "expansion" => check_expansion(need(&model)?, &grid)?,
        "lorenz" => {
            let r = check_lorenz_conditions(need(&model)?, &grid)?;
            for (key, v) in [("q_squared", QVariant::Squared), ("q_printed", QVariant::Printed)] {
                let q = compute_q(&r, v);
                extra.insert(key.into(), q.as_ref().map_or(Value::Null, |q| json!(q)));
                if let Err(e) = q {
                    extra.insert(format!("{key}_note"), json!(e.to_string()));
                }
            }
            r
        }
        "pseudo" => {
            let m = need(&model)?;
            let beta = match (o.beta, m.param("rho"), m.param("eta")) {
                (Some(b), _, _) => b,
                (None, Some(r), Some(e)) => 0.5 * (r + e),
                _ => return Err(CliError::Usage("`beta` is required for this model".into())),
            };
            extra.insert("beta".into(), json!(beta));
            check_pseudohyperbolic(m, &grid, beta)?
        }
        "" => {
            return Err(CliError::Usage(format!(
                "no verification is defined for model `{}`; pass `check`",
                o.model.as_deref().unwrap_or("")
            )))
        }
        other => {
            return Err(CliError::Usage(format!(
                "unknown `check` `{other}`; expected anosov, expansion, lorenz or pseudo"
            )))
        }
    };
    let mut summary = format!("verify {} ({check}):\n", report.model_id);
    summary.push_str(&condition_lines(&report));
    for (k, v) in &extra {
        let _ = writeln!(summary, "{k}: {v}");
    }
    let ok = report.all_hold();
    summary.push_str(if ok { "all conditions hold" } else { "some conditions fail" });
    let doc = json!({"check": check, "report": report, "extra": extra});
    let mut out = Outcome::new(summary).json("report.json", &doc)?;
    out.ok = ok;
    Ok(out)
}

fn need(m: &Option<SystemModel>) -> CliResult<&SystemModel> {
    m.as_ref().ok_or_else(|| CliError::Usage("this check needs `model`".into()))
}

fn lyapunov(o: &LyapunovOpts, seed: u64) -> CliResult<Outcome> {
    let m = build_model(&o.model, &o.params)?;
    let s0 = initial_state(&m, &o.initial, seed)?;
    let duration = span(&m, o.t, o.steps, 1000.0, 100_000)?;
    let mut tangent = TangentSettings::default();
    tangent.step.dt = o.dt.unwrap_or(tangent.step.dt);
    tangent.renorm_every = o.renorm_every.unwrap_or(tangent.renorm_every);
    let settings = LyapunovSettings {
        tangent,
        transient: Some(transient_span(&m, o.transient, 20.0, 1000)?),
        seed: Some(seed),
        ..Default::default()
    };
    let k = o.k.unwrap_or(m.dim());
    let r = lyapunov_spectrum(&m, &s0, duration, k, &settings)?;
    let sum: f64 = r.exponents.iter().sum();
    let list: Vec<String> = r.exponents.iter().map(|v| format!("{v:.6}")).collect();
    let summary = format!(
        "lyapunov {}: exponents [{}], sum {:.6}, drift {:.2e}{}",
        m.id,
        list.join(", "),
        sum,
        r.drift,
        if r.converged { "" } else { " (not converged)" }
    );
    let mut f = Frame::fit(r.history.iter().flat_map(|h| h.exponents.iter().map(move |e| (h.t, *e))));
    let mut labels = Vec::new();
    for i in 0..k {
        let pts: Vec<(f64, f64)> = r.history.iter().map(|h| (h.t, h.exponents[i])).collect();
        f.polyline(&pts, i);
        labels.push(format!("λ{}", i + 1));
    }
    f.legend(&labels);
    let svg = f.finish(&format!("{} Lyapunov estimates", m.id), "t", "exponent");
    Ok(Outcome::new(summary).json("lyapunov.json", &r)?.file("lyapunov.svg", svg))
}

fn dimension(o: &DimensionOpts, seed: u64) -> CliResult<Outcome> {
    let (points, source) = match (&o.input, &o.model) {
        (Some(_), Some(_)) => return Err(CliError::Usage("give either `input` or `model`, not both".into())),
        (Some(path), None) => {
            let text = fs::read_to_string(path).map_err(CliError::io(format!("reading {}", path.display())))?;
            let orb = Orbit::read_csv(&text).map_err(|e| CliError::Usage(format!("`input`: {e}")))?;
            (orb, path.display().to_string())
        }
        (None, _) => {
            let m = build_model(&o.model, &o.params)?;
            let args = OrbitArgs {
                initial: &o.initial,
                t: o.t,
                steps: o.steps,
                dt: o.dt,
                transient: o.transient,
            };
            (settled_orbit(&m, args, seed, (1000.0, 100_000))?, m.id.clone())
        }
    };
    let pts: Vec<Vec<f64>> = points.iter().map(|(_, s)| s.to_vec()).collect();
    let d = ScaleRange::default();
    let scales = ScaleRange::dyadic(o.scale_lo.unwrap_or(d.lo), o.scale_hi.unwrap_or(d.hi));
    let r = box_counting_dimension(&pts, scales)?;
    let summary = format!(
        "dimension {source}: {:.4} from {} points, r² {:.5}{}",
        r.dimension,
        r.points,
        r.r_squared,
        if r.degenerate { " (degenerate fit)" } else { "" }
    );
    let mut f = Frame::fit(
        r.sides
            .iter()
            .zip(&r.counts)
            .map(|(s, c)| ((1.0 / s).ln(), (*c as f64).ln())),
    );
    let pts: Vec<(f64, f64)> = r.sides.iter().zip(&r.counts).map(|(s, c)| ((1.0 / s).ln(), (*c as f64).ln())).collect();
    f.polyline(&pts, 0);
    f.markers(&pts, 1);
    let svg = f.finish(&format!("box counting, slope {:.4}", r.dimension), "ln(1/h)", "ln N(h)");
    Ok(Outcome::new(summary).json("dimension.json", &r)?.file("dimension.svg", svg))
}

fn recurrence(o: &RecurrenceOpts, seed: u64) -> CliResult<Outcome> {
    let m = build_model(&o.model, &o.params)?;
    let args = OrbitArgs {
        initial: &o.initial,
        t: o.t,
        steps: o.steps,
        dt: o.dt,
        transient: o.transient,
    };
    let orb = settled_orbit(&m, args, seed, (1000.0, 100_000))?;
    let center = o.center.clone().unwrap_or_else(|| orb.state(0).to_vec());
    let radius = o.radius.unwrap_or(1.0);
    let r = recurrence_times(&orb, &center, radius)?;
    let summary = format!(
        "recurrence {}: {} entries into the ball of radius {radius}, max gap {}",
        m.id,
        r.entries.len(),
        r.max_gap
    );
    let doc = json!({"model": m.id, "center": center, "radius": radius, "result": r});
    Outcome::new(summary).json("recurrence.json", &doc)
}

fn periodic(o: &PeriodicOpts, seed: u64) -> CliResult<Outcome> {
    let m = build_model(&o.model, &o.params)?;
    let n = o.period.unwrap_or(1);
    let seeds = seed_grid(&m, o.seeds.unwrap_or(200), seed);
    let recs = find_periodic_points(&m, n, &seeds)?;
    let count = |s: Stability| recs.iter().filter(|r| r.stability == s).count();
    let summary = format!(
        "periodic {}: {} points of period {n} ({} attracting, {} saddle, {} repelling)",
        m.id,
        recs.len(),
        count(Stability::Attracting),
        count(Stability::Saddle),
        count(Stability::Repelling)
    );
    Outcome::new(summary).json("periodic.json", &recs)
}

fn default_box(m: &SystemModel) -> CliResult<(Vec<f64>, Vec<f64>)> {
    if m.id == "lorenz" {
        return Ok((vec![-25.0, -25.0, 0.0], vec![25.0, 25.0, 50.0]));
    }
    let mut lo = Vec::new();
    let mut hi = Vec::new();
    for c in &m.coords {
        match *c {
            Coord::Real { lo: a, hi: b } if a.is_finite() && b.is_finite() => {
                lo.push(a);
                hi.push(b);
            }
            Coord::Angle { period } => {
                lo.push(0.0);
                hi.push(period);
            }
            _ => return Err(CliError::Usage("`lo` and `hi` are required for unbounded coordinates".into())),
        }
    }
    Ok((lo, hi))
}

fn attractor(o: &AttractorOpts, seed: u64) -> CliResult<Outcome> {
    let m = build_model(&o.model, &o.params)?;
    let (lo, hi) = match (&o.lo, &o.hi) {
        (Some(a), Some(b)) => (a.clone(), b.clone()),
        (None, None) => default_box(&m)?,
        _ => return Err(CliError::Usage("give both `lo` and `hi`".into())),
    };
    let side = lo.iter().zip(&hi).map(|(a, b)| b - a).fold(0.0, f64::max);
    let h = o.h.unwrap_or(side / 50.0);
    let eps = o.eps.unwrap_or(h / 2.0);
    let tau = o.tau.unwrap_or(if m.is_flow() { 0.5 } else { 1.0 });
    let s0 = initial_state(&m, &o.initial, seed)?;
    let root = settle(&m, s0, transient_span(&m, o.transient, 50.0, 1000)?, 0.01)?;
    let spec = CellGraphSpec::new(lo, hi, h, eps, tau);
    let g = build_cell_graph(&m, &spec, std::slice::from_ref(&root))?;
    let cell = g.locate(&root).ok_or_else(|| {
        CliError::Failed(format!("root sample {root:?} lies outside the box; adjust `lo`/`hi`"))
    })?;
    let a = chain_attractor(&g, cell)?;
    let mut cells_csv = Vec::new();
    g.write_cells_csv(&a.cells, &mut cells_csv).map_err(CliError::io("formatting cells"))?;
    let summary = format!(
        "attractor {}: {} cells (graph {} cells, {} edges), {} component(s){}",
        m.id,
        a.cells.len(),
        g.len(),
        g.edge_count(),
        a.components,
        if a.touches_boundary { ", touches the box boundary" } else { "" }
    );
    let doc = json!({
        "model": m.id,
        "spec": g.spec,
        "root": root,
        "cells": a.cells.len(),
        "components": a.components,
        "touches_boundary": a.touches_boundary,
        "graph_cells": g.len(),
        "graph_edges": g.edge_count(),
    });
    let (ax, ay) = projection_axes(g.dim());
    let mut rects = BTreeSet::new();
    for c in &a.cells {
        let (l, u) = g.bounds(*c);
        let y = if g.dim() == 1 { [0.0, 1.0] } else { [l[ay], u[ay]] };
        rects.insert([l[ax], u[ax], y[0], y[1]].map(f64::to_bits));
    }
    let y_range = if g.dim() == 1 { [0.0, 1.0] } else { [g.spec.lo[ay], g.spec.hi[ay]] };
    let mut f = Frame::new([g.spec.lo[ax], g.spec.hi[ax]], y_range);
    for r in &rects {
        let r = r.map(f64::from_bits);
        f.rect([r[0], r[1]], [r[2], r[3]], svg::category_color(0));
    }
    let ylabel = if g.dim() == 1 { String::new() } else { format!("x{ay}") };
    let svg = f.finish(&format!("{} chain attractor, projection", m.id), &format!("x{ax}"), &ylabel);
    let mut out = Outcome::new(summary)
        .file("attractor.csv", cells_csv)
        .json("attractor.json", &doc)?
        .file("attractor.svg", svg);
    if o.edges == Some(true) {
        let mut e = Vec::new();
        g.write_edges_csv(&mut e).map_err(CliError::io("formatting edges"))?;
        out = out.file("edges.csv", e);
    }
    Ok(out)
}

fn scan(spec_value: &Value) -> CliResult<Outcome> {
    let spec: ScanSpec = from_value("scan spec", spec_value.clone())?;
    let grids = spec.grids()?;
    let r = run_scan(&spec)?;
    let mut csv = Vec::new();
    r.write_csv(&mut csv).map_err(CliError::io("formatting scan"))?;
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for t in r.tags() {
        *counts.entry(tag_name(t)).or_default() += 1;
    }
    let tally: Vec<String> = counts.iter().map(|(k, v)| format!("{k} {v}")).collect();
    let summary = format!(
        "scan {}: {} points; {}",
        family_name(spec.family),
        r.records.len(),
        tally.join(", ")
    );
    let svg = if grids.len() == 2 {
        svg::heat_map(
            "largest Lyapunov exponent",
            &grids[0],
            &grids[1],
            &r.column("lyapunov"),
            [&spec.axes[0].name, &spec.axes[1].name],
        )
    } else {
        let column = match spec.family {
            Family::BlueSky => "period",
            Family::Solenoid => "section_dimension",
            _ => "lyapunov",
        };
        let log = spec.family == Family::BlueSky;
        let pts: Vec<(f64, f64)> = grids[0]
            .iter()
            .zip(r.column(column))
            .map(|(x, y)| if log { (x.log10(), y.log10()) } else { (*x, y) })
            .collect();
        let mut f = Frame::fit(pts.iter().copied());
        f.polyline(&pts, 0);
        f.markers(&pts, 1);
        let (xl, yl) = if log {
            (format!("log10 {}", spec.axes[0].name), format!("log10 {column}"))
        } else {
            (spec.axes[0].name.clone(), column.to_string())
        };
        f.finish(&format!("{} scan", family_name(spec.family)), &xl, &yl)
    };
    Ok(Outcome::new(summary)
        .file("scan.csv", csv)
        .json("scan.json", &r)?
        .file("scan.svg", svg))
}

fn tag_name(t: Tag) -> &'static str {
    t.as_str()
}

fn family_name(f: Family) -> String {
    serde_json::to_value(f)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum MapSpec {
    SymmetricSlope {
        slope: f64,
    },
    PiecewiseLinear {
        left: [f64; 2],
        right: [f64; 2],
    },
    Reduce {
        model: String,
        #[serde(default)]
        params: Option<Value>,
        #[serde(default)]
        transient: Option<usize>,
        #[serde(default)]
        samples: Option<usize>,
    },
}

fn interval_map(what: &str, map: &Option<Value>, slope: Option<f64>) -> CliResult<Option<IntervalMap1D>> {
    let spec = match (map, slope) {
        (Some(_), Some(_)) => return Err(CliError::Usage(format!("give either `{what}` or its slope shorthand"))),
        (None, None) => return Ok(None),
        (None, Some(s)) => MapSpec::SymmetricSlope { slope: s },
        (Some(v), None) => from_value(&format!("`{what}`"), v.clone())?,
    };
    Ok(Some(match spec {
        MapSpec::SymmetricSlope { slope } => IntervalMap1D::symmetric_slope(slope)?,
        MapSpec::PiecewiseLinear { left, right } => IntervalMap1D::piecewise_linear(left, right)?,
        MapSpec::Reduce {
            model,
            params,
            transient,
            samples,
        } => {
            let m = build_model(&Some(model), &params)?;
            reduce_to_1d(&m, transient.unwrap_or(50), samples.unwrap_or(8192))?
        }
    }))
}

fn kneading(o: &KneadingOpts) -> CliResult<Outcome> {
    let g = match interval_map("map", &o.map, o.slope)? {
        Some(g) => g,
        None => IntervalMap1D::symmetric_slope(2.0)?,
    };
    let n = o.n.unwrap_or(64);
    let depth = o.depth.unwrap_or(8);
    let k = KneadingInvariant::of(&g, n)?;
    let mut text = k.to_string();
    let mut doc = json!({"invariant": k});
    if let Some(h) = interval_map("compare", &o.compare, o.compare_slope)? {
        let k2 = KneadingInvariant::of(&h, n)?;
        let c = compare_kneading(&k, &k2)?;
        let _ = writeln!(text, "compare: {c}");
        if let Some(i) = c.first_difference() {
            let _ = writeln!(text, "first difference at index {i}");
        }
        doc["compare"] = json!({"other": k2, "comparison": c, "equal": c.is_equal()});
    }
    let full = verify_two_full_branches(&g)?;
    let _ = writeln!(text, "full branches: {}", if full { "yes" } else { "no" });
    doc["full_branches"] = json!(full);
    match build_transition_matrix(&g, depth) {
        Ok(t) => {
            let _ = writeln!(text, "entropy (depth {depth}): {}", fmt17(t.entropy));
            doc["entropy"] = json!(t.entropy);
        }
        Err(e) => {
            let _ = writeln!(text, "entropy unavailable: {e}");
        }
    }
    Outcome::new(format!("kneading {}:\n{}", g.label, text.trim_end()))
        .file("kneading.txt", text)
        .json("kneading.json", &doc)
}
