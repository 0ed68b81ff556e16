//! Minimal SVG plots: polylines, rectangles and heat maps with tick-labelled
//! axes. Coordinates are written with two decimals.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 480.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
/// Polylines are decimated to at most this many vertices.
pub const MAX_VERTICES: usize = 20_000;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn tick(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e4 || v.abs() < 1e-2 {
        format!("{v:.2e}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

/// Data-to-pixel transform of one plot area.
pub struct Frame {
    x: [f64; 2],
    y: [f64; 2],
    body: String,
}

impl Frame {
    /// Degenerate or non-finite ranges are widened so that the transform
    /// stays finite.
    pub fn new(x: [f64; 2], y: [f64; 2]) -> Self {
        let fix = |r: [f64; 2]| {
            if !(r[0].is_finite() && r[1].is_finite()) {
                [0.0, 1.0]
            } else if r[1] - r[0] <= 0.0 {
                [r[0] - 0.5, r[0] + 0.5]
            } else {
                r
            }
        };
        Frame {
            x: fix(x),
            y: fix(y),
            body: String::new(),
        }
    }

    /// Bounding ranges of the finite points.
    pub fn fit(points: impl Iterator<Item = (f64, f64)>) -> Self {
        let mut x = [f64::INFINITY, f64::NEG_INFINITY];
        let mut y = x;
        for (a, b) in points.filter(|(a, b)| a.is_finite() && b.is_finite()) {
            x = [x[0].min(a), x[1].max(a)];
            y = [y[0].min(b), y[1].max(b)];
        }
        Frame::new(x, y)
    }

    fn px(&self, v: f64) -> f64 {
        LEFT + (v - self.x[0]) / (self.x[1] - self.x[0]) * (W - LEFT - RIGHT)
    }

    fn py(&self, v: f64) -> f64 {
        H - BOTTOM - (v - self.y[0]) / (self.y[1] - self.y[0]) * (H - TOP - BOTTOM)
    }

    /// Consecutive finite points joined; non-finite points break the line.
    pub fn polyline(&mut self, pts: &[(f64, f64)], series: usize) {
        let stride = pts.len().div_ceil(MAX_VERTICES).max(1);
        let color = PALETTE[series % PALETTE.len()];
        let mut run = String::new();
        let flush = |run: &mut String, body: &mut String| {
            if !run.is_empty() {
                let _ = writeln!(
                    body,
                    r#"<polyline fill="none" stroke="{color}" stroke-width="0.8" points="{}"/>"#,
                    run.trim_end()
                );
                run.clear();
            }
        };
        for &(a, b) in pts.iter().step_by(stride) {
            if a.is_finite() && b.is_finite() {
                let _ = write!(run, "{:.2},{:.2} ", self.px(a), self.py(b));
            } else {
                flush(&mut run, &mut self.body);
            }
        }
        flush(&mut run, &mut self.body);
    }

    pub fn markers(&mut self, pts: &[(f64, f64)], series: usize) {
        let color = PALETTE[series % PALETTE.len()];
        let stride = pts.len().div_ceil(MAX_VERTICES).max(1);
        for &(a, b) in pts.iter().step_by(stride).filter(|(a, b)| a.is_finite() && b.is_finite()) {
            let _ = writeln!(
                self.body,
                r#"<circle cx="{:.2}" cy="{:.2}" r="1.5" fill="{color}"/>"#,
                self.px(a),
                self.py(b)
            );
        }
    }

    /// Filled rectangle `[x0, x1] × [y0, y1]` in data coordinates.
    pub fn rect(&mut self, x: [f64; 2], y: [f64; 2], fill: &str) {
        let (a, b) = (self.px(x[0]), self.px(x[1]));
        let (c, d) = (self.py(y[1]), self.py(y[0]));
        let _ = writeln!(
            self.body,
            r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{fill}"/>"#,
            a.min(b),
            c.min(d),
            (b - a).abs().max(0.5),
            (d - c).abs().max(0.5)
        );
    }

    pub fn legend(&mut self, labels: &[String]) {
        for (i, l) in labels.iter().enumerate() {
            let y = TOP + 14.0 * i as f64 + 4.0;
            let _ = writeln!(
                self.body,
                r#"<rect x="{:.2}" y="{:.2}" width="10" height="10" fill="{}"/><text x="{:.2}" y="{:.2}" font-size="11">{}</text>"#,
                W - RIGHT - 150.0,
                y,
                PALETTE[i % PALETTE.len()],
                W - RIGHT - 135.0,
                y + 9.0,
                escape(l)
            );
        }
    }

    /// Complete document with axes, five ticks per axis and labels.
    pub fn finish(self, title: &str, xlabel: &str, ylabel: &str) -> String {
        let mut s = String::new();
        let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif">"#
        );
        let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(s, r#"<text x="{}" y="22" font-size="14" text-anchor="middle">{}</text>"#, W / 2.0, escape(title));
        s.push_str(&self.body);
        let (x0, y0) = (LEFT, H - BOTTOM);
        let _ = writeln!(
            s,
            r#"<path d="M{x0},{TOP} V{y0} H{}" fill="none" stroke="black"/>"#,
            W - RIGHT
        );
        for i in 0..5 {
            let f = i as f64 / 4.0;
            let xv = self.x[0] + f * (self.x[1] - self.x[0]);
            let yv = self.y[0] + f * (self.y[1] - self.y[0]);
            let (px, py) = (self.px(xv), self.py(yv));
            let _ = writeln!(
                s,
                r#"<path d="M{px:.2},{y0} v5 M{x0},{py:.2} h-5" stroke="black"/><text x="{px:.2}" y="{:.2}" font-size="10" text-anchor="middle">{}</text><text x="{:.2}" y="{:.2}" font-size="10" text-anchor="end">{}</text>"#,
                y0 + 17.0,
                tick(xv),
                x0 - 7.0,
                py + 3.0,
                tick(yv)
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="middle">{}</text>"#,
            (LEFT + W - RIGHT) / 2.0,
            H - 10.0,
            escape(xlabel)
        );
        let _ = writeln!(
            s,
            r#"<text x="16" y="{:.2}" font-size="12" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
            (TOP + H - BOTTOM) / 2.0,
            (TOP + H - BOTTOM) / 2.0,
            escape(ylabel)
        );
        s.push_str("</svg>\n");
        s
    }
}

/// Blue to yellow ramp; `None` maps to grey.
pub fn ramp(t: Option<f64>) -> String {
    match t {
        Some(t) if t.is_finite() => {
            let t = t.clamp(0.0, 1.0);
            let lerp = |a: f64, b: f64| (a + (b - a) * t).round() as u8;
            format!("#{:02x}{:02x}{:02x}", lerp(68.0, 253.0), lerp(1.0, 231.0), lerp(84.0, 37.0))
        }
        _ => "#bbbbbb".into(),
    }
}

pub fn category_color(i: usize) -> &'static str {
    PALETTE[i % PALETTE.len()]
}

/// Heat map of `values[i * ny + j]` over the grid `xs × ys`. Cells are
/// centred on the grid values.
pub fn heat_map(title: &str, xs: &[f64], ys: &[f64], values: &[f64], labels: [&str; 2]) -> String {
    let edges = |v: &[f64]| -> Vec<f64> {
        if v.len() < 2 {
            let c = v.first().copied().unwrap_or(0.0);
            return vec![c - 0.5, c + 0.5];
        }
        let mut e = vec![v[0] - 0.5 * (v[1] - v[0])];
        e.extend(v.windows(2).map(|w| 0.5 * (w[0] + w[1])));
        e.push(v[v.len() - 1] + 0.5 * (v[v.len() - 1] - v[v.len() - 2]));
        e
    };
    let (ex, ey) = (edges(xs), edges(ys));
    let finite = values.iter().filter(|v| v.is_finite());
    let lo = finite.clone().fold(f64::INFINITY, |a, b| a.min(*b));
    let hi = finite.fold(f64::NEG_INFINITY, |a, b| a.max(*b));
    let mut f = Frame::new([ex[0], ex[ex.len() - 1]], [ey[0], ey[ey.len() - 1]]);
    for i in 0..xs.len() {
        for j in 0..ys.len() {
            let v = values[i * ys.len() + j];
            let t = (v.is_finite()).then(|| if hi > lo { (v - lo) / (hi - lo) } else { 0.5 });
            f.rect([ex[i], ex[i + 1]], [ey[j], ey[j + 1]], &ramp(t));
        }
    }
    f.legend(&[format!("min {}", tick(lo)), format!("max {}", tick(hi))]);
    f.finish(title, labels[0], labels[1])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn documents_are_closed_and_escaped() {
        let mut f = Frame::fit([(0.0, 0.0), (1.0, 2.0)].into_iter());
        f.polyline(&[(0.0, 0.0), (f64::NAN, 1.0), (1.0, 2.0), (0.5, 1.0)], 0);
        let s = f.finish("a < b & c", "x", "y");
        assert!(s.contains("a &lt; b &amp; c"));
        assert!(s.trim_end().ends_with("</svg>"));
        assert_eq!(s.matches("<polyline").count(), 2);
    }

    #[test]
    fn degenerate_ranges_stay_finite() {
        let mut f = Frame::fit([(1.0, 1.0)].into_iter());
        f.markers(&[(1.0, 1.0)], 0);
        let s = f.finish("t", "x", "y");
        assert!(!s.contains("NaN") && !s.contains("inf"));
    }

    #[test]
    fn ramp_endpoints() {
        assert_eq!(ramp(Some(0.0)), "#440154");
        assert_eq!(ramp(Some(1.0)), "#fde725");
        assert_eq!(ramp(None), "#bbbbbb");
    }
}
