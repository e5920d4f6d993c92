//! Minimal self-contained SVG charts. Output depends only on the data, so
//! repeated runs give identical bytes.

use std::fmt::Write;

use crate::format::general;

pub const BLUE: &str = "#1f77b4";
pub const ORANGE: &str = "#ff7f0e";
pub const GREEN: &str = "#2ca02c";
pub const RED: &str = "#d62728";
pub const GREY: &str = "#7f7f7f";

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 55.0;

#[derive(Debug, Clone)]
enum Layer {
    Histogram { edges: Vec<f64>, heights: Vec<f64>, color: &'static str, label: String },
    Line { points: Vec<(f64, f64)>, color: &'static str, label: String },
    Scatter { points: Vec<(f64, f64)>, color: &'static str, label: String },
    /// Vertical bars at x = 1, 2, ...
    Stems { values: Vec<f64>, color: &'static str, label: String },
    HLine { y: f64, color: &'static str, label: String },
    VLine { x: f64, color: &'static str, label: String },
}

impl Layer {
    fn label(&self) -> (&str, &'static str) {
        match self {
            Layer::Histogram { label, color, .. }
            | Layer::Line { label, color, .. }
            | Layer::Scatter { label, color, .. }
            | Layer::Stems { label, color, .. }
            | Layer::HLine { label, color, .. }
            | Layer::VLine { label, color, .. } => (label, color),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Chart {
    title: String,
    x_label: String,
    y_label: String,
    layers: Vec<Layer>,
}

#[derive(Debug, Clone, Copy)]
struct Range {
    lo: f64,
    hi: f64,
}

impl Range {
    fn of(values: impl IntoIterator<Item = f64>) -> Range {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for v in values.into_iter().filter(|v| v.is_finite()) {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if lo > hi {
            return Range { lo: 0.0, hi: 1.0 };
        }
        if hi - lo <= 1e-12 * hi.abs().max(1.0) {
            let pad = 0.5 * lo.abs().max(1.0);
            return Range { lo: lo - pad, hi: hi + pad };
        }
        Range { lo, hi }
    }

    fn padded(self, frac: f64) -> Range {
        let pad = frac * (self.hi - self.lo);
        Range { lo: self.lo - pad, hi: self.hi + pad }
    }

    fn ticks(self) -> Vec<f64> {
        let raw = (self.hi - self.lo) / 5.0;
        let mag = 10f64.powf(raw.log10().floor());
        let step = [1.0, 2.0, 5.0, 10.0]
            .iter()
            .map(|m| m * mag)
            .find(|s| *s >= raw)
            .unwrap_or(10.0 * mag);
        let first = (self.lo / step).ceil() as i64;
        let last = (self.hi / step).floor() as i64;
        (first..=last).map(|k| k as f64 * step).collect()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn tick_label(v: f64) -> String {
    let s = general(v, 4);
    if s == "-0" {
        "0".into()
    } else {
        s
    }
}

impl Chart {
    pub fn new(title: &str, x_label: &str, y_label: &str) -> Self {
        Chart {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            layers: Vec::new(),
        }
    }

    pub fn histogram(mut self, edges: &[f64], heights: &[f64], color: &'static str, label: &str) -> Self {
        self.layers.push(Layer::Histogram {
            edges: edges.to_vec(),
            heights: heights.to_vec(),
            color,
            label: label.into(),
        });
        self
    }

    pub fn line(mut self, points: Vec<(f64, f64)>, color: &'static str, label: &str) -> Self {
        self.layers.push(Layer::Line { points, color, label: label.into() });
        self
    }

    pub fn scatter(mut self, points: Vec<(f64, f64)>, color: &'static str, label: &str) -> Self {
        self.layers.push(Layer::Scatter { points, color, label: label.into() });
        self
    }

    pub fn stems(mut self, values: &[f64], color: &'static str, label: &str) -> Self {
        self.layers.push(Layer::Stems {
            values: values.to_vec(),
            color,
            label: label.into(),
        });
        self
    }

    pub fn hline(mut self, y: f64, color: &'static str, label: &str) -> Self {
        self.layers.push(Layer::HLine { y, color, label: label.into() });
        self
    }

    pub fn vline(mut self, x: f64, color: &'static str, label: &str) -> Self {
        self.layers.push(Layer::VLine { x, color, label: label.into() });
        self
    }

    fn ranges(&self) -> (Range, Range) {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        let mut y_has_zero = false;
        for layer in &self.layers {
            match layer {
                Layer::Histogram { edges, heights, .. } => {
                    xs.extend(edges);
                    ys.extend(heights);
                    y_has_zero = true;
                }
                Layer::Line { points, .. } | Layer::Scatter { points, .. } => {
                    for &(x, y) in points {
                        xs.push(x);
                        ys.push(y);
                    }
                }
                Layer::Stems { values, .. } => {
                    xs.extend([0.5, values.len() as f64 + 0.5]);
                    ys.extend(values);
                    y_has_zero = true;
                }
                Layer::HLine { y, .. } => ys.push(*y),
                Layer::VLine { x, .. } => xs.push(*x),
            }
        }
        if y_has_zero {
            ys.push(0.0);
        }
        (Range::of(xs), Range::of(ys).padded(0.05))
    }

    pub fn render(&self) -> String {
        let (xr, yr) = self.ranges();
        let pw = WIDTH - LEFT - RIGHT;
        let ph = HEIGHT - TOP - BOTTOM;
        let sx = |x: f64| LEFT + (x - xr.lo) / (xr.hi - xr.lo) * pw;
        let sy = |y: f64| TOP + (yr.hi - y) / (yr.hi - yr.lo) * ph;

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
            WIDTH / 2.0,
            escape(&self.title)
        );
        let _ = writeln!(s, r#"<defs><clipPath id="plot"><rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}"/></clipPath></defs>"#);

        for t in xr.ticks() {
            let x = sx(t);
            let _ = writeln!(s, r##"<line x1="{x:.2}" y1="{TOP}" x2="{x:.2}" y2="{:.2}" stroke="#e5e5e5"/>"##, TOP + ph);
            let _ = writeln!(
                s,
                r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
                TOP + ph + 16.0,
                tick_label(t)
            );
        }
        for t in yr.ticks() {
            let y = sy(t);
            let _ = writeln!(s, r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#e5e5e5"/>"##, LEFT + pw);
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
                LEFT - 6.0,
                y + 4.0,
                tick_label(t)
            );
        }

        let _ = writeln!(s, r#"<g clip-path="url(#plot)">"#);
        for layer in &self.layers {
            match layer {
                Layer::Histogram { edges, heights, color, .. } => {
                    for (i, h) in heights.iter().enumerate() {
                        if !h.is_finite() || i + 1 >= edges.len() {
                            continue;
                        }
                        let (x0, x1) = (sx(edges[i]), sx(edges[i + 1]));
                        let (y0, y1) = (sy(h.max(0.0)), sy(0.0));
                        let _ = writeln!(
                            s,
                            r#"<rect x="{x0:.2}" y="{y0:.2}" width="{:.2}" height="{:.2}" fill="{color}" fill-opacity="0.55" stroke="{color}" stroke-width="0.5"/>"#,
                            x1 - x0,
                            y1 - y0
                        );
                    }
                }
                Layer::Line { points, color, .. } => {
                    let mut path = String::new();
                    let mut pen_down = false;
                    for &(x, y) in points {
                        if !(x.is_finite() && y.is_finite()) {
                            pen_down = false;
                            continue;
                        }
                        let _ = write!(path, "{}{:.2},{:.2} ", if pen_down { "L" } else { "M" }, sx(x), sy(y));
                        pen_down = true;
                    }
                    let _ = writeln!(
                        s,
                        r#"<path d="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
                        path.trim_end()
                    );
                }
                Layer::Scatter { points, color, .. } => {
                    for &(x, y) in points.iter().filter(|(x, y)| x.is_finite() && y.is_finite()) {
                        let _ = writeln!(
                            s,
                            r#"<circle cx="{:.2}" cy="{:.2}" r="1.6" fill="{color}" fill-opacity="0.6"/>"#,
                            sx(x),
                            sy(y)
                        );
                    }
                }
                Layer::Stems { values, color, .. } => {
                    let w = (pw / values.len().max(1) as f64 * 0.7).max(1.0);
                    for (i, v) in values.iter().enumerate().filter(|(_, v)| v.is_finite()) {
                        let x = sx(i as f64 + 1.0) - w / 2.0;
                        let (top, bottom) = if *v >= 0.0 { (sy(*v), sy(0.0)) } else { (sy(0.0), sy(*v)) };
                        let _ = writeln!(
                            s,
                            r#"<rect x="{x:.2}" y="{top:.2}" width="{w:.2}" height="{:.2}" fill="{color}"/>"#,
                            bottom - top
                        );
                    }
                }
                Layer::HLine { y, color, .. } => {
                    let _ = writeln!(
                        s,
                        r#"<line x1="{LEFT}" y1="{0:.2}" x2="{1:.2}" y2="{0:.2}" stroke="{color}" stroke-dasharray="5,4"/>"#,
                        sy(*y),
                        LEFT + pw
                    );
                }
                Layer::VLine { x, color, .. } => {
                    let _ = writeln!(
                        s,
                        r#"<line x1="{0:.2}" y1="{TOP}" x2="{0:.2}" y2="{1:.2}" stroke="{color}" stroke-dasharray="5,4"/>"#,
                        sx(*x),
                        TOP + ph
                    );
                }
            }
        }
        let _ = writeln!(s, "</g>");

        let _ = writeln!(
            s,
            r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            LEFT + pw / 2.0,
            HEIGHT - 12.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text x="16" y="{0:.2}" text-anchor="middle" transform="rotate(-90 16 {0:.2})">{1}</text>"#,
            TOP + ph / 2.0,
            escape(&self.y_label)
        );

        let mut row = 0;
        let mut seen: Vec<&str> = Vec::new();
        for layer in &self.layers {
            let (label, color) = layer.label();
            if label.is_empty() || seen.contains(&label) {
                continue;
            }
            seen.push(label);
            let y = TOP + 14.0 + 16.0 * row as f64;
            let x = LEFT + pw - 150.0;
            let _ = writeln!(
                s,
                r#"<rect x="{x:.2}" y="{:.2}" width="12" height="8" fill="{color}"/><text x="{:.2}" y="{y:.2}">{}</text>"#,
                y - 8.0,
                x + 18.0,
                escape(label)
            );
            row += 1;
        }
        s.push_str("</svg>\n");
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_is_deterministic() {
        let chart = Chart::new("t", "x", "y")
            .histogram(&[0.0, 1.0, 2.0], &[0.25, 0.75], BLUE, "hist")
            .line(vec![(0.0, 0.0), (1.0, f64::NAN), (2.0, 1.0)], RED, "curve")
            .hline(0.5, GREY, "");
        let a = chart.render();
        assert_eq!(a, chart.clone().render());
        assert!(a.starts_with("<svg") && a.ends_with("</svg>\n"));
        // background, clip, two bars, frame, two legend keys
        assert_eq!(a.matches("<rect").count(), 7);
        assert!(!a.contains("NaN"));
    }

    #[test]
    fn labels_are_escaped() {
        let out = Chart::new("a < b & c", "", "").stems(&[1.0, -1.0], GREEN, "").render();
        assert!(out.contains("a &lt; b &amp; c"));
    }

    #[test]
    fn ticks_cover_range() {
        let t = Range { lo: 0.78, hi: 1.25 }.ticks();
        assert_eq!(t.first().copied(), Some(0.8));
        assert!(t.len() >= 4 && t.len() <= 6);
        let flat = Range::of([3.0, 3.0]);
        assert!(flat.lo < 3.0 && flat.hi > 3.0);
    }
}
