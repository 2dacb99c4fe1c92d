//! Minimal hand-written SVG: line plots, 2-D histograms and box plots.

use std::fmt::Write as _;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 60.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(out, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="24" text-anchor="middle" font-family="sans-serif" font-size="15">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
}

/// Maps data ranges to the plotting area, padding degenerate ranges.
struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn new(x: (f64, f64), y: (f64, f64)) -> Self {
        let pad = |(lo, hi): (f64, f64)| {
            if !(lo.is_finite() && hi.is_finite()) {
                (0.0, 1.0)
            } else if hi - lo <= 1e-12 * (1.0 + lo.abs()) {
                (lo - 0.5, hi + 0.5)
            } else {
                (lo, hi)
            }
        };
        Self { x: pad(x), y: pad(y) }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN - (y - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - 2.0 * MARGIN)
    }

    fn axes(&self, out: &mut String, x_label: &str, y_label: &str) {
        let (l, r, t, b) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
        let _ = writeln!(
            out,
            r#"<rect x="{l}" y="{t}" width="{}" height="{}" fill="none" stroke="black"/>"#,
            r - l,
            b - t
        );
        let label = |out: &mut String, x: f64, y: f64, anchor: &str, text: &str| {
            let _ = writeln!(
                out,
                r#"<text x="{x:.1}" y="{y:.1}" text-anchor="{anchor}" font-family="sans-serif" font-size="11">{}</text>"#,
                escape(text)
            );
        };
        label(out, l, b + 16.0, "start", &format!("{:.4}", self.x.0));
        label(out, r, b + 16.0, "end", &format!("{:.4}", self.x.1));
        label(out, l - 6.0, b, "end", &format!("{:.4}", self.y.0));
        label(out, l - 6.0, t + 10.0, "end", &format!("{:.4}", self.y.1));
        label(out, (l + r) / 2.0, HEIGHT - 14.0, "middle", x_label);
        label(out, 14.0, (t + b) / 2.0, "start", y_label);
    }
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

/// A named series of `(x, y)` points.
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn new(name: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Self {
            name: name.into(),
            points,
        }
    }
}

/// Line plot with one `<polyline>` per series; `log_x` plots `ln x`.
pub fn line_plot(title: &str, x_label: &str, y_label: &str, series: &[Series], log_x: bool) -> String {
    let tx = |x: f64| if log_x { x.ln() } else { x };
    let finite = |&(x, y): &(f64, f64)| tx(x).is_finite() && y.is_finite();
    let xs = bounds(series.iter().flat_map(|s| s.points.iter().filter(|p| finite(p)).map(|p| tx(p.0))));
    let ys = bounds(series.iter().flat_map(|s| s.points.iter().filter(|p| finite(p)).map(|p| p.1)));
    let frame = Frame::new(xs, ys);
    let mut out = String::new();
    header(&mut out, title);
    let x_label = if log_x { format!("ln {x_label}") } else { x_label.to_string() };
    frame.axes(&mut out, &x_label, y_label);
    for (k, s) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let pts: Vec<String> = s
            .points
            .iter()
            .filter(|p| finite(p))
            .map(|&(x, y)| format!("{:.2},{:.2}", frame.px(tx(x)), frame.py(y)))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"><title>{}</title></polyline>"#,
            pts.join(" "),
            escape(&s.name)
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" fill="{color}">{}</text>"#,
            WIDTH - MARGIN - 150.0,
            MARGIN + 16.0 + 16.0 * k as f64,
            escape(&s.name)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Grayscale heat map of 2-D bin counts over `[lo, hi]²`.
pub fn histogram2d(title: &str, counts: &[Vec<u64>], lo: f64, hi: f64) -> String {
    let frame = Frame::new((lo, hi), (lo, hi));
    let mut out = String::new();
    header(&mut out, title);
    let bins = counts.len().max(1);
    let max = counts.iter().flatten().copied().max().unwrap_or(0).max(1) as f64;
    let step = (hi - lo) / bins as f64;
    for (i, row) in counts.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            if c == 0 {
                continue;
            }
            let shade = 255 - ((c as f64 / max).sqrt() * 255.0).round() as u8;
            let (x0, x1) = (lo + step * i as f64, lo + step * (i + 1) as f64);
            let (y0, y1) = (lo + step * j as f64, lo + step * (j + 1) as f64);
            let _ = writeln!(
                out,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="rgb({shade},{shade},{shade})"/>"#,
                frame.px(x0),
                frame.py(y1),
                frame.px(x1) - frame.px(x0),
                frame.py(y0) - frame.py(y1)
            );
        }
    }
    frame.axes(&mut out, "x1", "x2");
    out.push_str("</svg>\n");
    out
}

/// Box plot (quartile box, median line, min–max whiskers) per group.
pub fn box_plot(title: &str, y_label: &str, groups: &[(String, Vec<f64>)]) -> String {
    let ys = bounds(groups.iter().flat_map(|(_, v)| v.iter().copied()));
    let frame = Frame::new((0.0, groups.len().max(1) as f64), ys);
    let mut out = String::new();
    header(&mut out, title);
    frame.axes(&mut out, "", y_label);
    for (k, (name, values)) in groups.iter().enumerate() {
        let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
        if v.is_empty() {
            continue;
        }
        v.sort_by(f64::total_cmp);
        let q = |p: f64| {
            let idx = p * (v.len() - 1) as f64;
            let (i, f) = (idx.floor() as usize, idx.fract());
            v[i] + (v[(i + 1).min(v.len() - 1)] - v[i]) * f
        };
        let cx = frame.px(k as f64 + 0.5);
        let half = 0.25 * (frame.px(1.0) - frame.px(0.0));
        let color = COLORS[k % COLORS.len()];
        let (lo, q1, med, q3, hi) = (q(0.0), q(0.25), q(0.5), q(0.75), q(1.0));
        let _ = writeln!(
            out,
            r#"<line x1="{cx:.2}" y1="{:.2}" x2="{cx:.2}" y2="{:.2}" stroke="{color}"/>"#,
            frame.py(lo),
            frame.py(hi)
        );
        let _ = writeln!(
            out,
            r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="white" stroke="{color}"/>"#,
            cx - half,
            frame.py(q3),
            2.0 * half,
            (frame.py(q1) - frame.py(q3)).max(0.5)
        );
        let _ = writeln!(
            out,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{color}" stroke-width="2"/>"#,
            cx - half,
            frame.py(med),
            cx + half,
            frame.py(med)
        );
        let _ = writeln!(
            out,
            r#"<text x="{cx:.2}" y="{:.2}" text-anchor="middle" font-family="sans-serif" font-size="11">{}</text>"#,
            HEIGHT - MARGIN + 30.0,
            escape(name)
        );
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_polyline_per_series() {
        let s = vec![
            Series::new("a", vec![(1.0, 2.0), (2.0, 3.0)]),
            Series::new("b<c", vec![(1.0, 1.0), (2.0, f64::NAN)]),
        ];
        let svg = line_plot("t", "x", "y", &s, true);
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("b&lt;c"));
    }

    #[test]
    fn constant_series_does_not_divide_by_zero() {
        let svg = line_plot("t", "x", "y", &[Series::new("c", vec![(0.0, 1.0), (1.0, 1.0)])], false);
        assert!(!svg.contains("NaN") && !svg.contains("inf"));
    }
}
