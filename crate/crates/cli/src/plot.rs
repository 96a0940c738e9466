//! Minimal static SVG charts.

use std::fmt::Write;

const WIDTH: f64 = 480.0;
const HEIGHT: f64 = 360.0;
const MARGIN: f64 = 40.0;
const PALETTE: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn fit(xs: impl Iterator<Item = f64> + Clone, ys: impl Iterator<Item = f64> + Clone) -> Self {
        let (x0, x1) = bounds(xs);
        let (y0, y1) = bounds(ys);
        Self { x0, x1, y0, y1 }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x0) / (self.x1 - self.x0) * (WIDTH - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN - (y - self.y0) / (self.y1 - self.y0) * (HEIGHT - 2.0 * MARGIN)
    }
}

fn bounds(v: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = v
        .filter(|x| x.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

fn open(title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="20" text-anchor="middle" font-family="sans-serif" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    s
}

fn axes(s: &mut String, f: &Frame) {
    let _ = writeln!(
        s,
        r##"<rect x="{m}" y="{m}" width="{w}" height="{h}" fill="none" stroke="#888"/>"##,
        m = MARGIN,
        w = WIDTH - 2.0 * MARGIN,
        h = HEIGHT - 2.0 * MARGIN
    );
    let label = |s: &mut String, x: f64, y: f64, anchor: &str, v: f64| {
        let _ = writeln!(
            s,
            r#"<text x="{x:.1}" y="{y:.1}" text-anchor="{anchor}" font-family="sans-serif" font-size="10">{v:.4}</text>"#
        );
    };
    label(s, MARGIN, HEIGHT - MARGIN + 14.0, "start", f.x0);
    label(s, WIDTH - MARGIN, HEIGHT - MARGIN + 14.0, "end", f.x1);
    label(s, MARGIN - 4.0, HEIGHT - MARGIN, "end", f.y0);
    label(s, MARGIN - 4.0, MARGIN + 8.0, "end", f.y1);
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Scatter of 2-D points, colored by `group`.
pub fn scatter(title: &str, points: &[(f64, f64)], group: &[usize]) -> String {
    let f = Frame::fit(points.iter().map(|p| p.0), points.iter().map(|p| p.1));
    let mut s = open(title);
    axes(&mut s, &f);
    for (i, &(x, y)) in points.iter().enumerate() {
        let color = PALETTE[group.get(i).copied().unwrap_or(0) % PALETTE.len()];
        let _ = writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{color}" fill-opacity="0.8"/>"#,
            f.px(x),
            f.py(y)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Line chart of named series sharing the x axis `0..len`.
pub fn lines(title: &str, series: &[(&str, Vec<f64>)]) -> String {
    let len = series.iter().map(|(_, v)| v.len()).max().unwrap_or(0);
    let f = Frame::fit(
        [0.0, len.saturating_sub(1) as f64].into_iter(),
        series.iter().flat_map(|(_, v)| v.iter().copied()).collect::<Vec<_>>().into_iter(),
    );
    let mut s = open(title);
    axes(&mut s, &f);
    for (k, (name, v)) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let pts: Vec<String> = v
            .iter()
            .enumerate()
            .filter(|(_, y)| y.is_finite())
            .map(|(i, &y)| format!("{:.2},{:.2}", f.px(i as f64), f.py(y)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            pts.join(" ")
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="11" fill="{color}">{}</text>"#,
            WIDTH - MARGIN - 100.0,
            MARGIN + 14.0 + 14.0 * k as f64,
            escape(name)
        );
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scatter_has_one_circle_per_point() {
        let svg = scatter("y", &[(0.0, 0.0), (1.0, 2.0), (3.0, -1.0)], &[0, 0, 1]);
        assert_eq!(svg.matches("<circle").count(), 3);
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn degenerate_ranges_do_not_divide_by_zero() {
        let svg = lines("flat", &[("g", vec![1.0, 1.0, 1.0])]);
        assert!(!svg.contains("NaN"));
        let svg = scatter("one", &[(2.0, 2.0)], &[0]);
        assert!(!svg.contains("NaN"));
    }

    #[test]
    fn titles_are_escaped() {
        assert!(lines("a<b", &[]).contains("a&lt;b"));
    }
}
