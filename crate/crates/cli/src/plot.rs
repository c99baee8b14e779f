//! Self-contained SVG figures: line plots and grouped bar charts.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 16.0;
const TOP: f64 = 28.0;
const BOTTOM: f64 = 48.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

pub struct Series {
    pub label: String,
    /// Connected runs of points; separate runs are drawn as separate lines.
    pub runs: Vec<Vec<(f64, f64)>>,
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn bounds(series: &[Series]) -> ((f64, f64), (f64, f64)) {
    let pts = series.iter().flat_map(|s| s.runs.iter().flatten());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts {
        if x.is_finite() && y.is_finite() {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
    }
    if !x0.is_finite() {
        return ((0.0, 1.0), (0.0, 1.0));
    }
    let pad = |a: f64, b: f64| if b > a { (a, b) } else { (a - 0.5, b + 0.5) };
    (pad(x0, x1), pad(y0, y1))
}

fn frame(out: &mut String, title: &str, xlabel: &str, ylabel: &str, xr: (f64, f64), yr: (f64, f64)) {
    let _ = write!(
        out,
        r##"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">
<rect width="100%" height="100%" fill="white"/>
<text x="{}" y="18" text-anchor="middle" font-size="14">{}</text>
<rect x="{LEFT}" y="{TOP}" width="{}" height="{}" fill="none" stroke="black"/>
<text x="{}" y="{}" text-anchor="middle">{}</text>
<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>
"##,
        W / 2.0,
        esc(title),
        W - LEFT - RIGHT,
        H - TOP - BOTTOM,
        LEFT + (W - LEFT - RIGHT) / 2.0,
        H - 10.0,
        esc(xlabel),
        TOP + (H - TOP - BOTTOM) / 2.0,
        TOP + (H - TOP - BOTTOM) / 2.0,
        esc(ylabel),
    );
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let xv = xr.0 + f * (xr.1 - xr.0);
        let yv = yr.0 + f * (yr.1 - yr.0);
        let px = LEFT + f * (W - LEFT - RIGHT);
        let py = H - BOTTOM - f * (H - TOP - BOTTOM);
        let _ = writeln!(
            out,
            r#"<text x="{px:.1}" y="{:.1}" text-anchor="middle">{xv:.3}</text><text x="{:.1}" y="{:.1}" text-anchor="end">{yv:.3}</text>"#,
            H - BOTTOM + 16.0,
            LEFT - 4.0,
            py + 4.0
        );
    }
}

/// Line plot; each series gets one colour and a legend entry.
pub fn lines(title: &str, xlabel: &str, ylabel: &str, series: &[Series]) -> String {
    let (xr, yr) = bounds(series);
    let sx = |x: f64| LEFT + (x - xr.0) / (xr.1 - xr.0) * (W - LEFT - RIGHT);
    let sy = |y: f64| H - BOTTOM - (y - yr.0) / (yr.1 - yr.0) * (H - TOP - BOTTOM);
    let mut out = String::new();
    frame(&mut out, title, xlabel, ylabel, xr, yr);
    for (i, s) in series.iter().enumerate() {
        let colour = PALETTE[i % PALETTE.len()];
        for run in &s.runs {
            let pts: Vec<String> = run
                .iter()
                .filter(|(x, y)| x.is_finite() && y.is_finite())
                .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
                .collect();
            match pts.len() {
                0 => {}
                1 => {
                    let (x, y) = pts[0].split_once(',').unwrap();
                    let _ = writeln!(out, r#"<circle cx="{x}" cy="{y}" r="1.5" fill="{colour}"/>"#);
                }
                _ => {
                    let _ = writeln!(
                        out,
                        r#"<polyline fill="none" stroke="{colour}" stroke-width="1.2" points="{}"/>"#,
                        pts.join(" ")
                    );
                }
            }
        }
        let ly = TOP + 14.0 + 14.0 * i as f64;
        let _ = writeln!(
            out,
            r#"<rect x="{:.1}" y="{:.1}" width="10" height="3" fill="{colour}"/><text x="{:.1}" y="{:.1}">{}</text>"#,
            W - RIGHT - 110.0,
            ly - 4.0,
            W - RIGHT - 96.0,
            ly,
            esc(&s.label)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Grouped bar chart: one group per category, one bar per series.
pub fn bars(title: &str, ylabel: &str, categories: &[&str], series: &[(&str, Vec<f64>)]) -> String {
    let mut lo = 0.0f64;
    let mut hi = 0.0f64;
    for (_, v) in series {
        for &x in v.iter().filter(|x| x.is_finite()) {
            lo = lo.min(x);
            hi = hi.max(x);
        }
    }
    if hi <= lo {
        hi = lo + 1.0;
    }
    let yr = (lo, hi);
    let sy = |y: f64| H - BOTTOM - (y - yr.0) / (yr.1 - yr.0) * (H - TOP - BOTTOM);
    let mut out = String::new();
    frame(&mut out, title, "", ylabel, (0.0, categories.len() as f64), yr);
    let group = (W - LEFT - RIGHT) / categories.len().max(1) as f64;
    let bar = group * 0.8 / series.len().max(1) as f64;
    for (c, name) in categories.iter().enumerate() {
        let gx = LEFT + group * c as f64 + group * 0.1;
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            gx + group * 0.4,
            H - BOTTOM + 30.0,
            esc(name)
        );
        for (s, (_, vals)) in series.iter().enumerate() {
            let v = vals.get(c).copied().unwrap_or(f64::NAN);
            if !v.is_finite() {
                continue;
            }
            let (y0, y1) = (sy(0.0), sy(v));
            let _ = writeln!(
                out,
                r#"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="{}"/>"#,
                gx + bar * s as f64,
                y0.min(y1),
                bar * 0.95,
                (y1 - y0).abs().max(0.5),
                PALETTE[s % PALETTE.len()]
            );
        }
    }
    for (s, (label, _)) in series.iter().enumerate() {
        let ly = TOP + 14.0 + 14.0 * s as f64;
        let _ = writeln!(
            out,
            r#"<rect x="{:.1}" y="{:.1}" width="10" height="10" fill="{}"/><text x="{:.1}" y="{:.1}">{}</text>"#,
            W - RIGHT - 110.0,
            ly - 9.0,
            PALETTE[s % PALETTE.len()],
            W - RIGHT - 96.0,
            ly,
            esc(label)
        );
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svg_is_closed_and_escaped() {
        let s = lines("a<b", "x", "y", &[Series { label: "s&t".into(), runs: vec![vec![(0.0, 0.0), (1.0, 2.0)]] }]);
        assert!(s.starts_with("<svg") && s.trim_end().ends_with("</svg>"));
        assert!(s.contains("a&lt;b") && s.contains("s&amp;t"));
        assert!(s.contains("<polyline"));
        let b = bars("t", "y", &["A", "B"], &[("fwd", vec![0.5, -0.2])]);
        assert_eq!(b.matches("<rect").count(), 2 + 2 + 1);
    }
}
