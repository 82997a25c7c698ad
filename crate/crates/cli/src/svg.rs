//! Minimal static line charts.

use std::fmt::Write as _;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 50.0;
const COLORS: [&str; 8] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"];

/// Render `series` (one value per time step each) with optional horizontal
/// reference bands `(lower, upper)` per series.
pub fn line_chart(title: &str, series: &[(String, Vec<f64>)], bands: &[(f64, f64)]) -> String {
    let n = series.iter().map(|(_, v)| v.len()).max().unwrap_or(0).max(2);
    let values = series.iter().flat_map(|(_, v)| v.iter().copied()).chain(bands.iter().flat_map(|&(a, b)| [a, b]));
    let (mut lo, mut hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(v), h.max(v)));
    if !lo.is_finite() || !hi.is_finite() {
        lo = 0.0;
        hi = 1.0;
    }
    if hi - lo < 1e-9 {
        lo -= 0.5;
        hi += 0.5;
    }
    let x = |i: usize| MARGIN + (WIDTH - 2.0 * MARGIN) * i as f64 / (n - 1) as f64;
    let y = |v: f64| HEIGHT - MARGIN - (HEIGHT - 2.0 * MARGIN) * (v - lo) / (hi - lo);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle">{title}</text>"#, WIDTH / 2.0);
    for (k, &(a, b)) in bands.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let _ = writeln!(
            s,
            r#"<rect x="{MARGIN}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{color}" fill-opacity="0.08"/>"#,
            y(b),
            WIDTH - 2.0 * MARGIN,
            (y(a) - y(b)).max(0.0)
        );
    }
    let _ = writeln!(
        s,
        r#"<polyline fill="none" stroke="black" points="{MARGIN},{MARGIN} {MARGIN},{:.2} {:.2},{:.2}"/>"#,
        HEIGHT - MARGIN,
        WIDTH - MARGIN,
        HEIGHT - MARGIN
    );
    let _ = writeln!(s, r#"<text x="5" y="{:.2}">{hi:.3}</text>"#, MARGIN);
    let _ = writeln!(s, r#"<text x="5" y="{:.2}">{lo:.3}</text>"#, HEIGHT - MARGIN);
    for (k, (name, v)) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let pts: Vec<String> = v.iter().enumerate().map(|(i, &val)| format!("{:.2},{:.2}", x(i), y(val))).collect();
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.2" points="{}"/>"#, pts.join(" "));
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" fill="{color}">{name}</text>"#, WIDTH - MARGIN + 5.0, MARGIN + 15.0 * k as f64);
    }
    s.push_str("</svg>\n");
    s
}
