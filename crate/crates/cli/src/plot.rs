//! Minimal deterministic SVG charts.

use std::fmt::Write as _;

const W: f64 = 720.0;
const ROW: f64 = 22.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#7f7f7f"];

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn open(svg: &mut String, height: f64, title: &str) {
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{height:.0}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{:.1}" y="20" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, esc(title));
}

/// Horizontal bars of values in `[-1, 1]` around a zero axis.
pub fn bar_chart(title: &str, rows: &[(String, f64)]) -> String {
    let (left, right, top) = (220.0, W - 40.0, 40.0);
    let zero = (left + right) / 2.0;
    let half = (right - left) / 2.0;
    let height = top + ROW * rows.len() as f64 + 30.0;
    let mut svg = String::new();
    open(&mut svg, height, title);
    for (i, (label, v)) in rows.iter().enumerate() {
        let y = top + ROW * i as f64;
        let len = v.clamp(-1.0, 1.0) * half;
        let (x, w) = if len >= 0.0 { (zero, len) } else { (zero + len, -len) };
        let color = if *v >= 0.0 { PALETTE[0] } else { PALETTE[1] };
        let _ = writeln!(svg, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#, left - 6.0, y + 14.0, esc(label));
        let _ = writeln!(svg, r#"<rect x="{x:.1}" y="{:.1}" width="{w:.1}" height="{:.1}" fill="{color}"/>"#, y + 3.0, ROW - 6.0);
        let _ = writeln!(svg, r#"<text x="{:.1}" y="{:.1}" font-size="10">{v:.3}</text>"#, right + 2.0, y + 14.0);
    }
    let bottom = top + ROW * rows.len() as f64;
    let _ = writeln!(svg, r##"<line x1="{zero:.1}" y1="{top:.1}" x2="{zero:.1}" y2="{bottom:.1}" stroke="#000"/>"##);
    for (t, label) in [(-1.0, "-1"), (0.0, "0"), (1.0, "1")] {
        let _ = writeln!(svg, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{label}</text>"#, zero + t * half, bottom + 16.0);
    }
    svg.push_str("</svg>\n");
    svg
}

/// One whisker per group spanning its values, with the mean marked and the
/// individual values drawn as dots. Values are expected in `[-1, 1]`.
pub fn whisker_chart(title: &str, groups: &[(String, Vec<f64>)]) -> String {
    let (left, right, top) = (220.0, W - 40.0, 40.0);
    let zero = (left + right) / 2.0;
    let half = (right - left) / 2.0;
    let x = |v: f64| zero + v.clamp(-1.0, 1.0) * half;
    let height = top + ROW * groups.len() as f64 + 30.0;
    let mut svg = String::new();
    open(&mut svg, height, title);
    for (i, (label, vals)) in groups.iter().enumerate() {
        let y = top + ROW * i as f64 + ROW / 2.0;
        let _ = writeln!(svg, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#, left - 6.0, y + 4.0, esc(label));
        if vals.is_empty() {
            continue;
        }
        let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let _ = writeln!(svg, r##"<line x1="{:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#555"/>"##, x(lo), x(hi));
        for v in vals {
            let _ = writeln!(svg, r#"<circle cx="{:.1}" cy="{y:.1}" r="2.5" fill="{}"/>"#, x(*v), PALETTE[0]);
        }
        let _ = writeln!(
            svg,
            r#"<rect x="{:.1}" y="{:.1}" width="4" height="{:.1}" fill="{}"/>"#,
            x(mean) - 2.0,
            y - ROW / 3.0,
            2.0 * ROW / 3.0,
            PALETTE[1]
        );
    }
    let bottom = top + ROW * groups.len() as f64;
    let _ = writeln!(svg, r##"<line x1="{zero:.1}" y1="{top:.1}" x2="{zero:.1}" y2="{bottom:.1}" stroke="#000" stroke-dasharray="3,3"/>"##);
    for (t, label) in [(-1.0, "-1"), (0.0, "0"), (1.0, "1")] {
        let _ = writeln!(svg, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{label}</text>"#, x(t), bottom + 16.0);
    }
    svg.push_str("</svg>\n");
    svg
}

/// Success-rate curves on `[0, x_max] x [0, 1]` with a legend.
pub fn line_chart(title: &str, series: &[(String, Vec<(u64, f64)>)], x_max: u64) -> String {
    let (left, right, top, plot_h) = (60.0, W - 200.0, 40.0, 300.0);
    let bottom = top + plot_h;
    let span = x_max.max(1) as f64;
    let px = |s: u64| left + (s as f64 / span).min(1.0) * (right - left);
    let py = |v: f64| bottom - v.clamp(0.0, 1.0) * plot_h;
    let height = (bottom + 40.0).max(top + ROW * series.len() as f64 + 10.0);
    let mut svg = String::new();
    open(&mut svg, height, title);
    let _ = writeln!(
        svg,
        r##"<rect x="{left:.1}" y="{top:.1}" width="{:.1}" height="{plot_h:.1}" fill="none" stroke="#000"/>"##,
        right - left
    );
    for t in [0.0, 0.5, 1.0] {
        let _ = writeln!(svg, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{t}</text>"#, left - 4.0, py(t) + 4.0);
    }
    for (s, anchor) in [(0, "start"), (x_max, "end")] {
        let _ = writeln!(svg, r#"<text x="{:.1}" y="{:.1}" text-anchor="{anchor}">{s}</text>"#, px(s), bottom + 16.0);
    }
    for (i, (label, pts)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let path: Vec<String> = pts.iter().map(|&(s, v)| format!("{:.1},{:.1}", px(s), py(v))).collect();
        let _ = writeln!(svg, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#, path.join(" "));
        let ly = top + ROW * i as f64 + 10.0;
        let _ = writeln!(svg, r#"<rect x="{:.1}" y="{:.1}" width="12" height="4" fill="{color}"/>"#, right + 10.0, ly - 4.0);
        let _ = writeln!(svg, r#"<text x="{:.1}" y="{ly:.1}">{}</text>"#, right + 26.0, esc(label));
    }
    svg.push_str("</svg>\n");
    svg
}
