//! Minimal SVG charts for the analysis reports: grouped bars, heatmaps and
//! line plots. Output is deterministic text.

use std::fmt::Write;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn header(out: &mut String, w: f64, h: f64, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(out, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="18" text-anchor="middle" font-size="14">{}</text>"#,
        w / 2.0,
        esc(title)
    );
}

fn legend(out: &mut String, x: f64, names: &[&str]) {
    for (k, name) in names.iter().enumerate() {
        let y = 34.0 + 14.0 * k as f64;
        let _ = writeln!(
            out,
            r#"<rect x="{x}" y="{}" width="10" height="10" fill="{}"/><text x="{}" y="{}">{}</text>"#,
            y - 9.0,
            PALETTE[k % PALETTE.len()],
            x + 14.0,
            y,
            esc(name)
        );
    }
}

fn nice_max(v: f64) -> f64 {
    if !(v > 0.0) || !v.is_finite() {
        return 1.0;
    }
    let mag = 10f64.powf(v.log10().floor());
    for m in [1.0, 2.0, 2.5, 5.0, 10.0] {
        if m * mag >= v {
            return m * mag;
        }
    }
    10.0 * mag
}

fn y_axis(out: &mut String, left: f64, top: f64, plot_h: f64, plot_w: f64, y_max: f64, label: &str) {
    for k in 0..=4 {
        let v = y_max * k as f64 / 4.0;
        let y = top + plot_h - plot_h * k as f64 / 4.0;
        let _ = writeln!(
            out,
            r##"<line x1="{left}" y1="{y}" x2="{}" y2="{y}" stroke="#ddd"/><text x="{}" y="{}" text-anchor="end">{}</text>"##,
            left + plot_w,
            left - 4.0,
            y + 4.0,
            fmt_tick(v)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="14" y="{}" transform="rotate(-90 14 {})" text-anchor="middle">{}</text>"#,
        top + plot_h / 2.0,
        top + plot_h / 2.0,
        esc(label)
    );
}

fn fmt_tick(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e6 {
        format!("{}", v as i64)
    } else {
        format!("{v:.2}")
    }
}

/// Grouped bar chart: one group per category, one bar per series.
pub fn bar_chart(title: &str, y_label: &str, categories: &[String], series: &[(&str, Vec<f64>)]) -> String {
    let (left, top, bottom) = (60.0, 30.0, 40.0);
    let group_w = 18.0 * series.len().max(1) as f64 + 12.0;
    let plot_w = (group_w * categories.len() as f64).max(200.0);
    let plot_h = 220.0;
    let legend_w = 130.0;
    let (w, h) = (left + plot_w + legend_w, top + plot_h + bottom);
    let y_max = nice_max(
        series
            .iter()
            .flat_map(|(_, v)| v.iter().copied())
            .filter(|v| v.is_finite())
            .fold(0.0, f64::max),
    );
    let mut out = String::new();
    header(&mut out, w, h, title);
    y_axis(&mut out, left, top, plot_h, plot_w, y_max, y_label);
    let bar_w = (group_w - 12.0) / series.len().max(1) as f64;
    for (ci, cat) in categories.iter().enumerate() {
        let gx = left + ci as f64 * group_w + 6.0;
        for (si, (_, vals)) in series.iter().enumerate() {
            let v = vals.get(ci).copied().unwrap_or(0.0);
            let v = if v.is_finite() { v.max(0.0) } else { 0.0 };
            let bh = plot_h * v / y_max;
            let _ = writeln!(
                out,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                gx + si as f64 * bar_w,
                top + plot_h - bh,
                bar_w,
                bh,
                PALETTE[si % PALETTE.len()]
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{}" text-anchor="middle">{}</text>"#,
            gx + (group_w - 12.0) / 2.0,
            top + plot_h + 16.0,
            esc(cat)
        );
    }
    let names: Vec<&str> = series.iter().map(|(n, _)| *n).collect();
    legend(&mut out, left + plot_w + 10.0, &names);
    out.push_str("</svg>\n");
    out
}

fn heat_color(t: f64) -> String {
    // white → dark blue
    let t = t.clamp(0.0, 1.0);
    let lerp = |a: f64, b: f64| (a + (b - a) * t).round() as u8;
    format!("#{:02x}{:02x}{:02x}", lerp(255.0, 8.0), lerp(255.0, 48.0), lerp(255.0, 107.0))
}

/// Square heatmap with values printed in each cell.
pub fn heatmap(title: &str, labels: &[String], values: &[Vec<f64>], vmin: f64, vmax: f64) -> String {
    let k = labels.len();
    let cell = 40.0;
    let (left, top) = (60.0, 40.0);
    let (w, h) = (left + cell * k as f64 + 20.0, top + cell * k as f64 + 20.0);
    let mut out = String::new();
    header(&mut out, w, h, title);
    let span = if vmax > vmin { vmax - vmin } else { 1.0 };
    for i in 0..k {
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
            left - 4.0,
            top + cell * (i as f64 + 0.5) + 4.0,
            esc(&labels[i])
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            left + cell * (i as f64 + 0.5),
            top - 4.0,
            esc(&labels[i])
        );
        for j in 0..k {
            let v = values[i][j];
            let t = (v - vmin) / span;
            let _ = writeln!(
                out,
                r#"<rect x="{}" y="{}" width="{cell}" height="{cell}" fill="{}"/><text x="{}" y="{}" text-anchor="middle" font-size="9" fill="{}">{:.2}</text>"#,
                left + cell * j as f64,
                top + cell * i as f64,
                heat_color(t),
                left + cell * (j as f64 + 0.5),
                top + cell * (i as f64 + 0.5) + 3.0,
                if t > 0.5 { "white" } else { "black" },
                v
            );
        }
    }
    out.push_str("</svg>\n");
    out
}

/// Line plot of `(x, y)` series on linear axes.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[(&str, Vec<(f64, f64)>)]) -> String {
    let (left, top, bottom) = (60.0, 30.0, 40.0);
    let (plot_w, plot_h, legend_w) = (360.0, 220.0, 140.0);
    let (w, h) = (left + plot_w + legend_w, top + plot_h + bottom);
    let pts = || series.iter().flat_map(|(_, v)| v.iter().copied()).filter(|(x, y)| x.is_finite() && y.is_finite());
    let x_min = pts().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let x_max = pts().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let (x_min, x_max) = if x_min < x_max { (x_min, x_max) } else { (0.0, 1.0) };
    let y_max = nice_max(pts().map(|p| p.1).fold(0.0, f64::max));
    let mut out = String::new();
    header(&mut out, w, h, title);
    y_axis(&mut out, left, top, plot_h, plot_w, y_max, y_label);
    let sx = |x: f64| left + plot_w * (x - x_min) / (x_max - x_min);
    let sy = |y: f64| top + plot_h - plot_h * (y / y_max).clamp(0.0, 1.0);
    for k in 0..=4 {
        let x = x_min + (x_max - x_min) * k as f64 / 4.0;
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{}" text-anchor="middle">{}</text>"#,
            sx(x),
            top + plot_h + 14.0,
            fmt_tick((x * 100.0).round() / 100.0)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        left + plot_w / 2.0,
        h - 6.0,
        esc(x_label)
    );
    for (si, (_, v)) in series.iter().enumerate() {
        let path: Vec<String> = v
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let color = PALETTE[si % PALETTE.len()];
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            path.join(" ")
        );
    }
    let names: Vec<&str> = series.iter().map(|(n, _)| *n).collect();
    legend(&mut out, left + plot_w + 10.0, &names);
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn charts_are_wellformed() {
        let cats = vec!["B01".to_string(), "B02".to_string()];
        let s = bar_chart("t", "DN", &cats, &[("vessel", vec![900.0, 800.0]), ("sea", vec![100.0, 90.0])]);
        assert!(s.starts_with("<svg") && s.trim_end().ends_with("</svg>"));
        assert_eq!(s.matches("<rect x=").count(), 4 + 2);
        let hm = heatmap("h", &cats, &[vec![1.0, 0.5], vec![0.5, 1.0]], -1.0, 1.0);
        assert_eq!(hm.matches("<rect x=").count(), 4);
        let lc = line_chart("l", "x", "y", &[("a", vec![(0.0, 1.0), (1.0, 2.0)])]);
        assert!(lc.contains("<polyline"));
    }

    #[test]
    fn nice_max_rounds_up() {
        assert_eq!(nice_max(0.83), 1.0);
        assert_eq!(nice_max(900.0), 1000.0);
        assert_eq!(nice_max(0.0), 1.0);
        assert_eq!(nice_max(230.0), 250.0);
    }
}
