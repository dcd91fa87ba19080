//! Static SVG figures: opinion-space scatter and sweep error curves.

use std::collections::BTreeSet;
use std::fmt::Write;

use crate::lnp::SweepSummary;
use crate::manifold::Metric;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f",
];

/// One entity in a scatter plot.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatterPoint {
    pub id: String,
    pub x: f64,
    pub y: f64,
    pub class: String,
    /// Optional size channel (variation, representativeness).
    pub size: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotOptions {
    pub width: f64,
    pub height: f64,
    pub margin: f64,
    pub min_radius: f64,
    pub max_radius: f64,
    pub title: Option<String>,
}

impl Default for PlotOptions {
    fn default() -> Self {
        PlotOptions {
            width: 640.0,
            height: 480.0,
            margin: 40.0,
            min_radius: 3.0,
            max_radius: 12.0,
            title: None,
        }
    }
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            _ => out.push(c),
        }
    }
    out
}

fn header(out: &mut String, o: &PlotOptions) {
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#,
        w = o.width,
        h = o.height
    );
    let _ = writeln!(out, r#"<rect x="0" y="0" width="{}" height="{}" fill="white"/>"#, o.width, o.height);
    if let Some(t) = &o.title {
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="20" font-family="sans-serif" font-size="14" text-anchor="middle">{}</text>"#,
            o.width / 2.0,
            escape(t)
        );
    }
}

/// Linear map of `[lo, hi]` onto `[a, b]`; a degenerate range maps to the midpoint.
fn scale(v: f64, lo: f64, hi: f64, a: f64, b: f64) -> f64 {
    if hi > lo {
        a + (v - lo) / (hi - lo) * (b - a)
    } else {
        (a + b) / 2.0
    }
}

fn extent(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    vals.filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

/// Scatter of 2-D points colored by class.
///
/// Axes carry no labels since MDS axes are arbitrary. Radii scale linearly
/// from `min_radius` to `max_radius` over the size channel; a constant or
/// missing channel gives the midpoint radius.
pub fn plot_scatter(points: &[ScatterPoint], o: &PlotOptions) -> String {
    let classes: Vec<&str> = points
        .iter()
        .map(|p| p.class.as_str())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let color = |c: &str| PALETTE[classes.iter().position(|&k| k == c).unwrap_or(0) % PALETTE.len()];
    let legend_w = 120.0;
    let (x0, x1) = (o.margin, o.width - o.margin - legend_w);
    let (y0, y1) = (o.height - o.margin, o.margin);
    let (xlo, xhi) = extent(points.iter().map(|p| p.x));
    let (ylo, yhi) = extent(points.iter().map(|p| p.y));
    let (slo, shi) = extent(points.iter().filter_map(|p| p.size));

    let mut out = String::new();
    header(&mut out, o);
    let _ = writeln!(
        out,
        r#"<rect x="{x0:.2}" y="{y1:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="gray"/>"#,
        x1 - x0,
        y0 - y1
    );
    for p in points {
        let cx = scale(p.x, xlo, xhi, x0 + o.max_radius, x1 - o.max_radius);
        let cy = scale(p.y, ylo, yhi, y0 - o.max_radius, y1 + o.max_radius);
        let r = match p.size {
            Some(s) => scale(s, slo, shi, o.min_radius, o.max_radius),
            None => (o.min_radius + o.max_radius) / 2.0,
        };
        let _ = writeln!(
            out,
            r#"<circle cx="{cx:.2}" cy="{cy:.2}" r="{r:.2}" fill="{}" fill-opacity="0.6" stroke="{0}"/>"#,
            color(&p.class)
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="10">{}</text>"#,
            cx + r + 2.0,
            cy + 3.0,
            escape(&p.id)
        );
    }
    let lx = o.width - o.margin - legend_w + 15.0;
    for (i, c) in classes.iter().enumerate() {
        let ly = o.margin + 10.0 + 18.0 * i as f64;
        let _ = writeln!(out, r#"<circle cx="{lx:.2}" cy="{ly:.2}" r="5" fill="{}"/>"#, color(c));
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="11">{}</text>"#,
            lx + 10.0,
            ly + 4.0,
            escape(c)
        );
    }
    out.push_str("</svg>\n");
    out
}

fn metric_color(m: Metric) -> &'static str {
    match m {
        Metric::Euclidean => PALETTE[0],
        Metric::Geodesic => PALETTE[1],
    }
}

/// Median error against k, one panel per label count, one line per metric
/// with a shaded band between the 2.5 and 97.5 percentiles.
pub fn plot_error_curves(summary: &[SweepSummary], o: &PlotOptions) -> String {
    let counts: Vec<usize> = summary.iter().map(|s| s.label_count).collect::<BTreeSet<_>>().into_iter().collect();
    let metrics: Vec<Metric> = [Metric::Euclidean, Metric::Geodesic]
        .into_iter()
        .filter(|m| summary.iter().any(|s| s.metric == *m))
        .collect();
    let (klo, khi) = extent(summary.iter().map(|s| s.k as f64));
    let (_, ehi) = extent(summary.iter().map(|s| s.hi));
    let ehi = if ehi.is_finite() && ehi > 0.0 { ehi } else { 1.0 };

    let mut out = String::new();
    header(&mut out, o);
    let panels = counts.len().max(1) as f64;
    let pw = (o.width - o.margin * (panels + 1.0)) / panels;
    let (py0, py1) = (o.height - o.margin, o.margin + 20.0);
    for (pi, &lc) in counts.iter().enumerate() {
        let px0 = o.margin + pi as f64 * (pw + o.margin);
        let px1 = px0 + pw;
        let _ = writeln!(
            out,
            r#"<rect x="{px0:.2}" y="{py1:.2}" width="{pw:.2}" height="{:.2}" fill="none" stroke="gray"/>"#,
            py0 - py1
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="11" text-anchor="middle">{lc} labels</text>"#,
            (px0 + px1) / 2.0,
            py1 - 6.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="10" text-anchor="middle">k</text>"#,
            (px0 + px1) / 2.0,
            py0 + 16.0
        );
        if pi == 0 {
            let _ = writeln!(
                out,
                r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="10" text-anchor="end">{ehi}</text>"#,
                px0 - 4.0,
                py1 + 4.0
            );
            let _ = writeln!(
                out,
                r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="10" text-anchor="end">0</text>"#,
                px0 - 4.0,
                py0
            );
        }
        let sx = |k: usize| scale(k as f64, klo, khi, px0, px1);
        let sy = |e: f64| scale(e, 0.0, ehi, py0, py1);
        for &m in &metrics {
            let mut rows: Vec<&SweepSummary> =
                summary.iter().filter(|s| s.metric == m && s.label_count == lc).collect();
            rows.sort_by_key(|s| s.k);
            if rows.is_empty() {
                continue;
            }
            let c = metric_color(m);
            let mut band = String::new();
            for s in &rows {
                let _ = write!(band, "{:.2},{:.2} ", sx(s.k), sy(s.hi));
            }
            for s in rows.iter().rev() {
                let _ = write!(band, "{:.2},{:.2} ", sx(s.k), sy(s.lo));
            }
            let _ = writeln!(
                out,
                r#"<polygon points="{}" fill="{c}" fill-opacity="0.2" stroke="none"/>"#,
                band.trim_end()
            );
            let line: Vec<String> = rows.iter().map(|s| format!("{:.2},{:.2}", sx(s.k), sy(s.median))).collect();
            let _ = writeln!(
                out,
                r#"<polyline points="{}" fill="none" stroke="{c}" stroke-width="1.5"/>"#,
                line.join(" ")
            );
        }
    }
    for (i, m) in metrics.iter().enumerate() {
        let lx = o.margin + 110.0 * i as f64;
        let ly = o.height - 10.0;
        let _ = writeln!(
            out,
            r#"<line x1="{lx:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{}" stroke-width="2"/>"#,
            ly - 4.0,
            lx + 20.0,
            ly - 4.0,
            metric_color(*m)
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{ly:.2}" font-family="sans-serif" font-size="11">{m}</text>"#,
            lx + 25.0
        );
    }
    out.push_str("</svg>\n");
    out
}
