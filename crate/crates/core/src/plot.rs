//! Log-log SVG plots of error against sample size.

use std::fmt::Write;

use crate::harness::RateReport;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 64.0;

struct Axes {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Axes {
    fn px(&self, lx: f64) -> f64 {
        MARGIN + (lx - self.x0) / (self.x1 - self.x0) * (WIDTH - 2.0 * MARGIN)
    }

    fn py(&self, ly: f64) -> f64 {
        HEIGHT - MARGIN - (ly - self.y0) / (self.y1 - self.y0) * (HEIGHT - 2.0 * MARGIN)
    }
}

fn decade_ticks(lo: f64, hi: f64) -> Vec<i32> {
    let a = (lo / std::f64::consts::LN_10).floor() as i32;
    let b = (hi / std::f64::consts::LN_10).ceil() as i32;
    (a..=b).collect()
}

/// Renders the per-`n` statistics, the fitted line and (if known) a theory
/// line of the theoretical slope through the first point.
pub fn render_svg(report: &RateReport, title: &str) -> String {
    let pts: Vec<(f64, f64)> =
        report.ns.iter().zip(&report.stats).filter(|(_, s)| **s > 0.0 && s.is_finite()).map(|(&n, &s)| ((n as f64).ln(), s.ln())).collect();
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#, WIDTH / 2.0, escape(title));
    if pts.is_empty() {
        let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle">no positive error statistics</text>"#, WIDTH / 2.0, HEIGHT / 2.0);
        svg.push_str("</svg>\n");
        return svg;
    }
    let (mut x0, mut x1) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in &pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    let padx = ((x1 - x0) * 0.05).max(0.1);
    let pady = ((y1 - y0) * 0.1).max(0.1);
    let ax = Axes { x0: x0 - padx, x1: x1 + padx, y0: y0 - pady, y1: y1 + pady };

    let _ = writeln!(
        svg,
        r#"<g stroke="black" fill="none"><line x1="{m}" y1="{b}" x2="{r}" y2="{b}"/><line x1="{m}" y1="{t}" x2="{m}" y2="{b}"/></g>"#,
        m = MARGIN,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN,
        t = MARGIN
    );
    for e in decade_ticks(ax.x0, ax.x1) {
        let lx = e as f64 * std::f64::consts::LN_10;
        if lx < ax.x0 || lx > ax.x1 {
            continue;
        }
        let x = ax.px(lx);
        let _ = writeln!(
            svg,
            r#"<line x1="{x:.2}" y1="{}" x2="{x:.2}" y2="{}" stroke="black"/><text x="{x:.2}" y="{}" text-anchor="middle">1e{e}</text>"#,
            HEIGHT - MARGIN,
            HEIGHT - MARGIN + 5.0,
            HEIGHT - MARGIN + 20.0
        );
    }
    for e in decade_ticks(ax.y0, ax.y1) {
        let ly = e as f64 * std::f64::consts::LN_10;
        if ly < ax.y0 || ly > ax.y1 {
            continue;
        }
        let y = ax.py(ly);
        let _ = writeln!(
            svg,
            r#"<line x1="{}" y1="{y:.2}" x2="{MARGIN}" y2="{y:.2}" stroke="black"/><text x="{}" y="{:.2}" text-anchor="end">1e{e}</text>"#,
            MARGIN - 5.0,
            MARGIN - 8.0,
            y + 4.0
        );
    }
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle">n</text>"#, WIDTH / 2.0, HEIGHT - 16.0);
    let _ =
        writeln!(svg, r#"<text x="18" y="{}" text-anchor="middle" transform="rotate(-90 18 {})">error</text>"#, HEIGHT / 2.0, HEIGHT / 2.0);

    for &(x, y) in &pts {
        let _ = writeln!(svg, r#"<circle class="point" cx="{:.2}" cy="{:.2}" r="4" fill="steelblue"/>"#, ax.px(x), ax.py(y));
    }
    let (lx0, lx1) = (pts[0].0, pts[pts.len() - 1].0);
    if let Some(fit) = report.fit {
        let line = |lx: f64| fit.intercept + fit.slope * lx;
        let _ = writeln!(
            svg,
            r#"<line class="fit" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="crimson" stroke-width="2"/>"#,
            ax.px(lx0),
            ax.py(line(lx0)),
            ax.px(lx1),
            ax.py(line(lx1))
        );
    }
    if let Some(theory) = report.theory {
        let anchor = pts[0].1;
        let line = |lx: f64| anchor + theory * (lx - lx0);
        let _ = writeln!(
            svg,
            r#"<line class="theory" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="gray" stroke-width="2" stroke-dasharray="6 4"/>"#,
            ax.px(lx0),
            ax.py(line(lx0)),
            ax.px(lx1),
            ax.py(line(lx1))
        );
    }
    let mut legend = Vec::new();
    if let Some(fit) = report.fit {
        legend.push(("crimson", format!("fit slope {:.3}", fit.slope)));
    }
    if let Some(t) = report.theory {
        legend.push(("gray", format!("theory slope {t:.3}")));
    }
    for (i, (color, label)) in legend.iter().enumerate() {
        let y = MARGIN + 16.0 * i as f64;
        let _ = writeln!(
            svg,
            r#"<line x1="{}" y1="{y}" x2="{}" y2="{y}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
            WIDTH - MARGIN - 150.0,
            WIDTH - MARGIN - 126.0,
            WIDTH - MARGIN - 120.0,
            y + 4.0,
            escape(label)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
