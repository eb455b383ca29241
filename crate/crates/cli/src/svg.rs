//! Minimal SVG line plots for experiment reports. No plotting dependency:
//! the output is a fixed-layout two-panel chart with axes, ticks, and
//! polyline series.

use std::fmt::Write as _;
use std::path::Path;

use crate::errors::CliResult;

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub color: &'static str,
}

pub struct Panel {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

const PANEL_W: f64 = 420.0;
const PANEL_H: f64 = 320.0;
const MARGIN_L: f64 = 64.0;
const MARGIN_B: f64 = 48.0;
const MARGIN_T: f64 = 36.0;
const MARGIN_R: f64 = 16.0;

pub fn write_panels(path: &Path, panels: &[Panel]) -> CliResult<()> {
    let total_w = PANEL_W * panels.len() as f64;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{total_w}" height="{PANEL_H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{total_w}" height="{PANEL_H}" fill="white"/>"#);
    for (i, panel) in panels.iter().enumerate() {
        render_panel(&mut svg, panel, i as f64 * PANEL_W);
    }
    svg.push_str("</svg>\n");
    std::fs::write(path, svg)?;
    Ok(())
}

fn nice_ticks(lo: f64, hi: f64) -> Vec<f64> {
    if !(hi > lo) {
        return vec![lo];
    }
    let raw_step = (hi - lo) / 4.0;
    let mag = 10f64.powf(raw_step.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| (hi - lo) / s <= 5.0)
        .unwrap_or(mag * 10.0);
    let start = (lo / step).ceil() * step;
    let mut ticks = Vec::new();
    let mut t = start;
    while t <= hi + step * 1e-9 {
        ticks.push(t);
        t += step;
    }
    ticks
}

fn render_panel(svg: &mut String, panel: &Panel, x_off: f64) {
    let (mut x_lo, mut x_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let (y_lo, mut y_hi) = (0.0f64, f64::NEG_INFINITY);
    for s in panel.series.iter() {
        for &(x, y) in s.points.iter() {
            x_lo = x_lo.min(x);
            x_hi = x_hi.max(x);
            y_hi = y_hi.max(y);
        }
    }
    if !x_lo.is_finite() {
        x_lo = 0.0;
        x_hi = 1.0;
    }
    if !y_hi.is_finite() || y_hi <= 0.0 {
        y_hi = 1.0;
    }
    y_hi *= 1.08;
    if x_hi <= x_lo {
        x_hi = x_lo + 1.0;
    }

    let plot_w = PANEL_W - MARGIN_L - MARGIN_R;
    let plot_h = PANEL_H - MARGIN_T - MARGIN_B;
    let to_px = |x: f64, y: f64| -> (f64, f64) {
        (
            x_off + MARGIN_L + (x - x_lo) / (x_hi - x_lo) * plot_w,
            MARGIN_T + (1.0 - (y - y_lo) / (y_hi - y_lo)) * plot_h,
        )
    };

    // frame and title
    let _ = writeln!(
        svg,
        r#"<rect x="{:.1}" y="{MARGIN_T}" width="{plot_w:.1}" height="{plot_h:.1}" fill="none" stroke="black"/>"#,
        x_off + MARGIN_L
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="20" text-anchor="middle" font-weight="bold">{}</text>"#,
        x_off + MARGIN_L + plot_w / 2.0,
        panel.title
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        x_off + MARGIN_L + plot_w / 2.0,
        PANEL_H - 10.0,
        panel.x_label
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" transform="rotate(-90 {:.1} {:.1})">{}</text>"#,
        x_off + 16.0,
        MARGIN_T + plot_h / 2.0,
        x_off + 16.0,
        MARGIN_T + plot_h / 2.0,
        panel.y_label
    );

    for t in nice_ticks(x_lo, x_hi) {
        let (px, py) = to_px(t, y_lo);
        let _ = writeln!(svg, r#"<line x1="{px:.1}" y1="{py:.1}" x2="{px:.1}" y2="{:.1}" stroke="black"/>"#, py + 4.0);
        let _ = writeln!(
            svg,
            r#"<text x="{px:.1}" y="{:.1}" text-anchor="middle">{t}</text>"#,
            py + 16.0
        );
    }
    for t in nice_ticks(y_lo, y_hi) {
        let (px, py) = to_px(x_lo, t);
        let _ = writeln!(svg, r#"<line x1="{:.1}" y1="{py:.1}" x2="{px:.1}" y2="{py:.1}" stroke="black"/>"#, px - 4.0);
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{t:.3}</text>"#,
            px - 6.0,
            py + 4.0
        );
    }

    for (si, s) in panel.series.iter().enumerate() {
        let mut sorted = s.points.clone();
        sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let path: Vec<String> = sorted
            .iter()
            .map(|&(x, y)| {
                let (px, py) = to_px(x, y);
                format!("{px:.1},{py:.1}")
            })
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="2"/>"#,
            path.join(" "),
            s.color
        );
        for &(x, y) in sorted.iter() {
            let (px, py) = to_px(x, y);
            let _ = writeln!(svg, r#"<circle cx="{px:.1}" cy="{py:.1}" r="3" fill="{}"/>"#, s.color);
        }
        // legend
        let ly = MARGIN_T + 14.0 + 16.0 * si as f64;
        let lx = x_off + MARGIN_L + 10.0;
        let _ = writeln!(svg, r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{}" stroke-width="2"/>"#, lx + 18.0, s.color);
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}">{}</text>"#,
            lx + 24.0,
            ly + 4.0,
            s.label
        );
    }
}
