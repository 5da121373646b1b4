//! Minimal SVG 1.1 line and bar charts.
//!
//! Coordinates are printed with two decimals so output bytes depend only on
//! the data.

use std::fmt::Write;

use super::fmt_g;

pub(crate) const PALETTE: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

const WIDTH: f64 = 640.0;
const PANEL_HEIGHT: f64 = 360.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Tick label with at most four significant digits.
fn tick_label(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let digits = 3 - v.abs().log10().floor() as i32;
    let scale = 10f64.powi(digits);
    fmt_g((v * scale).round() / scale)
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if !(lo.is_finite() && hi.is_finite()) {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 * hi.abs().max(1.0) {
        let pad = 0.5 * hi.abs().max(1.0);
        return (lo - pad, hi + pad);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

pub(crate) struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub dashed: bool,
}

pub(crate) struct Panel {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub kind: PanelKind,
}

pub(crate) enum PanelKind {
    Lines(Vec<Series>),
    /// Bars at integer positions `(x, height)`; `x` is shown as the category.
    Bars {
        bars: Vec<(f64, f64)>,
        baseline: f64,
    },
}

impl Panel {
    fn ranges(&self) -> ((f64, f64), (f64, f64)) {
        let mut xs = (f64::INFINITY, f64::NEG_INFINITY);
        let mut ys = (f64::INFINITY, f64::NEG_INFINITY);
        let mut grow = |x: f64, y: f64| {
            if x.is_finite() && y.is_finite() {
                xs = (xs.0.min(x), xs.1.max(x));
                ys = (ys.0.min(y), ys.1.max(y));
            }
        };
        match &self.kind {
            PanelKind::Lines(series) => {
                for s in series {
                    for &(x, y) in &s.points {
                        grow(x, y);
                    }
                }
                (padded(xs.0, xs.1), padded(ys.0, ys.1))
            }
            PanelKind::Bars { bars, baseline } => {
                for &(x, y) in bars {
                    grow(x - 0.5, y);
                    grow(x + 0.5, *baseline);
                }
                let (ylo, yhi) = padded(ys.0, ys.1);
                ((xs.0, xs.1), (ylo.min(*baseline), yhi))
            }
        }
    }

    fn render(&self, out: &mut String, y0: f64) {
        let ((xlo, xhi), (ylo, yhi)) = self.ranges();
        let (xlo, xhi) = if xhi > xlo {
            (xlo, xhi)
        } else {
            (xlo - 0.5, xlo + 0.5)
        };
        let plot_w = WIDTH - LEFT - RIGHT;
        let plot_h = PANEL_HEIGHT - TOP - BOTTOM;
        let px = |x: f64| LEFT + (x - xlo) / (xhi - xlo) * plot_w;
        let py = |y: f64| y0 + TOP + (yhi - y) / (yhi - ylo) * plot_h;

        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="14">{}</text>"#,
            WIDTH / 2.0,
            y0 + 22.0,
            escape(&self.title)
        );
        let _ = writeln!(
            out,
            r##"<rect x="{LEFT:.2}" y="{:.2}" width="{plot_w:.2}" height="{plot_h:.2}" fill="none" stroke="#000"/>"##,
            y0 + TOP
        );
        for i in 0..=4 {
            let fx = xlo + (xhi - xlo) * f64::from(i) / 4.0;
            let fy = ylo + (yhi - ylo) * f64::from(i) / 4.0;
            let _ = writeln!(
                out,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="11">{}</text>"#,
                px(fx),
                y0 + PANEL_HEIGHT - BOTTOM + 16.0,
                tick_label(fx)
            );
            let _ = writeln!(
                out,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="end" font-size="11">{}</text>"#,
                LEFT - 6.0,
                py(fy) + 4.0,
                tick_label(fy)
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="12">{}</text>"#,
            LEFT + plot_w / 2.0,
            y0 + PANEL_HEIGHT - 12.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            out,
            r#"<text x="16" y="{:.2}" text-anchor="middle" font-size="12" transform="rotate(-90 16 {:.2})">{}</text>"#,
            y0 + TOP + plot_h / 2.0,
            y0 + TOP + plot_h / 2.0,
            escape(&self.y_label)
        );

        match &self.kind {
            PanelKind::Lines(series) => {
                for (n, s) in series.iter().enumerate() {
                    let color = PALETTE[n % PALETTE.len()];
                    let pts: Vec<String> = s
                        .points
                        .iter()
                        .filter(|(x, y)| x.is_finite() && y.is_finite())
                        .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
                        .collect();
                    let dash = if s.dashed {
                        r#" stroke-dasharray="6 4""#
                    } else {
                        ""
                    };
                    let _ = writeln!(
                        out,
                        r#"<polyline fill="none" stroke="{color}" stroke-width="1.5"{dash} points="{}"/>"#,
                        pts.join(" ")
                    );
                    let ly = y0 + TOP + 14.0 + 16.0 * n as f64;
                    let _ = writeln!(
                        out,
                        r#"<line x1="{:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="1.5"{dash}/>"#,
                        LEFT + 10.0,
                        LEFT + 34.0
                    );
                    let _ = writeln!(
                        out,
                        r#"<text x="{:.2}" y="{:.2}" font-size="11">{}</text>"#,
                        LEFT + 40.0,
                        ly + 4.0,
                        escape(&s.label)
                    );
                }
            }
            PanelKind::Bars { bars, baseline } => {
                let bw = plot_w / (xhi - xlo) * 0.8;
                for &(x, y) in bars {
                    if !y.is_finite() {
                        continue;
                    }
                    let (top, bottom) = if y >= *baseline {
                        (py(y), py(*baseline))
                    } else {
                        (py(*baseline), py(y))
                    };
                    let _ = writeln!(
                        out,
                        r#"<rect x="{:.2}" y="{top:.2}" width="{bw:.2}" height="{:.2}" fill="{}"/>"#,
                        px(x) - bw / 2.0,
                        bottom - top,
                        PALETTE[0]
                    );
                }
            }
        }
    }
}

/// Stacks `panels` vertically in one SVG document.
pub(crate) fn render(panels: &[Panel]) -> String {
    let height = PANEL_HEIGHT * panels.len() as f64;
    let mut out = String::new();
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH:.0}" height="{height:.0}" viewBox="0 0 {WIDTH:.0} {height:.0}" font-family="sans-serif">"#
    );
    let _ = writeln!(out, r##"<rect width="100%" height="100%" fill="#fff"/>"##);
    for (i, p) in panels.iter().enumerate() {
        p.render(&mut out, PANEL_HEIGHT * i as f64);
    }
    out.push_str("</svg>\n");
    out
}
