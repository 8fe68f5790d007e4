//! Static SVG line plots.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{LabError, Result};
use crate::model_sum::loglog_slope;

use super::table::Table;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 60.0;

/// A rendered plot with the fitted log-log slope when both axes are logarithmic.
#[derive(Debug, Clone, PartialEq)]
pub struct Plot {
    pub svg: String,
    pub slope: Option<f64>,
}

/// Reads `table` and writes `out` with `y_col` against `x_col`.
pub fn emit_plot(table: &Path, x_col: &str, y_col: &str, log_axes: bool, out: &Path) -> Result<Plot> {
    let t = Table::read_csv(std::fs::File::open(table)?)?;
    let plot = render(&t, x_col, y_col, log_axes)?;
    std::fs::write(out, &plot.svg)?;
    Ok(plot)
}

pub fn render(t: &Table, x_col: &str, y_col: &str, log_axes: bool) -> Result<Plot> {
    let xs = t.numbers(x_col)?;
    let ys = t.numbers(y_col)?;
    if xs.is_empty() {
        return Err(LabError::invalid("table", "no rows"));
    }
    if log_axes {
        if let Some(v) = xs.iter().chain(&ys).find(|v| !(**v > 0.0)) {
            return Err(LabError::invalid("log_axes", format!("non-positive value {v}")));
        }
    }
    let tx = |v: f64| if log_axes { v.log10() } else { v };
    let px: Vec<f64> = xs.iter().map(|&v| tx(v)).collect();
    let py: Vec<f64> = ys.iter().map(|&v| tx(v)).collect();
    let span = |v: &[f64]| {
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if hi > lo { (lo, hi) } else { (lo - 0.5, hi + 0.5) }
    };
    let (x0, x1) = span(&px);
    let (y0, y1) = span(&py);
    let sx = |v: f64| MARGIN + (v - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let sy = |v: f64| HEIGHT - MARGIN - (v - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#);
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let (l, r, b, top) = (MARGIN, WIDTH - MARGIN, HEIGHT - MARGIN, MARGIN);
    let _ = writeln!(svg, r#"<path d="M{l} {top} L{l} {b} L{r} {b}" stroke="black" fill="none"/>"#);
    let axis = |name: &str| if log_axes { format!("log10 {name}") } else { name.to_string() };
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle" font-size="14">{}</text>"#, WIDTH / 2.0, HEIGHT - 20.0, escape(&axis(x_col)));
    let _ = writeln!(
        svg,
        r#"<text x="18" y="{}" text-anchor="middle" font-size="14" transform="rotate(-90 18 {})">{}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(&axis(y_col))
    );
    for (v, anchor) in [(x0, "start"), (x1, "end")] {
        let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="{anchor}" font-size="11">{}</text>"#, sx(v), b + 16.0, tick(v));
    }
    for v in [y0, y1] {
        let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="end" font-size="11">{}</text>"#, l - 6.0, sy(v) + 4.0, tick(v));
    }
    if px.len() > 1 {
        let pts: Vec<String> = px.iter().zip(&py).map(|(&a, &c)| format!("{:.2},{:.2}", sx(a), sy(c))).collect();
        let _ = writeln!(svg, r#"<polyline points="{}" stroke="steelblue" stroke-width="2" fill="none"/>"#, pts.join(" "));
    }
    for (&a, &c) in px.iter().zip(&py) {
        let _ = writeln!(svg, r#"<circle cx="{:.2}" cy="{:.2}" r="3.5" fill="steelblue"/>"#, sx(a), sy(c));
    }
    let slope = (log_axes && xs.len() > 1).then(|| loglog_slope(&xs, &ys));
    if let Some(s) = slope {
        let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="end" font-size="13">fitted slope {s:.4}</text>"#, r, top - 12.0);
    }
    svg.push_str("</svg>\n");
    Ok(Plot { svg, slope })
}

fn tick(v: f64) -> String {
    format!("{v:.3}")
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
