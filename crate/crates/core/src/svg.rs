//! Static hexagonal map renderings.
//!
//! Hexagons are pointy-top with unit spacing, laid out exactly like the
//! neuron embedding. Counts use a linear white-to-blue scale; relevance
//! weights use a blue-white-red scale on `ln λ`, symmetric around 0.

use std::fmt::Write;

use crate::topology::MapGrid;
use crate::weights::WeightMatrix;

const SCALE: f64 = 40.0;
const MARGIN: f64 = 30.0;
const TITLE_SPACE: f64 = 24.0;

fn hex_points(cx: f64, cy: f64) -> String {
    let r = SCALE / 3f64.sqrt();
    let mut s = String::new();
    for k in 0..6 {
        let a = std::f64::consts::PI / 180.0 * (60.0 * k as f64 - 90.0);
        if k > 0 {
            s.push(' ');
        }
        let _ = write!(s, "{:.2},{:.2}", cx + r * a.cos(), cy + r * a.sin());
    }
    s
}

fn rgb(c: (f64, f64, f64)) -> String {
    let q = |v: f64| (v.clamp(0.0, 1.0) * 255.0).round() as u8;
    format!("#{:02x}{:02x}{:02x}", q(c.0), q(c.1), q(c.2))
}

fn lerp(a: (f64, f64, f64), b: (f64, f64, f64), t: f64) -> (f64, f64, f64) {
    (
        a.0 + (b.0 - a.0) * t,
        a.1 + (b.1 - a.1) * t,
        a.2 + (b.2 - a.2) * t,
    )
}

const WHITE: (f64, f64, f64) = (1.0, 1.0, 1.0);
const BLUE: (f64, f64, f64) = (0.129, 0.4, 0.675);
const RED: (f64, f64, f64) = (0.698, 0.094, 0.169);

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// One hexagon per neuron, filled by `fill(m)` and labelled by `label(m)`.
fn render(
    grid: &MapGrid,
    title: &str,
    fill: impl Fn(usize) -> String,
    label: impl Fn(usize) -> String,
) -> String {
    let width = (grid.cols() as f64 + 0.5) * SCALE + 2.0 * MARGIN;
    let height = ((grid.rows() as f64 - 1.0) * 3f64.sqrt() / 2.0 + 2.0 / 3f64.sqrt()) * SCALE
        + 2.0 * MARGIN
        + TITLE_SPACE;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="14">{}</text>"#,
        MARGIN,
        MARGIN * 0.5 + 8.0,
        escape(title)
    );
    let top = MARGIN + TITLE_SPACE + SCALE / 3f64.sqrt();
    for m in 0..grid.len() {
        let (x, y) = grid.position(m);
        let cx = MARGIN + SCALE * (x + 0.5);
        let cy = top + SCALE * y;
        let _ = writeln!(
            s,
            r##"<polygon points="{}" fill="{}" stroke="#555555" stroke-width="1"/>"##,
            hex_points(cx, cy),
            fill(m)
        );
        let _ = writeln!(
            s,
            r#"<text x="{cx:.2}" y="{:.2}" font-family="sans-serif" font-size="10" text-anchor="middle">{}</text>"#,
            cy + 3.5,
            escape(&label(m))
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Object counts per neuron.
pub fn counts_svg(grid: &MapGrid, counts: &[usize]) -> String {
    let max = counts.iter().copied().max().unwrap_or(0).max(1) as f64;
    render(
        grid,
        "objects per neuron",
        |m| rgb(lerp(WHITE, BLUE, counts[m] as f64 / max)),
        |m| counts[m].to_string(),
    )
}

/// One relevance weight per neuron on a log scale.
pub fn weights_svg(grid: &MapGrid, values: &[f64], title: &str) -> String {
    let logs: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let span = logs.iter().fold(0.0f64, |a, l| a.max(l.abs()));
    render(
        grid,
        title,
        |m| {
            let t = if span > 0.0 { logs[m] / span } else { 0.0 };
            if t >= 0.0 {
                rgb(lerp(WHITE, RED, t))
            } else {
                rgb(lerp(WHITE, BLUE, -t))
            }
        },
        |m| format!("{:.2}", values[m]),
    )
}

fn file_stem(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// File name and contents of every weight map: `weights-<var>.svg` for
/// variable schemes, `weights-<var>-mean.svg` and
/// `weights-<var>-dispersion.svg` for component schemes.
pub fn weight_maps(
    grid: &MapGrid,
    weights: &WeightMatrix,
    variables: &[String],
) -> Vec<(String, String)> {
    let mut out = Vec::new();
    let per_neuron = |f: &dyn Fn(usize) -> f64| -> Vec<f64> { (0..grid.len()).map(f).collect() };
    for (j, var) in variables.iter().enumerate() {
        let stem = file_stem(var);
        if weights.scheme().is_component_wise() {
            let mean = per_neuron(&|m| weights.component_weights(m, j).0);
            let disp = per_neuron(&|m| weights.component_weights(m, j).1);
            out.push((
                format!("weights-{stem}-mean.svg"),
                weights_svg(grid, &mean, &format!("{var}: mean component weight")),
            ));
            out.push((
                format!("weights-{stem}-dispersion.svg"),
                weights_svg(grid, &disp, &format!("{var}: dispersion component weight")),
            ));
        } else {
            let w = per_neuron(&|m| weights.component_weights(m, j).0);
            out.push((
                format!("weights-{stem}.svg"),
                weights_svg(grid, &w, &format!("{var}: weight")),
            ));
        }
    }
    out
}
