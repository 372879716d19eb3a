//! Static SVG summary of a trajectory: a two-coordinate projection, the
//! energy against time, and the average residual on log-log axes.
//!
//! Output depends only on the data, so repeated runs produce identical files.

use std::fmt::Write;

const PANEL_W: f64 = 320.0;
const PANEL_H: f64 = 260.0;
const MARGIN: f64 = 40.0;
const MAX_POINTS: usize = 2000;

/// Data for the three panels. Series share the time grid `times`.
pub struct PlotData<'a> {
    pub times: &'a [f64],
    /// Projection onto coordinates `(i, j)`.
    pub projection: (usize, usize),
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub energy: Option<&'a [f64]>,
    pub average_residual: &'a [f64],
}

struct Axes {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    left: f64,
}

impl Axes {
    fn fit(left: f64, xs: &[f64], ys: &[f64]) -> Self {
        let (x0, x1) = bounds(xs);
        let (y0, y1) = bounds(ys);
        Self { x0, x1, y0, y1, left }
    }

    fn map(&self, x: f64, y: f64) -> (f64, f64) {
        let px = self.left + MARGIN + (x - self.x0) / (self.x1 - self.x0) * (PANEL_W - 2.0 * MARGIN);
        let py = PANEL_H - MARGIN - (y - self.y0) / (self.y1 - self.y0) * (PANEL_H - 2.0 * MARGIN);
        (px, py)
    }
}

fn bounds(v: &[f64]) -> (f64, f64) {
    let finite = v.iter().copied().filter(|x| x.is_finite());
    let lo = finite.clone().fold(f64::INFINITY, f64::min);
    let hi = finite.fold(f64::NEG_INFINITY, f64::max);
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi - lo <= 1e-12 * lo.abs().max(1.0) {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn stride(n: usize) -> usize {
    n.div_ceil(MAX_POINTS).max(1)
}

fn panel(svg: &mut String, index: usize, title: &str, xlabel: &str, ylabel: &str, xs: &[f64], ys: &[f64]) {
    let left = index as f64 * PANEL_W;
    let keep: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .step_by(stride(xs.len()))
        .map(|(&x, &y)| (x, y))
        .filter(|(x, y)| x.is_finite() && y.is_finite())
        .collect();
    let (kx, ky): (Vec<f64>, Vec<f64>) = keep.iter().copied().unzip();
    let axes = Axes::fit(left, &kx, &ky);
    let (bx0, by0) = axes.map(axes.x0, axes.y0);
    let (bx1, by1) = axes.map(axes.x1, axes.y1);
    let _ = writeln!(
        svg,
        r#"<rect x="{bx0:.2}" y="{by1:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#,
        bx1 - bx0,
        by0 - by1
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="20" text-anchor="middle" font-size="13">{title}</text>"#,
        left + PANEL_W / 2.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="11">{xlabel}</text>"#,
        left + PANEL_W / 2.0,
        PANEL_H - 8.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" font-size="11" transform="rotate(-90 {:.2} {:.2})" text-anchor="middle">{ylabel}</text>"#,
        left + 12.0,
        PANEL_H / 2.0,
        left + 12.0,
        PANEL_H / 2.0
    );
    for (v, (x, y), anchor) in [
        (axes.x0, (bx0, by0 + 14.0), "start"),
        (axes.x1, (bx1, by0 + 14.0), "end"),
    ] {
        let _ = writeln!(
            svg,
            r#"<text x="{x:.2}" y="{y:.2}" font-size="9" text-anchor="{anchor}">{v:.3e}</text>"#
        );
    }
    for (v, y) in [(axes.y0, by0), (axes.y1, by1 + 9.0)] {
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{y:.2}" font-size="9">{v:.3e}</text>"#,
            bx0 + 2.0
        );
    }
    if keep.is_empty() {
        return;
    }
    let mut points = String::new();
    for &(x, y) in &keep {
        let (px, py) = axes.map(x, y);
        let _ = write!(points, "{px:.2},{py:.2} ");
    }
    let _ = writeln!(
        svg,
        r#"<polyline fill="none" stroke="steelblue" stroke-width="1" points="{}"/>"#,
        points.trim_end()
    );
}

pub fn render_svg(data: &PlotData) -> String {
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{:.0}" height="{:.0}" font-family="sans-serif">"#,
        3.0 * PANEL_W,
        PANEL_H
    );
    let (i, j) = data.projection;
    panel(
        &mut svg,
        0,
        "trajectory",
        &format!("x_{}", i + 1),
        &format!("x_{}", j + 1),
        &data.xs,
        &data.ys,
    );
    match data.energy {
        Some(e) => panel(&mut svg, 1, "energy", "t", "||x - x*||^2", data.times, e),
        None => panel(&mut svg, 1, "energy (no equilibrium)", "t", "", &[], &[]),
    }
    let (lt, lr): (Vec<f64>, Vec<f64>) = data
        .times
        .iter()
        .zip(data.average_residual)
        .filter(|(t, r)| **t > 0.0 && **r > 0.0)
        .map(|(t, r)| (t.log10(), r.log10()))
        .unzip();
    panel(&mut svg, 2, "average residual", "log10 t", "log10 ||A xbar - b||", &lt, &lr);
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data<'a>(times: &'a [f64], energy: &'a [f64], res: &'a [f64]) -> PlotData<'a> {
        PlotData {
            times,
            projection: (0, 1),
            xs: times.iter().map(|t| t.cos()).collect(),
            ys: times.iter().map(|t| -t.sin()).collect(),
            energy: Some(energy),
            average_residual: res,
        }
    }

    #[test]
    fn deterministic_and_well_formed() {
        let times: Vec<f64> = (0..5000).map(|i| i as f64 * 0.01).collect();
        let energy = vec![1.0; times.len()];
        let res: Vec<f64> = times.iter().map(|t| 1.0 / (1.0 + t)).collect();
        let a = render_svg(&data(&times, &energy, &res));
        let b = render_svg(&data(&times, &energy, &res));
        assert_eq!(a, b);
        assert!(a.starts_with("<svg") && a.ends_with("</svg>\n"));
        assert_eq!(a.matches("<polyline").count(), 3);
        assert!(!a.contains("NaN"));
    }

    #[test]
    fn tolerates_missing_energy() {
        let times = [0.0, 1.0];
        let mut d = data(&times, &[], &[0.0, 0.5]);
        d.energy = None;
        let svg = render_svg(&d);
        assert_eq!(svg.matches("<polyline").count(), 2);
    }
}
