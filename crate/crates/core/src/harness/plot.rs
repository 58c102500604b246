//! Log-log SVG scatter plots of result tables.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::io::Table;
use crate::error::{LrpError, Result};
use crate::fit::fit_power_law;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlotKind {
    GapScaling,
    DiameterScaling,
    ClusterStats,
    Heatkernel,
}

impl PlotKind {
    pub fn columns(self) -> (&'static str, &'static str) {
        match self {
            PlotKind::GapScaling => ("N", "gap"),
            PlotKind::DiameterScaling => ("N", "diameter"),
            PlotKind::ClusterStats => ("N", "c2"),
            PlotKind::Heatkernel => ("t", "psi"),
        }
    }
}

const W: f64 = 640.0;
const H: f64 = 480.0;
const M: f64 = 60.0;

fn minus(s: String) -> String {
    s.replace('-', "\u{2212}")
}

/// Renders the table's `(x, y)` columns on log-log axes with a fitted
/// line. A `reference_slope` metadata entry is annotated when present.
pub fn emit_plot(csv: &str, kind: PlotKind) -> Result<String> {
    let table = Table::parse(csv)?;
    let (xc, yc) = kind.columns();
    let xs = table.floats(xc)?;
    let ys = table.floats(yc)?;
    let pts: Vec<(f64, f64)> = xs
        .into_iter()
        .zip(ys)
        .filter(|&(x, y)| x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite())
        .collect();
    if pts.is_empty() {
        return Err(LrpError::Schema(format!("no positive ({xc}, {yc}) points to plot")));
    }
    let lx: Vec<f64> = pts.iter().map(|p| p.0.log10()).collect();
    let ly: Vec<f64> = pts.iter().map(|p| p.1.log10()).collect();
    let span = |v: &[f64]| {
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min).floor();
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max).ceil();
        if hi > lo { (lo, hi) } else { (lo - 0.5, hi + 0.5) }
    };
    let (x0, x1) = span(&lx);
    let (y0, y1) = span(&ly);
    let px = |v: f64| M + (v - x0) / (x1 - x0) * (W - 2.0 * M);
    let py = |v: f64| H - M - (v - y0) / (y1 - y0) * (H - 2.0 * M);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{M}" y="{M}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - 2.0 * M,
        H - 2.0 * M
    );
    for e in (x0 as i64)..=(x1 as i64) {
        let x = px(e as f64);
        let _ = writeln!(
            s,
            r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">1e{}</text>"#,
            H - M,
            H - M + 5.0,
            H - M + 18.0,
            minus(e.to_string())
        );
    }
    for e in (y0 as i64)..=(y1 as i64) {
        let y = py(e as f64);
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{y:.2}" x2="{M}" y2="{y:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">1e{}</text>"#,
            M - 5.0,
            M - 8.0,
            y + 4.0,
            minus(e.to_string())
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{xc}</text><text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{yc}</text>"#,
        W / 2.0,
        H - 14.0,
        H / 2.0,
        H / 2.0
    );
    for (a, b) in lx.iter().zip(&ly) {
        let _ = writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="steelblue"/>"#,
            px(*a),
            py(*b)
        );
    }
    let mut line_y = M + 16.0;
    if pts.len() >= 3 {
        let f = fit_power_law(&pts, false)?;
        let (a0, a1) = (
            lx.iter().copied().fold(f64::INFINITY, f64::min),
            lx.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        );
        let yl = |l: f64| (f.a * l * std::f64::consts::LN_10 + f.c) / std::f64::consts::LN_10;
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="firebrick" stroke-width="1.5"/>"#,
            px(a0),
            py(yl(a0)),
            px(a1),
            py(yl(a1))
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{line_y:.2}">fitted slope {}</text>"#,
            M + 10.0,
            minus(format!("{:.3}", f.a))
        );
        line_y += 16.0;
    }
    if let Some(r) = table.meta_value("reference_slope") {
        let r: f64 = r
            .parse()
            .map_err(|_| LrpError::Schema(format!("bad reference_slope {r:?}")))?;
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{line_y:.2}">reference slope {}</text>"#,
            M + 10.0,
            minus(format!("{r:.3}"))
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_data_is_schema_error() {
        let e = emit_plot("t,psi\n", PlotKind::Heatkernel).unwrap_err();
        assert!(matches!(e, LrpError::Schema(_)));
        assert!(matches!(
            emit_plot("x,y\n1,2\n", PlotKind::Heatkernel).unwrap_err(),
            LrpError::Schema(_)
        ));
    }

    #[test]
    fn inverse_square_slope_annotation() {
        let mut csv = String::from("# reference_slope=-2\nt,psi\n");
        for t in [2.0f64, 4.0, 8.0, 16.0, 32.0] {
            csv.push_str(&format!("{t},{}\n", t.powi(-2)));
        }
        let svg = emit_plot(&csv, PlotKind::Heatkernel).unwrap();
        assert!(svg.contains("fitted slope \u{2212}2.000"));
        assert!(svg.contains("reference slope \u{2212}2.000"));
        assert_eq!(svg, emit_plot(&csv, PlotKind::Heatkernel).unwrap());
        assert_eq!(svg.matches("<circle").count(), 5);
    }
}
