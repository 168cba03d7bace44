use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 600.0;
const MARGIN_X: f64 = 0.1 * WIDTH;
const MARGIN_Y: f64 = 0.1 * HEIGHT;
const PALETTE: [&str; 10] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Maps `[lo, hi]` onto `[out_lo, out_hi]`; a zero-width range lands in the
/// middle.
fn scale(v: f64, lo: f64, hi: f64, out_lo: f64, out_hi: f64) -> f64 {
    if hi > lo {
        out_lo + (v - lo) / (hi - lo) * (out_hi - out_lo)
    } else {
        0.5 * (out_lo + out_hi)
    }
}

fn range(v: &[f64]) -> (f64, f64) {
    v.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        })
}

/// Renders a standalone SVG scatter of `(x_k, y_k)`, one circle per unit,
/// coloured by group when labels are given. Coordinates are rounded to three
/// decimals so identical input gives identical bytes.
pub fn render_scatter(
    x: &[f64],
    y: &[f64],
    groups: Option<&[String]>,
    x_label: &str,
    y_label: &str,
) -> String {
    let (x_lo, x_hi) = range(x);
    let (y_lo, y_hi) = range(y);
    let (left, right) = (MARGIN_X, WIDTH - MARGIN_X);
    let (top, bottom) = (MARGIN_Y, HEIGHT - MARGIN_Y);

    let mut group_order: Vec<&str> = Vec::new();
    if let Some(g) = groups {
        for label in g {
            if !group_order.contains(&label.as_str()) {
                group_order.push(label);
            }
        }
    }

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(
        s,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let _ = writeln!(
        s,
        r#"<rect x="{left:.3}" y="{top:.3}" width="{:.3}" height="{:.3}" fill="none" stroke="black"/>"#,
        right - left,
        bottom - top
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.3}" y="{:.3}" text-anchor="middle" font-family="sans-serif" font-size="16">{}</text>"#,
        0.5 * (left + right),
        HEIGHT - 0.3 * MARGIN_Y,
        escape(x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.3}" y="{:.3}" text-anchor="middle" font-family="sans-serif" font-size="16" transform="rotate(-90 {:.3} {:.3})">{}</text>"#,
        0.35 * MARGIN_X,
        0.5 * (top + bottom),
        0.35 * MARGIN_X,
        0.5 * (top + bottom),
        escape(y_label)
    );
    for (v, anchor, px, py) in [
        (x_lo, "start", left, bottom + 18.0),
        (x_hi, "end", right, bottom + 18.0),
    ] {
        let _ = writeln!(
            s,
            r#"<text x="{px:.3}" y="{py:.3}" text-anchor="{anchor}" font-family="sans-serif" font-size="11">{v:.3}</text>"#
        );
    }
    for (v, py) in [(y_lo, bottom), (y_hi, top + 11.0)] {
        let _ = writeln!(
            s,
            r#"<text x="{:.3}" y="{py:.3}" text-anchor="end" font-family="sans-serif" font-size="11">{v:.3}</text>"#,
            left - 4.0
        );
    }

    for (k, (&xv, &yv)) in x.iter().zip(y).enumerate() {
        let colour = match groups {
            Some(g) => {
                let gi = group_order.iter().position(|&o| o == g[k]).unwrap_or(0);
                PALETTE[gi % PALETTE.len()]
            }
            None => PALETTE[0],
        };
        let px = scale(xv, x_lo, x_hi, left, right);
        let py = scale(yv, y_lo, y_hi, bottom, top);
        let _ = writeln!(
            s,
            r#"<circle cx="{px:.3}" cy="{py:.3}" r="4" fill="{colour}" fill-opacity="0.8"/>"#
        );
    }

    if !group_order.is_empty() {
        let _ = writeln!(s, r#"<g class="legend">"#);
        for (gi, label) in group_order.iter().enumerate() {
            let ly = top + 14.0 + 18.0 * gi as f64;
            let _ = writeln!(
                s,
                r#"<circle cx="{:.3}" cy="{:.3}" r="5" fill="{}"/><text x="{:.3}" y="{:.3}" font-family="sans-serif" font-size="12">{}</text>"#,
                right - 120.0,
                ly,
                PALETTE[gi % PALETTE.len()],
                right - 110.0,
                ly + 4.0,
                escape(label)
            );
        }
        let _ = writeln!(s, "</g>");
    }
    s.push_str("</svg>\n");
    s
}

/// Writes the `(U^(i), U^(j))` scatter for columns `i` and `j` (0-based) of an
/// `n×L` score matrix.
pub fn write_scatter(
    scores: &DMatrix<f64>,
    i: usize,
    j: usize,
    groups: Option<&[String]>,
    path: &Path,
) -> Result<()> {
    let count = scores.ncols();
    for idx in [i, j] {
        if idx >= count {
            return Err(Error::InvalidComponentIndex { index: idx, count });
        }
    }
    if let Some(g) = groups {
        if g.len() != scores.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "{} group labels for {} units",
                g.len(),
                scores.nrows()
            )));
        }
    }
    let x: Vec<f64> = scores.column(i).iter().copied().collect();
    let y: Vec<f64> = scores.column(j).iter().copied().collect();
    let svg = render_scatter(
        &x,
        &y,
        groups,
        &format!("U^({})", i + 1),
        &format!("U^({})", j + 1),
    );
    std::fs::write(path, svg).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn count(s: &str, pat: &str) -> usize {
        s.matches(pat).count()
    }

    #[test]
    fn three_points_one_colour() {
        let svg = render_scatter(&[0.0, 1.0, 2.0], &[1.0, 0.0, 3.0], None, "U^(1)", "U^(2)");
        assert_eq!(count(&svg, "<circle"), 3);
        assert_eq!(count(&svg, PALETTE[0]), 3);
        assert!(!svg.contains("legend"));
        assert!(svg.contains(">U^(1)</text>") && svg.contains(">U^(2)</text>"));
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert!(svg.contains(r#"width="800" height="600""#));
    }

    #[test]
    fn two_groups_two_colours() {
        let g: Vec<String> = ["a", "b", "a"].iter().map(|s| s.to_string()).collect();
        let svg = render_scatter(&[0.0, 1.0, 2.0], &[1.0, 0.0, 3.0], Some(&g), "x", "y");
        let legend = &svg[svg.find("legend").unwrap()..];
        assert_eq!(count(legend, "<circle"), 2);
        assert_eq!(count(&svg, PALETTE[0]), 3);
        assert_eq!(count(&svg, PALETTE[1]), 2);
    }

    #[test]
    fn identical_points() {
        let svg = render_scatter(&[1.5; 3], &[-2.0; 3], None, "x", "y");
        assert_eq!(count(&svg, r#"<circle cx="400.000" cy="300.000""#), 3);
    }

    #[test]
    fn deterministic_bytes() {
        let x = [0.123456789, -3.0, 2.5];
        let a = render_scatter(&x, &x, None, "x", "y");
        let b = render_scatter(&x, &x, None, "x", "y");
        assert_eq!(a, b);
    }

    #[test]
    fn bad_column() {
        let dir = tempfile::tempdir().unwrap();
        let m = DMatrix::zeros(3, 2);
        assert!(matches!(
            write_scatter(&m, 0, 2, None, &dir.path().join("s.svg")),
            Err(Error::InvalidComponentIndex { index: 2, count: 2 })
        ));
    }
}
