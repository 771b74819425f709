//! Minimal SVG output: heatmaps and line plots built from rectangles and
//! polylines.

use std::fmt::Write;

const CELL: f64 = 24.0;
const MARGIN: f64 = 60.0;

/// Piecewise-linear approximation of a perceptual dark-to-bright colormap.
fn colour(x: f64) -> String {
    const STOPS: [(f64, [f64; 3]); 5] = [
        (0.0, [68.0, 1.0, 84.0]),
        (0.25, [59.0, 82.0, 139.0]),
        (0.5, [33.0, 145.0, 140.0]),
        (0.75, [94.0, 201.0, 98.0]),
        (1.0, [253.0, 231.0, 37.0]),
    ];
    let x = if x.is_finite() { x.clamp(0.0, 1.0) } else { 0.0 };
    let i = STOPS.iter().rposition(|s| s.0 <= x).unwrap_or(0).min(STOPS.len() - 2);
    let (x0, c0) = STOPS[i];
    let (x1, c1) = STOPS[i + 1];
    let f = (x - x0) / (x1 - x0);
    let c: Vec<u8> = (0..3).map(|k| (c0[k] + f * (c1[k] - c0[k])).round() as u8).collect();
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// `values[row][col]`; rows are drawn top to bottom.
pub fn heatmap(title: &str, values: &[Vec<f64>], row_labels: &[String], col_labels: &[String]) -> String {
    let rows = values.len();
    let cols = values.first().map_or(0, Vec::len);
    let cell = if rows.max(cols) > 40 { 6.0 } else { CELL };
    let (lo, hi) = values
        .iter()
        .flatten()
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let span = if hi > lo { hi - lo } else { 1.0 };
    let width = 2.0 * MARGIN + cell * cols as f64;
    let height = 2.0 * MARGIN + cell * rows as f64;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="10">"#
    );
    let _ = writeln!(s, r#"<text x="{MARGIN}" y="{}" font-size="13">{}</text>"#, MARGIN / 2.0, escape(title));
    for (r, row) in values.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            let _ = writeln!(
                s,
                r#"<rect x="{}" y="{}" width="{cell}" height="{cell}" fill="{}"/>"#,
                MARGIN + c as f64 * cell,
                MARGIN + r as f64 * cell,
                colour((v - lo) / span)
            );
        }
    }
    let every = |n: usize| if n > 20 { n.div_ceil(10) } else { 1 };
    for (r, l) in row_labels.iter().enumerate().step_by(every(rows)) {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
            MARGIN - 4.0,
            MARGIN + (r as f64 + 0.7) * cell,
            escape(l)
        );
    }
    for (c, l) in col_labels.iter().enumerate().step_by(every(cols)) {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            MARGIN + (c as f64 + 0.5) * cell,
            height - MARGIN + 14.0,
            escape(l)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}">range [{lo:.4e}, {hi:.4e}]</text>"#,
        MARGIN,
        height - MARGIN / 3.0
    );
    s.push_str("</svg>\n");
    s
}

/// One polyline per series over a shared x axis.
pub fn line_plot(title: &str, x: &[f64], series: &[Vec<f64>], x_label: &str, y_label: &str) -> String {
    let (w, h) = (640.0, 420.0);
    let (x0, x1) = x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let (y0, y1) = series
        .iter()
        .flatten()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let sx = if x1 > x0 { (w - 2.0 * MARGIN) / (x1 - x0) } else { 1.0 };
    let sy = if y1 > y0 { (h - 2.0 * MARGIN) / (y1 - y0) } else { 1.0 };
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="10">"#
    );
    let _ = writeln!(s, r#"<text x="{MARGIN}" y="{}" font-size="13">{}</text>"#, MARGIN / 2.0, escape(title));
    let _ = writeln!(
        s,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        w - 2.0 * MARGIN,
        h - 2.0 * MARGIN
    );
    for (i, ys) in series.iter().enumerate() {
        let pts: Vec<String> = x
            .iter()
            .zip(ys)
            .map(|(&xv, &yv)| format!("{:.2},{:.2}", MARGIN + (xv - x0) * sx, h - MARGIN - (yv - y0) * sy))
            .collect();
        let c = colour(if series.len() > 1 { i as f64 / (series.len() - 1) as f64 } else { 0.3 });
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{c}" stroke-width="1.5" points="{}"/>"#, pts.join(" "));
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{} [{x0:.3e}, {x1:.3e}]</text>"#,
        w / 2.0,
        h - MARGIN / 3.0,
        escape(x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="start">{} [{y0:.3e}, {y1:.3e}]</text>"#,
        MARGIN,
        MARGIN - 6.0,
        escape(y_label)
    );
    s.push_str("</svg>\n");
    s
}
