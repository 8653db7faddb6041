//! Minimal SVG scatter plots of an embedding.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::ArrayView2;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];
const MISSING_COLOR: &str = "#c8c8c8";
const SIZE: f64 = 600.0;
const MARGIN: f64 = 30.0;
const LEGEND_WIDTH: f64 = 170.0;

/// One circle per row, colored by `groups` (`None` drawn in light gray and
/// listed as "unlabeled"). Only the first two columns are plotted; a 1-D
/// embedding is drawn on a horizontal line.
pub fn scatter(path: &Path, coords: ArrayView2<f64>, groups: &[Option<String>], title: &str) -> std::io::Result<()> {
    let dims = coords.ncols();
    let point = |i: usize| (coords[[i, 0]], if dims > 1 { coords[[i, 1]] } else { 0.0 });
    let n = coords.nrows();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..n {
        let (x, y) = point(i);
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    let span = |lo: f64, hi: f64| if hi > lo { hi - lo } else { 1.0 };
    let scale = (SIZE - 2.0 * MARGIN) / span(x0, x1).max(span(y0, y1));
    let px = |x: f64| MARGIN + (x - x0) * scale;
    let py = |y: f64| SIZE - MARGIN - (y - y0) * scale;

    let mut names: Vec<&str> = Vec::new();
    for g in groups.iter().flatten() {
        if !names.contains(&g.as_str()) {
            names.push(g);
        }
    }
    let color = |g: &Option<String>| match g {
        Some(g) => PALETTE[names.iter().position(|n| n == g).expect("listed") % PALETTE.len()],
        None => MISSING_COLOR,
    };

    let mut s = String::new();
    let width = SIZE + LEGEND_WIDTH;
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{SIZE}" viewBox="0 0 {width} {SIZE}">"#
    )
    .unwrap();
    writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    writeln!(s, r#"<text x="{MARGIN}" y="20" font-family="sans-serif" font-size="14">{}</text>"#, escape(title)).unwrap();
    if dims > 2 {
        writeln!(
            s,
            r##"<text x="{MARGIN}" y="{}" font-family="sans-serif" font-size="11" fill="#555">showing dim_0 and dim_1 of {dims} dimensions</text>"##,
            SIZE - 8.0
        )
        .unwrap();
    }
    writeln!(s, "<g>").unwrap();
    for i in 0..n {
        let (x, y) = point(i);
        writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{}" fill-opacity="0.8"/>"#,
            px(x),
            py(y),
            color(&groups[i])
        )
        .unwrap();
    }
    writeln!(s, "</g>").unwrap();
    let mut entries: Vec<(String, &str)> = names.iter().map(|&g| (g.to_string(), color(&Some(g.to_string())))).collect();
    if groups.iter().any(Option::is_none) {
        entries.push(("unlabeled".into(), MISSING_COLOR));
    }
    for (k, (name, c)) in entries.iter().enumerate() {
        let y = 40.0 + 18.0 * k as f64;
        writeln!(
            s,
            r#"<rect x="{}" y="{}" width="10" height="10" fill="{c}"/><text x="{}" y="{}" font-family="sans-serif" font-size="12">{}</text>"#,
            SIZE + 10.0,
            y - 9.0,
            SIZE + 26.0,
            y,
            escape(name)
        )
        .unwrap();
    }
    writeln!(s, "</svg>").unwrap();
    std::fs::write(path, s)
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_circle_per_point() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.svg");
        let x = ndarray::array![[0.0, 0.0, 1.0], [1.0, 2.0, 0.0], [3.0, -1.0, 5.0]];
        let groups = vec![Some("a<b".to_string()), None, Some("c".to_string())];
        scatter(&path, x.view(), &groups, "t").unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.matches("<circle").count(), 3);
        assert!(text.contains("a&lt;b"));
        assert!(text.contains("unlabeled"));
        assert!(text.contains("of 3 dimensions"));
    }
}
