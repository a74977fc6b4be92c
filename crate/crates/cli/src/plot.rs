//! Minimal self-contained SVG charts: convergence lines and sweep bars.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::formats::{CliError, Result};

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 50.0;
const COLORS: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];

fn svg_open(title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n\
         <rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" \
         font-size=\"16\">{title}</text>\n",
        WIDTH / 2.0
    )
}

fn axes() -> String {
    format!(
        "<line x1=\"{m}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n\
         <line x1=\"{m}\" y1=\"{t}\" x2=\"{m}\" y2=\"{b}\" stroke=\"black\"/>\n",
        m = MARGIN,
        t = MARGIN,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN
    )
}

fn write_svg(path: &Path, body: String) -> Result<()> {
    fs::write(path, body).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Line chart of one or more (x, y) series; y is drawn on a log10 scale when
/// every value is positive, linear otherwise.
pub fn line_chart(path: &Path, title: &str, series: &[(String, Vec<(f64, f64)>)]) -> Result<()> {
    let points: Vec<(f64, f64)> = series.iter().flat_map(|(_, p)| p.iter().copied()).collect();
    if points.is_empty() {
        return Err(CliError::Invalid("no points to plot".into()));
    }
    let log_scale = points.iter().all(|&(_, y)| y > 0.0);
    let ty = |y: f64| if log_scale { y.log10() } else { y };
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(x, y) in &points {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(ty(y));
        y1 = y1.max(ty(y));
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }
    let px = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let py = |y: f64| HEIGHT - MARGIN - (ty(y) - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

    let mut svg = svg_open(title);
    svg.push_str(&axes());
    for (i, (name, pts)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let mut line = String::new();
        for &(x, y) in pts {
            let _ = write!(line, "{:.2},{:.2} ", px(x), py(y));
        }
        let _ = write!(
            svg,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n\
             <text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" \
             fill=\"{color}\">{name}</text>\n",
            line.trim_end(),
            WIDTH - MARGIN - 150.0,
            MARGIN + 16.0 * (i as f64 + 1.0),
        );
    }
    let ylabel = if log_scale { "log10 scale" } else { "linear scale" };
    let _ = write!(
        svg,
        "<text x=\"12\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" \
         transform=\"rotate(-90 12 {})\">{ylabel}</text>\n</svg>\n",
        HEIGHT / 2.0,
        HEIGHT / 2.0
    );
    write_svg(path, svg)
}

/// Bar chart with an optional horizontal threshold line.
pub fn bar_chart(path: &Path, title: &str, values: &[f64], threshold: Option<f64>) -> Result<()> {
    if values.is_empty() {
        return Err(CliError::Invalid("no bars to plot".into()));
    }
    let mut top = values.iter().cloned().fold(0.0f64, f64::max);
    if let Some(t) = threshold {
        if t.is_finite() {
            top = top.max(t);
        }
    }
    if top <= 0.0 {
        top = 1.0;
    }
    let span = WIDTH - 2.0 * MARGIN;
    let bar_w = (span / values.len() as f64).min(40.0);
    let py = |v: f64| HEIGHT - MARGIN - v / top * (HEIGHT - 2.0 * MARGIN);

    let mut svg = svg_open(title);
    svg.push_str(&axes());
    for (i, &v) in values.iter().enumerate() {
        let x = MARGIN + span * (i as f64 + 0.15) / values.len() as f64;
        let y = py(v.max(0.0));
        let _ = write!(
            svg,
            "<rect x=\"{x:.2}\" y=\"{y:.2}\" width=\"{:.2}\" height=\"{:.2}\" \
             fill=\"{}\"/>\n",
            bar_w * 0.7,
            HEIGHT - MARGIN - y,
            COLORS[0]
        );
    }
    if let Some(t) = threshold {
        if t.is_finite() {
            let y = py(t);
            let _ = write!(
                svg,
                "<line x1=\"{}\" y1=\"{y:.2}\" x2=\"{}\" y2=\"{y:.2}\" stroke=\"{}\" \
                 stroke-dasharray=\"6 3\"/>\n",
                MARGIN,
                WIDTH - MARGIN,
                COLORS[1]
            );
        }
    }
    svg.push_str("</svg>\n");
    write_svg(path, svg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_chart_writes_polyline() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.svg");
        let series = vec![(
            "run".to_string(),
            vec![(1.0, 1.0), (2.0, 0.1), (3.0, 0.01)],
        )];
        line_chart(&path, "convergence", &series).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("<svg"));
        assert!(text.contains("<polyline"));
        assert!(text.contains("log10 scale"));
    }

    #[test]
    fn bar_chart_draws_threshold() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("b.svg");
        bar_chart(&path, "areas", &[1.0, 4.0, 2.0], Some(3.0)).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.matches("<rect").count(), 4); // background + 3 bars
        assert!(text.contains("stroke-dasharray"));
    }

    #[test]
    fn empty_inputs_rejected() {
        let dir = tempfile::tempdir().unwrap();
        assert!(line_chart(&dir.path().join("x.svg"), "t", &[]).is_err());
        assert!(bar_chart(&dir.path().join("y.svg"), "t", &[], None).is_err());
    }
}
