//! `results.csv`, `slopes.csv` and `plot.svg`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::HarnessError;
use crate::experiment::{ExperimentResult, Row, SeriesFit};

pub const RESULTS_HEADER: [&str; 6] = ["experiment", "cell_index", "x", "y", "stderr", "seed"];

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn results_csv(rows: &[Row]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(RESULTS_HEADER).expect("in-memory write");
    for r in rows {
        w.write_record([
            r.experiment.clone(),
            r.cell_index.to_string(),
            r.x.to_string(),
            r.y.to_string(),
            r.stderr.to_string(),
            r.seed.to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}

pub fn slopes_csv(fits: &[SeriesFit]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["series", "slope", "intercept", "r2", "points"]).expect("in-memory write");
    for f in fits {
        w.write_record([
            f.series.clone(),
            f.fit.slope.to_string(),
            f.fit.intercept.to_string(),
            f.fit.r2.to_string(),
            f.points.to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}

/// Parses a `results.csv` body back into rows.
pub fn parse_results(text: &str) -> Result<Vec<Row>, csv::Error> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let field = |i: usize| rec.get(i).unwrap_or_default();
        let bad = |i: usize| csv::Error::from(std::io::Error::other(format!("bad value in column {}", RESULTS_HEADER[i])));
        rows.push(Row {
            experiment: field(0).to_string(),
            cell_index: field(1).parse().map_err(|_| bad(1))?,
            x: field(2).parse().map_err(|_| bad(2))?,
            y: field(3).parse().map_err(|_| bad(3))?,
            stderr: field(4).parse().map_err(|_| bad(4))?,
            seed: field(5).parse().map_err(|_| bad(5))?,
        });
    }
    Ok(rows)
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 30.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

/// Log-log scatter of `points` with the fitted line and its slope.
pub fn render_svg(title: &str, x_label: &str, y_label: &str, points: &[(f64, f64)], fit: Option<&SeriesFit>) -> String {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0 && x.is_finite() && y.is_finite())
        .map(|(x, y)| (x.log10(), y.log10()))
        .collect();
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#, WIDTH / 2.0, escape(title));

    let (x0, x1) = bounds(pts.iter().map(|p| p.0));
    let (y0, y1) = bounds(pts.iter().map(|p| p.1));
    let px = |lx: f64| LEFT + (lx - x0) / (x1 - x0) * (WIDTH - LEFT - RIGHT);
    let py = |ly: f64| HEIGHT - BOTTOM - (ly - y0) / (y1 - y0) * (HEIGHT - TOP - BOTTOM);

    let _ = writeln!(
        svg,
        r#"<rect x="{LEFT}" y="{TOP}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        WIDTH - LEFT - RIGHT,
        HEIGHT - TOP - BOTTOM
    );
    for k in (x0.ceil() as i32)..=(x1.floor() as i32) {
        let x = px(k as f64);
        let _ = writeln!(
            svg,
            r#"<line x1="{x:.2}" y1="{}" x2="{x:.2}" y2="{}" stroke="black"/><text x="{x:.2}" y="{}" text-anchor="middle">1e{k}</text>"#,
            HEIGHT - BOTTOM,
            HEIGHT - BOTTOM + 5.0,
            HEIGHT - BOTTOM + 20.0
        );
    }
    for k in (y0.ceil() as i32)..=(y1.floor() as i32) {
        let y = py(k as f64);
        let _ = writeln!(
            svg,
            r#"<line x1="{}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="black"/><text x="{}" y="{:.2}" text-anchor="end">1e{k}</text>"#,
            LEFT - 5.0,
            LEFT - 8.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        LEFT + (WIDTH - LEFT - RIGHT) / 2.0,
        HEIGHT - 15.0,
        escape(x_label)
    );
    let _ = writeln!(
        svg,
        r#"<text x="20" y="{0}" text-anchor="middle" transform="rotate(-90 20 {0})">{1}</text>"#,
        TOP + (HEIGHT - TOP - BOTTOM) / 2.0,
        escape(y_label)
    );

    if let Some(f) = fit {
        let ln10 = std::f64::consts::LN_10;
        let line = |lx: f64| (f.fit.intercept + f.fit.slope * lx * ln10) / ln10;
        let (a, b) = (pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min), pts.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max));
        if a.is_finite() && b.is_finite() {
            let _ = writeln!(
                svg,
                r##"<line class="fit" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#c0392b" stroke-width="1.5"/>"##,
                px(a),
                py(line(a)),
                px(b),
                py(line(b))
            );
        }
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}">slope = <tspan class="slope">{:.3}</tspan>, r² = {:.3}</text>"#,
            LEFT + 12.0,
            TOP + 20.0,
            f.fit.slope,
            f.fit.r2
        );
    }
    for (lx, ly) in &pts {
        let _ = writeln!(
            svg,
            r##"<circle class="point" cx="{:.2}" cy="{:.2}" r="4" fill="#2c3e50"/>"##,
            px(*lx),
            py(*ly)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    let pad = ((hi - lo) * 0.08).max(0.05);
    (lo - pad, hi + pad)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn plot_for(result: &ExperimentResult) -> String {
    let series = result.primary_series().to_string();
    let points: Vec<(f64, f64)> = result.series(&series).iter().map(|r| (r.x, r.y)).collect();
    let (x_label, y_label) = match result.config.experiment {
        crate::config::ExperimentKind::TSlope => ("t", "score MSE"),
        crate::config::ExperimentKind::NSlope => ("n", "score MSE"),
        crate::config::ExperimentKind::Integrated => ("t0", "integrated score error"),
        crate::config::ExperimentKind::EndToEnd => ("n", "TV"),
        crate::config::ExperimentKind::KernelCertify => ("order", "max moment error"),
    };
    render_svg(&series, x_label, y_label, &points, result.fit(&series))
}

/// Writes the three output files into `dir` and returns their paths.
pub fn write_outputs(result: &ExperimentResult, dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    fs::create_dir_all(dir).map_err(io_error(dir))?;
    let files = [
        ("results.csv", results_csv(&result.rows)),
        ("slopes.csv", slopes_csv(&result.fits)),
        ("plot.svg", plot_for(result)),
    ];
    let mut out = Vec::new();
    for (name, body) in files {
        let path = dir.join(name);
        fs::write(&path, body).map_err(io_error(&path))?;
        out.push(path);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(i: usize, x: f64, y: f64) -> Row {
        Row {
            experiment: "t-slope".into(),
            cell_index: i,
            x,
            y,
            stderr: y / 10.0,
            seed: 42 + i as u64,
        }
    }

    #[test]
    fn empty_result_is_header_only() {
        assert_eq!(results_csv(&[]), "experiment,cell_index,x,y,stderr,seed\n");
    }

    #[test]
    fn rows_round_trip() {
        let rows = vec![row(0, 0.01, 1.0 / 3.0), row(1, 0.0215443469003188, 123456.789012345), row(2, 0.1, 1e-300)];
        let text = results_csv(&rows);
        assert_eq!(text.lines().count(), 4);
        assert_eq!(parse_results(&text).unwrap(), rows);
    }

    #[test]
    fn svg_annotates_slope() {
        let fit = SeriesFit {
            series: "t-slope".into(),
            fit: score_forge_core::metrics::SlopeFit {
                slope: -1.49951,
                intercept: 0.2,
                r2: 0.99,
            },
            points: 3,
        };
        let svg = render_svg("t-slope", "t", "mse", &[(0.01, 1e3), (0.03, 2e2), (0.1, 3e1)], Some(&fit));
        assert!(svg.contains(r#"<tspan class="slope">-1.500</tspan>"#));
        assert_eq!(svg.matches(r#"class="point""#).count(), 3);
        assert!(svg.contains(r#"class="fit""#));
    }
}
