//! Output plumbing shared by the command-line front end: run manifests, CSV
//! tables and small self-contained SVG line plots.

use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::Result;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format_version: u32,
    pub command: String,
    pub spec: serde_json::Value,
    pub grid: Option<serde_json::Value>,
    pub flow: Option<serde_json::Value>,
    pub output_dir: PathBuf,
    pub wall_clock_seconds: f64,
    /// File names relative to `output_dir`.
    pub artifacts: Vec<String>,
}

impl RunManifest {
    pub const FILE_NAME: &'static str = "manifest.json";

    pub fn write(&self) -> Result<PathBuf> {
        let path = self.output_dir.join(Self::FILE_NAME);
        std::fs::write(&path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(path)
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(dir.join(Self::FILE_NAME))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Writes `header` and `rows` as a CSV file.
pub fn write_csv(path: &Path, header: &str, rows: &[String]) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "{header}")?;
    for row in rows {
        writeln!(out, "{row}")?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

#[derive(Clone, Debug)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    pub color: &'static str,
    /// Draw markers instead of a polyline.
    pub scatter: bool,
}

#[derive(Clone, Debug)]
pub struct Marker {
    pub x: f64,
    pub y: f64,
    pub label: String,
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 60.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) =
        values.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 * lo.abs().max(1.0) {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

/// A line plot with axes, tick labels, a legend and optional markers.
pub fn line_plot(title: &str, x_label: &str, y_label: &str, series: &[Series], markers: &[Marker]) -> String {
    let all_x = series.iter().flat_map(|s| s.points.iter().map(|p| p.0)).chain(markers.iter().map(|m| m.x));
    let all_y = series.iter().flat_map(|s| s.points.iter().map(|p| p.1)).chain(markers.iter().map(|m| m.y));
    let (x0, x1) = bounds(all_x);
    let (y0, y1) = bounds(all_y);
    let px = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let py = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    let _ = writeln!(
        svg,
        r#"<path d="M{m} {t} L{m} {b} L{r} {b}" fill="none" stroke="black"/>"#,
        m = MARGIN,
        t = MARGIN,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN
    );
    for i in 0..=4 {
        let fx = x0 + (x1 - x0) * i as f64 / 4.0;
        let fy = y0 + (y1 - y0) * i as f64 / 4.0;
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{:.3}</text>"#,
            px(fx),
            HEIGHT - MARGIN + 16.0,
            fx
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{:.4}</text>"#,
            MARGIN - 4.0,
            py(fy) + 4.0,
            fy
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 16.0,
        escape(x_label)
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{y}" text-anchor="middle" transform="rotate(-90 16 {y})">{}</text>"#,
        escape(y_label),
        y = HEIGHT / 2.0
    );
    for (k, s) in series.iter().enumerate() {
        let finite: Vec<&(f64, f64)> = s.points.iter().filter(|p| p.0.is_finite() && p.1.is_finite()).collect();
        if s.scatter {
            for p in &finite {
                let _ = writeln!(svg, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{}"/>"#, px(p.0), py(p.1), s.color);
            }
        } else if !finite.is_empty() {
            let pts: Vec<String> = finite.iter().map(|p| format!("{:.2},{:.2}", px(p.0), py(p.1))).collect();
            let _ = writeln!(
                svg,
                r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.5"/>"#,
                pts.join(" "),
                s.color
            );
        }
        let ly = MARGIN + 14.0 * k as f64;
        let _ = writeln!(
            svg,
            r#"<rect x="{:.1}" y="{:.1}" width="10" height="10" fill="{}"/>"#,
            WIDTH - MARGIN - 150.0,
            ly - 9.0,
            s.color
        );
        let _ = writeln!(svg, r#"<text x="{:.1}" y="{:.1}">{}</text>"#, WIDTH - MARGIN - 136.0, ly, escape(&s.name));
    }
    for m in markers {
        let _ = writeln!(
            svg,
            r#"<circle cx="{:.2}" cy="{:.2}" r="5" fill="none" stroke="crimson" stroke-width="2"/>"#,
            px(m.x),
            py(m.y)
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" fill="crimson">{}</text>"#,
            px(m.x) + 7.0,
            py(m.y) - 7.0,
            escape(&m.label)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Writes an SVG; a failure is reported but never propagated, so that plot
/// problems cannot invalidate the data files written before.
pub fn write_svg_best_effort(path: &Path, svg: &str) -> bool {
    match std::fs::write(path, svg) {
        Ok(()) => true,
        Err(e) => {
            eprintln!("warning: could not write plot {}: {e}", path.display());
            false
        }
    }
}
