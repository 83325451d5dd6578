//! CSV, JSON and SVG output.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::harness::{RiskRow, RiskTable};
use crate::rates::{RateFamily, RatePoint};
use crate::spectrum::Spectrum;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
    Svg,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            "svg" => Ok(Format::Svg),
            other => Err(Error::invalid(format!("unknown format {other:?} (csv, json or svg)"))),
        }
    }
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
            Format::Svg => "svg",
        }
    }
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io("<csv stream>", io),
        other => Error::Parse(format!("csv: {other:?}")),
    }
}

/// Writes `contents` to `path`, reporting the path on failure.
pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(contents.as_bytes()).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Pretty JSON; keys keep struct field order.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value).map_err(|e| Error::Parse(format!("json: {e}")))
}

pub fn risk_table_csv(table: &RiskTable) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in &table.rows {
        w.serialize(row).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn read_risk_rows<R: Read>(reader: R) -> Result<Vec<RiskRow>> {
    csv::Reader::from_reader(reader)
        .deserialize()
        .collect::<std::result::Result<Vec<RiskRow>, _>>()
        .map_err(csv_err)
}

/// Headline numbers of an experiment.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentSummary {
    pub gamma: f64,
    #[serde(rename = "best_C")]
    pub best_c: f64,
    pub r_regression: f64,
    pub r_interpolation: f64,
    pub theoretical_exponent: f64,
    pub n_grid: Vec<usize>,
    pub d_grid: Vec<usize>,
    pub trials: usize,
    pub failed_rows: usize,
    pub fits: Vec<crate::harness::RateFit>,
}

pub fn summary(table: &RiskTable) -> ExperimentSummary {
    ExperimentSummary {
        gamma: table.config.gamma,
        best_c: table.best_c,
        r_regression: table.r_regression,
        r_interpolation: table.r_interpolation,
        theoretical_exponent: table.theoretical_exponent,
        n_grid: table.config.n_grid.clone(),
        d_grid: table.config.n_grid.iter().map(|&n| table.config.d_for(n)).collect(),
        trials: table.config.trials,
        failed_rows: table.rows.iter().filter(|r| !r.ok()).count(),
        fits: table.fits.clone(),
    }
}

pub fn spectrum_csv(spectrum: &Spectrum) -> String {
    let mut out = String::from("k,mu_k,log_mu_k,N,log_N\n");
    for l in &spectrum.levels {
        let n = match &l.multiplicity {
            Some(m) => m.to_string(),
            None => String::new(),
        };
        let _ = writeln!(out, "{},{},{},{},{}", l.k, l.mu, l.ln_mu, n, l.ln_multiplicity);
    }
    out
}

pub fn rate_table_csv(points: &[RatePoint]) -> String {
    let mut out = String::from("gamma,family,p,n_exponent,d_exponent,log_factor,match_status\n");
    for p in points {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            p.gamma,
            p.family,
            p.p,
            p.n_exponent,
            p.d_exponent,
            p.log_factor,
            p.match_status.as_str()
        );
    }
    out
}

/// A named polyline in data coordinates.
#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub dashed: bool,
    /// Emitted as a data-slope attribute when set.
    pub slope: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Linear,
    Log,
}

#[derive(Debug, Clone)]
pub struct Panel {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub axis: Axis,
    pub series: Vec<Series>,
}

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#555555"];
const PANEL_W: f64 = 480.0;
const PANEL_H: f64 = 360.0;
const MARGIN: f64 = 60.0;

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Side-by-side line charts in one SVG document.
pub fn render_svg(panels: &[Panel]) -> String {
    let width = PANEL_W * panels.len().max(1) as f64;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{PANEL_H}" viewBox="0 0 {width} {PANEL_H}" font-family="sans-serif" font-size="12">"#
    );
    for (i, panel) in panels.iter().enumerate() {
        render_panel(&mut svg, panel, i as f64 * PANEL_W);
    }
    svg.push_str("</svg>\n");
    svg
}

fn render_panel(svg: &mut String, panel: &Panel, x0: f64) {
    let tx = |v: f64| if panel.axis == Axis::Log { v.log10() } else { v };
    let pts: Vec<(f64, f64)> = panel
        .series
        .iter()
        .flat_map(|s| s.points.iter().map(|&(x, y)| (tx(x), tx(y))))
        .filter(|(x, y)| x.is_finite() && y.is_finite())
        .collect();
    let (mut xmin, mut xmax, mut ymin, mut ymax) = pts.iter().fold(
        (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY),
        |(a, b, c, d), &(x, y)| (a.min(x), b.max(x), c.min(y), d.max(y)),
    );
    if !xmin.is_finite() {
        (xmin, xmax, ymin, ymax) = (0.0, 1.0, 0.0, 1.0);
    }
    if xmax == xmin {
        xmax = xmin + 1.0;
    }
    if ymax == ymin {
        ymax = ymin + 1.0;
    }
    let pad = 0.05 * (ymax - ymin);
    let (ymin, ymax) = (ymin - pad, ymax + pad);
    let left = x0 + MARGIN;
    let right = x0 + PANEL_W - 20.0;
    let top = 30.0;
    let bottom = PANEL_H - MARGIN + 10.0;
    let sx = |x: f64| left + (x - xmin) / (xmax - xmin) * (right - left);
    let sy = |y: f64| bottom - (y - ymin) / (ymax - ymin) * (bottom - top);

    let _ = writeln!(svg, r#"<g class="panel">"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="18" text-anchor="middle" font-weight="bold">{}</text>"#,
        (left + right) / 2.0,
        esc(&panel.title)
    );
    let _ = writeln!(
        svg,
        r##"<line x1="{left}" y1="{bottom}" x2="{right}" y2="{bottom}" stroke="#000"/><line x1="{left}" y1="{top}" x2="{left}" y2="{bottom}" stroke="#000"/>"##
    );
    for k in 0..=4 {
        let fx = xmin + (xmax - xmin) * k as f64 / 4.0;
        let fy = ymin + (ymax - ymin) * k as f64 / 4.0;
        let (lx, ly) = match panel.axis {
            Axis::Log => (format!("{:.3e}", 10f64.powf(fx)), format!("{:.3e}", 10f64.powf(fy))),
            Axis::Linear => (format!("{fx:.2}"), format!("{fy:.3}")),
        };
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="middle">{lx}</text><text x="{}" y="{}" text-anchor="end">{ly}</text>"#,
            sx(fx),
            bottom + 16.0,
            left - 4.0,
            sy(fy) + 4.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        (left + right) / 2.0,
        PANEL_H - 12.0,
        esc(&panel.x_label)
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle" transform="rotate(-90 {} {})">{}</text>"#,
        x0 + 16.0,
        (top + bottom) / 2.0,
        x0 + 16.0,
        (top + bottom) / 2.0,
        esc(&panel.y_label)
    );
    for (i, s) in panel.series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let coords: Vec<String> = s
            .points
            .iter()
            .map(|&(x, y)| (tx(x), tx(y)))
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let dash = if s.dashed { r#" stroke-dasharray="6 4""# } else { "" };
        let slope = s.slope.map(|v| format!(r#" data-slope="{v}""#)).unwrap_or_default();
        let _ = writeln!(
            svg,
            r#"<polyline data-label="{}"{slope} fill="none" stroke="{color}" stroke-width="1.5"{dash} points="{}"/>"#,
            esc(&s.label),
            coords.join(" ")
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" fill="{color}">{}</text>"#,
            right - 150.0,
            top + 14.0 * (i as f64 + 1.0),
            esc(&s.label)
        );
    }
    svg.push_str("</g>\n");
}

/// Log-log risk curves: regression at the best C, interpolation, and the
/// theoretical rate n^{−r} drawn dashed through the first regression point.
pub fn risk_svg(table: &RiskTable) -> String {
    let reg = table.mean_regression(table.best_c);
    let interp = table.mean_interpolation();
    let to_pts = |v: &[(usize, f64)]| v.iter().map(|&(n, r)| (n as f64, r)).collect::<Vec<_>>();
    let mut series = vec![
        Series {
            label: format!("regression (C = {})", table.best_c),
            points: to_pts(&reg),
            dashed: false,
            slope: None,
        },
        Series {
            label: "interpolation".into(),
            points: to_pts(&interp),
            dashed: false,
            slope: None,
        },
    ];
    if let (Some(&(n0, r0)), Some(&(n1, _))) = (reg.first(), reg.last()) {
        let e = table.theoretical_exponent;
        let line = |n: f64| r0 * (n / n0 as f64).powf(-e);
        series.push(Series {
            label: format!("theory n^-{e:.4}"),
            points: vec![(n0 as f64, line(n0 as f64)), (n1 as f64, line(n1 as f64))],
            dashed: true,
            slope: Some(-e),
        });
    }
    render_svg(&[Panel {
        title: format!("excess risk, gamma = {}", table.config.gamma),
        x_label: "n".into(),
        y_label: "excess risk".into(),
        axis: Axis::Log,
        series,
    }])
}

/// Rate exponents against γ on the n scale and on the d scale, one series
/// per family.
pub fn rates_svg(points: &[RatePoint]) -> String {
    let by_family = |f: RateFamily, pick: fn(&RatePoint) -> f64| Series {
        label: f.to_string(),
        points: points.iter().filter(|p| p.family == f).map(|p| (p.gamma, pick(p))).collect(),
        dashed: f == RateFamily::Interpolation,
        slope: None,
    };
    let families: Vec<RateFamily> = RateFamily::ALL
        .into_iter()
        .filter(|f| points.iter().any(|p| p.family == *f))
        .collect();
    let panel = |title: &str, y: &str, pick: fn(&RatePoint) -> f64| Panel {
        title: title.into(),
        x_label: "gamma".into(),
        y_label: y.into(),
        axis: Axis::Linear,
        series: families.iter().map(|&f| by_family(f, pick)).collect(),
    };
    render_svg(&[
        panel("rate exponent in n", "exponent of n", |p| p.n_exponent),
        panel("rate exponent in d", "exponent of d", |p| p.d_exponent),
    ])
}
