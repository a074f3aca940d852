//! JSON, CSV and SVG renderings of scenario reports.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;
use tosca_core::ScenarioReport;

use crate::error::{ReportError, ReportResult};

/// Pretty JSON with the report's fixed field order and a trailing newline.
pub fn to_json(report: &ScenarioReport) -> ReportResult<String> {
    let mut s = serde_json::to_string_pretty(report)?;
    s.push('\n');
    Ok(s)
}

pub fn from_json(text: &str) -> ReportResult<ScenarioReport> {
    Ok(serde_json::from_str(text)?)
}

pub fn write_json(report: &ScenarioReport, path: impl AsRef<Path>) -> ReportResult<()> {
    fs::write(path, to_json(report)?)?;
    Ok(())
}

pub fn read_json(path: impl AsRef<Path>) -> ReportResult<ScenarioReport> {
    from_json(&fs::read_to_string(path)?)
}

#[derive(Serialize)]
struct StageRow<'a> {
    method: &'a str,
    seed: u64,
    stage: usize,
    classes_seen: usize,
    #[serde(rename = "A_b")]
    accuracy: f64,
    selection_accuracy: Option<f64>,
    params_added: usize,
}

/// One CSV row per stage of every report, under a single header.
pub fn to_csv(reports: &[ScenarioReport]) -> ReportResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    if reports.iter().all(|r| r.stages.is_empty()) {
        w.write_record(["method", "seed", "stage", "classes_seen", "A_b", "selection_accuracy", "params_added"])?;
    }
    for r in reports {
        for s in &r.stages {
            w.serialize(StageRow {
                method: r.method.name(),
                seed: r.seed,
                stage: s.index,
                classes_seen: s.classes_seen,
                accuracy: s.accuracy,
                selection_accuracy: s.selection_accuracy,
                params_added: s.params_added,
            })?;
        }
    }
    finish_csv(w)
}

pub fn write_csv(reports: &[ScenarioReport], path: impl AsRef<Path>) -> ReportResult<()> {
    fs::write(path, to_csv(reports)?)?;
    Ok(())
}

/// Final numbers of one cell of a lambda x rank sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepCell {
    pub lambda: f64,
    #[serde(rename = "r")]
    pub rank: usize,
    #[serde(rename = "A_B")]
    pub final_accuracy: f64,
    #[serde(rename = "A_bar")]
    pub average_accuracy: f64,
    pub sparsity_ratio: Option<f64>,
    pub orthogonality: Option<f64>,
}

pub fn sweep_csv(cells: &[SweepCell]) -> ReportResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    if cells.is_empty() {
        w.write_record(["lambda", "r", "A_B", "A_bar", "sparsity_ratio", "orthogonality"])?;
    }
    for c in cells {
        w.serialize(c)?;
    }
    finish_csv(w)
}

fn finish_csv(w: csv::Writer<Vec<u8>>) -> ReportResult<String> {
    let bytes = w.into_inner().map_err(|e| ReportError::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 56.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 20.0;
const BOTTOM: f64 = 44.0;
const COLORS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"];

/// Accuracy-per-stage line chart, one polyline per report.
///
/// All reports must have the same number of stages. With a single stage the
/// chart shows one marker per report instead of lines.
pub fn plot_svg(reports: &[ScenarioReport]) -> ReportResult<String> {
    let first = reports.first().ok_or(ReportError::NoReports)?;
    let stages = first.stages.len();
    if let Some(r) = reports.iter().find(|r| r.stages.len() != stages) {
        return Err(ReportError::MismatchedStages { expected: stages, found: r.stages.len() });
    }
    if stages == 0 {
        return Err(ReportError::NoReports);
    }

    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let x_of = |stage: usize| {
        if stages == 1 {
            LEFT + plot_w / 2.0
        } else {
            LEFT + plot_w * (stage - 1) as f64 / (stages - 1) as f64
        }
    };
    let y_of = |acc: f64| TOP + plot_h * (1.0 - acc.clamp(0.0, 100.0) / 100.0);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);

    // Axes, gridlines and ticks.
    let (x0, x1, y0, y1) = (LEFT, LEFT + plot_w, TOP + plot_h, TOP);
    let _ = writeln!(s, r#"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>"#);
    let _ = writeln!(s, r#"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>"#);
    for acc in (0..=100).step_by(20) {
        let y = y_of(acc as f64);
        let _ = writeln!(s, r##"<line x1="{x0}" y1="{y:.2}" x2="{x1}" y2="{y:.2}" stroke="#dddddd"/>"##);
        let _ = writeln!(s, r#"<text x="{}" y="{:.2}" text-anchor="end">{acc}</text>"#, x0 - 6.0, y + 4.0);
    }
    for stage in 1..=stages {
        let x = x_of(stage);
        let _ = writeln!(s, r#"<line x1="{x:.2}" y1="{y0}" x2="{x:.2}" y2="{}" stroke="black"/>"#, y0 + 4.0);
        let _ = writeln!(s, r#"<text x="{x:.2}" y="{}" text-anchor="middle">{stage}</text>"#, y0 + 18.0);
    }
    let _ = writeln!(s, r#"<text x="{:.2}" y="{}" text-anchor="middle">stage</text>"#, LEFT + plot_w / 2.0, HEIGHT - 6.0);
    let _ = writeln!(
        s,
        r#"<text x="14" y="{:.2}" text-anchor="middle" transform="rotate(-90 14 {:.2})">accuracy (%)</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0
    );

    for (i, r) in reports.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        if stages == 1 {
            let (x, y) = (x_of(1), y_of(r.stages[0].accuracy));
            let _ = writeln!(s, r#"<circle cx="{x:.2}" cy="{y:.2}" r="4" fill="{color}"/>"#);
        } else {
            let points: Vec<String> =
                r.stages.iter().map(|st| format!("{:.2},{:.2}", x_of(st.index), y_of(st.accuracy))).collect();
            let _ = writeln!(
                s,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
                points.join(" ")
            );
        }
        let ly = TOP + 14.0 + 18.0 * i as f64;
        let lx = WIDTH - RIGHT + 16.0;
        let _ = writeln!(s, r#"<rect x="{lx}" y="{}" width="14" height="4" fill="{color}"/>"#, ly - 6.0);
        let _ = writeln!(s, r#"<text x="{}" y="{ly}">{}</text>"#, lx + 20.0, escape(r.method.name()));
    }
    s.push_str("</svg>\n");
    Ok(s)
}

pub fn write_plot(reports: &[ScenarioReport], path: impl AsRef<Path>) -> ReportResult<()> {
    fs::write(path, plot_svg(reports)?)?;
    Ok(())
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
