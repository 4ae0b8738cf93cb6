//! Report types and the on-disk format: `rows.csv`, `summary.csv`,
//! `plot.svg` and `meta.txt`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

use super::ExperimentConfig;

pub const ROW_HEADER: [&str; 9] = ["experiment", "rep", "x", "estimator", "n", "value", "sq_error", "split_index", "seed"];
pub const SUMMARY_HEADER: [&str; 10] = ["experiment", "x", "estimator", "n", "reps", "statistic", "estimate", "mc_se", "bound", "pass"];

/// One replication-level record.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub experiment: String,
    pub rep: usize,
    /// Evaluation point, coordinates joined by `;`; empty when not pointwise.
    pub x: String,
    pub estimator: String,
    pub n: usize,
    pub value: f64,
    pub sq_error: Option<f64>,
    pub split_index: Option<usize>,
    pub seed: u64,
}

/// One aggregate statistic.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub experiment: String,
    pub x: String,
    pub estimator: String,
    pub n: usize,
    pub reps: usize,
    pub statistic: String,
    pub estimate: f64,
    pub mc_se: Option<f64>,
    pub bound: Option<f64>,
    /// Set only on rows that encode a check.
    pub pass: Option<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub rows: Vec<Row>,
    pub summary: Vec<SummaryRow>,
    pub wall_time_secs: f64,
}

impl ExperimentReport {
    /// False when any check row failed.
    pub fn passed(&self) -> bool {
        self.summary.iter().all(|s| s.pass != Some(false))
    }

    pub fn checks(&self) -> impl Iterator<Item = &SummaryRow> {
        self.summary.iter().filter(|s| s.pass.is_some())
    }

    pub fn find(&self, statistic: &str, estimator: &str, x: &str) -> Option<&SummaryRow> {
        self.summary.iter().find(|s| s.statistic == statistic && s.estimator == estimator && s.x == x)
    }
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

pub fn rows_csv(rows: &[Row]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(ROW_HEADER)?;
    for r in rows {
        w.write_record([
            r.experiment.clone(),
            r.rep.to_string(),
            r.x.clone(),
            r.estimator.clone(),
            r.n.to_string(),
            r.value.to_string(),
            opt(r.sq_error),
            opt(r.split_index),
            r.seed.to_string(),
        ])?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

pub fn summary_csv(summary: &[SummaryRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SUMMARY_HEADER)?;
    for s in summary {
        w.write_record([
            s.experiment.clone(),
            s.x.clone(),
            s.estimator.clone(),
            s.n.to_string(),
            s.reps.to_string(),
            s.statistic.clone(),
            s.estimate.to_string(),
            opt(s.mc_se),
            opt(s.bound),
            opt(s.pass),
        ])?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

fn parse_field<T: std::str::FromStr>(line: usize, name: &str, s: &str) -> Result<T> {
    s.parse().map_err(|_| Error::Parse { line, reason: format!("bad {name}: {s:?}") })
}

fn parse_opt<T: std::str::FromStr>(line: usize, name: &str, s: &str) -> Result<Option<T>> {
    if s.is_empty() {
        Ok(None)
    } else {
        parse_field(line, name, s).map(Some)
    }
}

fn records(bytes: &[u8], header: &[&str]) -> Result<Vec<(usize, csv::StringRecord)>> {
    let mut r = csv::Reader::from_reader(bytes);
    if r.headers()?.iter().collect::<Vec<_>>() != header {
        return Err(Error::Parse { line: 1, reason: "unexpected header".into() });
    }
    r.records().enumerate().map(|(k, rec)| Ok((k + 2, rec?))).collect()
}

pub fn parse_rows(bytes: &[u8]) -> Result<Vec<Row>> {
    records(bytes, &ROW_HEADER)?
        .into_iter()
        .map(|(ln, f)| {
            Ok(Row {
                experiment: f[0].to_string(),
                rep: parse_field(ln, "rep", &f[1])?,
                x: f[2].to_string(),
                estimator: f[3].to_string(),
                n: parse_field(ln, "n", &f[4])?,
                value: parse_field(ln, "value", &f[5])?,
                sq_error: parse_opt(ln, "sq_error", &f[6])?,
                split_index: parse_opt(ln, "split_index", &f[7])?,
                seed: parse_field(ln, "seed", &f[8])?,
            })
        })
        .collect()
}

pub fn parse_summary(bytes: &[u8]) -> Result<Vec<SummaryRow>> {
    records(bytes, &SUMMARY_HEADER)?
        .into_iter()
        .map(|(ln, f)| {
            Ok(SummaryRow {
                experiment: f[0].to_string(),
                x: f[1].to_string(),
                estimator: f[2].to_string(),
                n: parse_field(ln, "n", &f[3])?,
                reps: parse_field(ln, "reps", &f[4])?,
                statistic: f[5].to_string(),
                estimate: parse_field(ln, "estimate", &f[6])?,
                mc_se: parse_opt(ln, "mc_se", &f[7])?,
                bound: parse_opt(ln, "bound", &f[8])?,
                pass: parse_opt(ln, "pass", &f[9])?,
            })
        })
        .collect()
}

/// Largest discrepancy between two summaries with the same layout, or an
/// error describing the first structural difference.
pub fn summary_distance(a: &[SummaryRow], b: &[SummaryRow]) -> std::result::Result<f64, String> {
    if a.len() != b.len() {
        return Err(format!("{} vs {} summary rows", a.len(), b.len()));
    }
    let close = |u: Option<f64>, v: Option<f64>| match (u, v) {
        (None, None) => Ok(0.0),
        (Some(u), Some(v)) if u.is_nan() && v.is_nan() => Ok(0.0),
        (Some(u), Some(v)) => Ok((u - v).abs() / (1.0 + u.abs().max(v.abs()))),
        _ => Err("optional field presence differs".to_string()),
    };
    let mut worst: f64 = 0.0;
    for (s, t) in a.iter().zip(b) {
        if (&s.experiment, &s.x, &s.estimator, s.n, s.reps, &s.statistic, s.pass)
            != (&t.experiment, &t.x, &t.estimator, t.n, t.reps, &t.statistic, t.pass)
        {
            return Err(format!("row mismatch: {s:?} vs {t:?}"));
        }
        worst = worst.max(close(Some(s.estimate), Some(t.estimate))?);
        worst = worst.max(close(s.mc_se, t.mc_se)?);
        worst = worst.max(close(s.bound, t.bound)?);
    }
    Ok(worst)
}

const PLOT_W: f64 = 640.0;
const PLOT_H: f64 = 400.0;
const MARGIN: f64 = 50.0;
const COLOURS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// Estimate with a two-standard-error band against position, one series per
/// estimator, for the first statistic of the summary. Positions are the
/// distinct `x` labels (or `n` values) in order of appearance.
pub fn plot_svg(summary: &[SummaryRow], title: &str) -> String {
    let mut svg = String::new();
    let _ = writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{PLOT_W}" height="{PLOT_H}" font-family="sans-serif" font-size="11">"#);
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="20" text-anchor="middle" font-size="13">{}</text>"#, PLOT_W / 2.0, escape(title));
    let Some(stat) = summary.first().map(|s| s.statistic.clone()) else {
        svg.push_str("</svg>\n");
        return svg;
    };
    let rows: Vec<&SummaryRow> = summary.iter().filter(|s| s.statistic == stat && s.estimate.is_finite()).collect();
    let key = |s: &SummaryRow| if s.x.is_empty() { s.n.to_string() } else { s.x.clone() };
    let mut positions: Vec<String> = Vec::new();
    let mut series: Vec<String> = Vec::new();
    for s in &rows {
        if !positions.contains(&key(s)) {
            positions.push(key(s));
        }
        if !series.contains(&s.estimator) {
            series.push(s.estimator.clone());
        }
    }
    let se = |s: &SummaryRow| s.mc_se.unwrap_or(0.0);
    let lo = rows.iter().map(|s| s.estimate - 2.0 * se(s)).fold(f64::INFINITY, f64::min).min(0.0);
    let hi = rows.iter().map(|s| s.estimate + 2.0 * se(s)).fold(f64::NEG_INFINITY, f64::max);
    let hi = if hi > lo { hi } else { lo + 1.0 };
    let px = |k: usize| MARGIN + (PLOT_W - 2.0 * MARGIN) * if positions.len() > 1 { k as f64 / (positions.len() - 1) as f64 } else { 0.5 };
    let py = |v: f64| PLOT_H - MARGIN - (PLOT_H - 2.0 * MARGIN) * (v - lo) / (hi - lo);
    let _ = writeln!(
        svg,
        r#"<line x1="{m}" y1="{b}" x2="{r}" y2="{b}" stroke="black"/><line x1="{m}" y1="{t}" x2="{m}" y2="{b}" stroke="black"/>"#,
        m = MARGIN,
        b = PLOT_H - MARGIN,
        r = PLOT_W - MARGIN,
        t = MARGIN
    );
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="end">{:.4}</text>"#, MARGIN - 4.0, py(hi), hi);
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="end">{:.4}</text>"#, MARGIN - 4.0, py(lo), lo);
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, px(0), PLOT_H - MARGIN + 16.0, escape(&positions[0]));
    let last = positions.len() - 1;
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, px(last), PLOT_H - MARGIN + 16.0, escape(&positions[last]));
    for (k, name) in series.iter().enumerate() {
        let colour = COLOURS[k % COLOURS.len()];
        let pts: Vec<(f64, &SummaryRow)> = rows
            .iter()
            .filter(|s| &s.estimator == name)
            .map(|s| (px(positions.iter().position(|p| *p == key(s)).unwrap_or(0)), *s))
            .collect();
        let line: Vec<String> = pts.iter().map(|(x, s)| format!("{x:.2},{:.2}", py(s.estimate))).collect();
        let _ = writeln!(svg, r#"<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{}"/>"#, line.join(" "));
        for (x, s) in &pts {
            let _ = writeln!(
                svg,
                r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="{colour}" stroke-opacity="0.5"/>"#,
                py(s.estimate - 2.0 * se(s)),
                py(s.estimate + 2.0 * se(s))
            );
        }
        let _ = writeln!(svg, r#"<text x="{}" y="{}" fill="{colour}">{} ({})</text>"#, PLOT_W - MARGIN - 140.0, MARGIN + 14.0 * k as f64, escape(name), escape(&stat));
    }
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn meta_text(report: &ExperimentReport) -> String {
    let mut m = String::new();
    let _ = writeln!(m, "experiment: {}", report.config.id);
    let _ = writeln!(m, "kind: {:?}", report.config.kind);
    let _ = writeln!(m, "seed: {}", report.config.seed);
    let _ = writeln!(m, "version: {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(m, "threads: {}", rayon::current_num_threads());
    let _ = writeln!(m, "wall_time_secs: {:.3}", report.wall_time_secs);
    let _ = writeln!(m, "passed: {}", report.passed());
    let _ = writeln!(m, "config: {:#?}", report.config);
    m
}

/// Writes the four report files into `out_dir`, creating it if needed.
pub fn emit_report(report: &ExperimentReport, out_dir: &Path) -> Result<()> {
    fs::create_dir_all(out_dir)?;
    fs::write(out_dir.join("rows.csv"), rows_csv(&report.rows)?)?;
    fs::write(out_dir.join("summary.csv"), summary_csv(&report.summary)?)?;
    fs::write(out_dir.join("plot.svg"), plot_svg(&report.summary, &report.config.id))?;
    fs::write(out_dir.join("meta.txt"), meta_text(report))?;
    Ok(())
}
