//! CSV, plain-text and SVG output. `report.csv` holds only values that are
//! a function of the inputs; wall time and memory go to `timings.csv`.

use std::io::Write;

use serde::Serialize;

use crate::bench::{BenchRow, FitRow};
use crate::error::{PlanError, Result};
use crate::scenario::{ComparisonRow, RunReport};

fn finish<W: Write>(mut w: csv::Writer<W>, what: &str) -> Result<()> {
    w.flush().map_err(|e| PlanError::io(what, e))
}

#[derive(Serialize)]
struct ReportRow<'a> {
    instance: &'a str,
    scenario: String,
    method: String,
    dt_s: i64,
    objective_micro: String,
    fleet: usize,
    routes: usize,
    nodes: usize,
    edges: usize,
    intervals: usize,
    subintervals: usize,
    violations: usize,
    best: String,
}

fn report_row<'a>(r: &'a RunReport, best: Option<bool>) -> ReportRow<'a> {
    ReportRow {
        instance: &r.instance,
        scenario: r.scenario.to_string(),
        method: r.method.to_string(),
        dt_s: r.dt,
        objective_micro: format!("{:.3}", r.objective_micro()),
        fleet: r.fleet,
        routes: r.routes,
        nodes: r.nodes,
        edges: r.edges,
        intervals: r.intervals,
        subintervals: r.subintervals,
        violations: r.violations,
        best: best.map(|b| if b { "*" } else { "" }).unwrap_or("").to_string(),
    }
}

/// Rows in the given order; `best` marks are empty unless comparing.
pub fn write_report_csv<W: Write>(reports: &[RunReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in reports {
        w.serialize(report_row(r, None))?;
    }
    finish(w, "report.csv")
}

pub fn write_comparison_csv<W: Write>(rows: &[ComparisonRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(report_row(&r.report, Some(r.best)))?;
    }
    finish(w, "report.csv")
}

#[derive(Serialize)]
struct TimingRow<'a> {
    instance: &'a str,
    scenario: String,
    method: String,
    dt_s: i64,
    wall_ms: String,
    peak_rss_kb: Option<u64>,
}

pub fn write_timings_csv<'a, W: Write>(reports: impl IntoIterator<Item = &'a RunReport>, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in reports {
        w.serialize(TimingRow {
            instance: &r.instance,
            scenario: r.scenario.to_string(),
            method: r.method.to_string(),
            dt_s: r.dt,
            wall_ms: format!("{:.3}", r.wall_ms),
            peak_rss_kb: r.peak_rss_kb,
        })?;
    }
    finish(w, "timings.csv")
}

#[derive(Serialize)]
struct IntervalStatsRow<'a> {
    instance: &'a str,
    scenario: String,
    method: String,
    dt_s: i64,
    interval: String,
    count: usize,
    mean_h: String,
    std_h: String,
    min_h: String,
    q25_h: String,
    q50_h: String,
    q75_h: String,
    max_h: String,
}

/// One row per report and interval category.
pub fn write_intervals_csv<'a, W: Write>(reports: impl IntoIterator<Item = &'a RunReport>, out: W) -> Result<()> {
    let h = |x: f64| format!("{x:.4}");
    let mut w = csv::Writer::from_writer(out);
    for r in reports {
        for s in &r.interval_stats {
            w.serialize(IntervalStatsRow {
                instance: &r.instance,
                scenario: r.scenario.to_string(),
                method: r.method.to_string(),
                dt_s: r.dt,
                interval: s.category.to_string(),
                count: s.count,
                mean_h: h(s.mean_h),
                std_h: s.std_h.map(h).unwrap_or_default(),
                min_h: h(s.min_h),
                q25_h: h(s.q25_h),
                q50_h: h(s.q50_h),
                q75_h: h(s.q75_h),
                max_h: h(s.max_h),
            })?;
        }
    }
    finish(w, "intervals.csv")
}

pub fn write_scaling_csv<W: Write>(rows: &[BenchRow], out: W) -> Result<()> {
    #[derive(Serialize)]
    struct Row {
        size: usize,
        method: String,
        stations: usize,
        runs: usize,
        routes: usize,
        dt_s: i64,
        nodes: usize,
        edges: usize,
        fleet: usize,
        objective_micro: String,
        wall_ms: String,
        peak_rss_kb: Option<u64>,
    }
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(Row {
            size: r.size,
            method: r.method.to_string(),
            stations: r.stations,
            runs: r.runs,
            routes: r.routes,
            dt_s: r.dt,
            nodes: r.nodes,
            edges: r.edges,
            fleet: r.fleet,
            objective_micro: format!("{:.3}", r.objective_micro),
            wall_ms: format!("{:.3}", r.wall_ms),
            peak_rss_kb: r.peak_rss_kb,
        })?;
    }
    finish(w, "scaling.csv")
}

pub fn write_fits_csv<W: Write>(fits: &[FitRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["method", "metric", "exponent", "intercept", "r2", "points"])?;
    for f in fits {
        w.write_record([
            f.method.to_string(),
            f.metric.to_string(),
            format!("{:.6}", f.fit.exponent),
            format!("{:.6}", f.fit.intercept),
            format!("{:.6}", f.fit.r2),
            f.fit.points.to_string(),
        ])?;
    }
    finish(w, "fits.csv")
}

/// Columns padded to their widest cell.
pub fn render_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut width: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in rows {
        for (i, c) in r.iter().enumerate() {
            width[i] = width[i].max(c.len());
        }
    }
    let line = |cells: Vec<&str>| {
        let padded: Vec<String> = cells.iter().enumerate().map(|(i, c)| format!("{c:>w$}", w = width[i])).collect();
        padded.join("  ").trim_end().to_string() + "\n"
    };
    let mut out = line(header.to_vec());
    out += &line(width.iter().map(|&w| "-".repeat(w)).collect::<Vec<_>>().iter().map(String::as_str).collect());
    for r in rows {
        out += &line(r.iter().map(String::as_str).collect());
    }
    out
}

pub fn comparison_table(rows: &[ComparisonRow]) -> String {
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let p = &r.report;
            vec![
                p.scenario.to_string(),
                p.method.to_string(),
                p.dt.to_string(),
                format!("{:.2}{}", p.objective_micro() / 1e6, if r.best { " *" } else { "" }),
                p.fleet.to_string(),
                format!("{:.1}", p.wall_ms),
            ]
        })
        .collect();
    render_table(&["scenario", "method", "dt_s", "objective", "fleet", "wall_ms"], &body)
}

/// Series of points drawn with one colour.
pub struct Series<'a> {
    pub label: &'a str,
    pub points: Vec<(f64, f64)>,
    /// Fitted `(exponent, intercept)` drawn as a line over the data range.
    pub fit: Option<(f64, f64)>,
}

const COLOURS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

/// Log-log scatter with optional fitted lines.
pub fn loglog_svg(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let (w, h, m) = (640.0, 420.0, 60.0);
    let all: Vec<(f64, f64)> =
        series.iter().flat_map(|s| s.points.iter().copied()).filter(|&(x, y)| x > 0.0 && y > 0.0).collect();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(x, y) in &all {
        x0 = x0.min(x.log10());
        x1 = x1.max(x.log10());
        y0 = y0.min(y.log10());
        y1 = y1.max(y.log10());
    }
    if all.is_empty() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    let (x0, x1) = (x0.floor(), x1.ceil().max(x0.floor() + 1.0));
    let (y0, y1) = (y0.floor(), y1.ceil().max(y0.floor() + 1.0));
    let px = |lx: f64| m + (lx - x0) / (x1 - x0) * (w - 2.0 * m);
    let py = |ly: f64| h - m - (ly - y0) / (y1 - y0) * (h - 2.0 * m);

    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" font-family=\"sans-serif\" font-size=\"12\">\n"
    );
    s += &format!("<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n");
    s += &format!("<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">{title}</text>\n", w / 2.0);
    s += &format!(
        "<rect x=\"{m}\" y=\"{m}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n",
        w - 2.0 * m,
        h - 2.0 * m
    );
    for d in x0 as i32..=x1 as i32 {
        let x = px(d as f64);
        s += &format!("<text x=\"{x:.1}\" y=\"{}\" text-anchor=\"middle\">1e{d}</text>\n", h - m + 16.0);
    }
    for d in y0 as i32..=y1 as i32 {
        let y = py(d as f64);
        s += &format!("<text x=\"{}\" y=\"{:.1}\" text-anchor=\"end\">1e{d}</text>\n", m - 6.0, y + 4.0);
    }
    s += &format!("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{x_label}</text>\n", w / 2.0, h - 16.0);
    s += &format!(
        "<text x=\"16\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">{y_label}</text>\n",
        h / 2.0,
        h / 2.0
    );
    for (i, se) in series.iter().enumerate() {
        let c = COLOURS[i % COLOURS.len()];
        for &(x, y) in se.points.iter().filter(|&&(x, y)| x > 0.0 && y > 0.0) {
            s += &format!("<circle cx=\"{:.1}\" cy=\"{:.1}\" r=\"3.5\" fill=\"{c}\"/>\n", px(x.log10()), py(y.log10()));
        }
        let xs: Vec<f64> = se.points.iter().filter(|p| p.0 > 0.0).map(|p| p.0.log10()).collect();
        if let (Some((k, b)), false) = (se.fit, xs.is_empty()) {
            let lo = xs.iter().copied().fold(f64::MAX, f64::min);
            let hi = xs.iter().copied().fold(f64::MIN, f64::max);
            // ln y = b + k ln x, so log10 y = b / ln 10 + k log10 x
            let f = |lx: f64| b / std::f64::consts::LN_10 + k * lx;
            s += &format!(
                "<line x1=\"{:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"{c}\" stroke-dasharray=\"5 3\"/>\n",
                px(lo),
                py(f(lo)),
                px(hi),
                py(f(hi))
            );
        }
        s += &format!(
            "<text x=\"{}\" y=\"{}\" fill=\"{c}\">{}</text>\n",
            m + 8.0,
            m + 16.0 + 14.0 * i as f64,
            se.label
        );
    }
    s += "</svg>\n";
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_aligns_columns() {
        let t = render_table(&["a", "long"], &[vec!["123".into(), "x".into()]]);
        assert_eq!(t, "  a  long\n---  ----\n123     x\n");
    }

    #[test]
    fn svg_has_points_and_fit() {
        let svg = loglog_svg(
            "t",
            "edges",
            "ms",
            &[Series { label: "m", points: vec![(10.0, 1.0), (1000.0, 100.0)], fit: Some((1.0, -(10f64).ln())) }],
        );
        assert_eq!(svg.matches("<circle").count(), 2);
        assert_eq!(svg.matches("<line").count(), 1);
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
    }
}
