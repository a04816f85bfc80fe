//! Result tables and line charts for factorial runs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::fed::FedRow;
use crate::error::{Error, Result};
use crate::solver::SolveStatus;
use crate::vulnerability::DisruptionKind;

pub const FED_RESULTS_FILE: &str = "fed_results.csv";
const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const MARGIN_LEFT: f64 = 100.0;
const MARGIN_RIGHT: f64 = 130.0;
const MARGIN_TOP: f64 = 50.0;
const MARGIN_BOTTOM: f64 = 70.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    kind: String,
    n_elements: usize,
    q: f64,
    lambda: f64,
    objective: f64,
    status: String,
    unsatisfied: f64,
    wall_time_s: f64,
}

/// Writes `kind,n_elements,q,lambda,objective,status,unsatisfied,wall_time_s`.
/// With `omit_timing` the wall time column is written as 0 so reruns are byte-identical.
pub fn write_fed_csv(rows: &[FedRow], path: &Path, omit_timing: bool) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(CsvRow {
            kind: r.kind.as_str().to_string(),
            n_elements: r.n_elements,
            q: r.q,
            lambda: r.lambda,
            objective: r.objective,
            status: r.status.as_str().to_string(),
            unsatisfied: r.unsatisfied,
            wall_time_s: if omit_timing { 0.0 } else { r.wall_time },
        })?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn read_fed_csv(path: &Path) -> Result<Vec<FedRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for (i, row) in r.deserialize::<CsvRow>().enumerate() {
        let row = row.map_err(|e| Error::schema(path, i + 1, e.to_string()))?;
        let kind = DisruptionKind::parse(&row.kind)
            .ok_or_else(|| Error::schema(path, i + 1, format!("unknown kind {:?}", row.kind)))?;
        let status = SolveStatus::parse(&row.status)
            .ok_or_else(|| Error::schema(path, i + 1, format!("unknown status {:?}", row.status)))?;
        out.push(FedRow {
            kind,
            n_elements: row.n_elements,
            q: row.q,
            lambda: row.lambda,
            objective: row.objective,
            status,
            unsatisfied: row.unsatisfied,
            wall_time: row.wall_time_s,
        });
    }
    Ok(out)
}

fn fmt_num(v: f64) -> String {
    let s = format!("{v:.2}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

fn fmt_money(v: f64) -> String {
    let a = v.abs();
    if a >= 1e6 {
        format!("{}M", fmt_num(v / 1e6))
    } else if a >= 1e3 {
        format!("{}k", fmt_num(v / 1e3))
    } else {
        fmt_num(v)
    }
}

/// One chart: objective against λ, one series per q.
pub fn render_chart(title: &str, series: &ChartSeries) -> String {
    let points = series.values().flatten();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in points {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if x1 <= x0 {
        x0 -= 0.05;
        x1 += 0.05;
    }
    if y1 <= y0 {
        let pad = y0.abs().max(1.0) * 0.05;
        y0 -= pad;
        y1 += pad;
    } else {
        let pad = (y1 - y0) * 0.05;
        y0 -= pad;
        y1 += pad;
    }
    let pw = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let ph = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let sx = |x: f64| MARGIN_LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| MARGIN_TOP + (1.0 - (y - y0) / (y1 - y0)) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="28" text-anchor="middle" font-size="15">{title}</text>"#,
        MARGIN_LEFT + pw / 2.0
    );
    let _ = writeln!(
        s,
        r#"<rect x="{MARGIN_LEFT}" y="{MARGIN_TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );

    let mut xs: Vec<f64> = series.values().flatten().map(|p| p.0).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    for &x in &xs {
        let px = sx(x);
        let _ = writeln!(
            s,
            r#"<line x1="{px:.1}" y1="{:.1}" x2="{px:.1}" y2="{:.1}" stroke="black"/>"#,
            MARGIN_TOP + ph,
            MARGIN_TOP + ph + 5.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{px:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            MARGIN_TOP + ph + 20.0,
            fmt_num(x)
        );
    }
    for k in 0..=5 {
        let y = y0 + (y1 - y0) * k as f64 / 5.0;
        let py = sy(y);
        let _ = writeln!(
            s,
            r##"<line x1="{MARGIN_LEFT}" y1="{py:.1}" x2="{:.1}" y2="{py:.1}" stroke="#dddddd"/>"##,
            MARGIN_LEFT + pw
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
            MARGIN_LEFT - 8.0,
            py + 4.0,
            fmt_money(y)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">capacity uncertainty (λ)</text>"#,
        MARGIN_LEFT + pw / 2.0,
        HEIGHT - 20.0
    );
    let _ = writeln!(
        s,
        r#"<text x="25" y="{:.1}" text-anchor="middle" transform="rotate(-90 25 {:.1})">objective ($)</text>"#,
        MARGIN_TOP + ph / 2.0,
        MARGIN_TOP + ph / 2.0
    );

    for (i, (q_bits, pts)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let coords: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.1},{:.1}", sx(x), sy(y))).collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            coords.join(" ")
        );
        for &(x, y) in pts {
            let _ = writeln!(
                s,
                r#"<circle cx="{:.1}" cy="{:.1}" r="3" fill="{color}"/>"#,
                sx(x),
                sy(y)
            );
        }
        let ly = MARGIN_TOP + 15.0 + 20.0 * i as f64;
        let lx = WIDTH - MARGIN_RIGHT + 15.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/>"#,
            lx + 20.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}">q = {}</text>"#,
            lx + 26.0,
            ly + 4.0,
            f64::from_bits(*q_bits)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// q (as bits) → sorted (λ, objective) points.
pub type ChartSeries = BTreeMap<u64, Vec<(f64, f64)>>;

/// Series per (kind, n).
pub fn chart_series(rows: &[FedRow]) -> BTreeMap<(DisruptionKind, usize), ChartSeries> {
    let mut out: BTreeMap<(DisruptionKind, usize), ChartSeries> = BTreeMap::new();
    for r in rows {
        out.entry((r.kind, r.n_elements))
            .or_default()
            .entry(r.q.to_bits())
            .or_default()
            .push((r.lambda, r.objective));
    }
    for charts in out.values_mut() {
        for pts in charts.values_mut() {
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        }
    }
    out
}

pub fn chart_file_name(kind: DisruptionKind, n: usize) -> String {
    format!("fed_{}_{}.svg", kind.as_str(), n)
}

/// Writes the results table and one chart per (kind, n). Returns the paths written.
pub fn emit_results(rows: &[FedRow], out_dir: &Path, omit_timing: bool) -> Result<Vec<PathBuf>> {
    if rows.is_empty() {
        return Err(Error::Config("no results to emit".into()));
    }
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written = Vec::new();
    let csv_path = out_dir.join(FED_RESULTS_FILE);
    write_fed_csv(rows, &csv_path, omit_timing)?;
    written.push(csv_path);
    for ((kind, n), series) in chart_series(rows) {
        let path = out_dir.join(chart_file_name(kind, n));
        let title = format!("{kind} disruption, {n} elements");
        std::fs::write(&path, render_chart(&title, &series)).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::fed::{fed_cases, FedConfig};

    fn fake_rows(kinds: &[DisruptionKind]) -> Vec<FedRow> {
        let mut cfg = FedConfig::default();
        cfg.levels.retain(|k, _| kinds.contains(k));
        fed_cases(&cfg)
            .into_iter()
            .map(|c| FedRow {
                kind: c.kind,
                n_elements: c.n_elements,
                q: c.q,
                lambda: c.lambda,
                objective: 1000.0 + 10_000.0 * c.lambda / c.q.sqrt() + c.n_elements as f64,
                status: SolveStatus::Optimal,
                unsatisfied: c.lambda * 3.0,
                wall_time: 0.125,
            })
            .collect()
    }

    #[test]
    fn link_fed_gives_four_charts() {
        let rows = fake_rows(&[DisruptionKind::Link]);
        assert_eq!(rows.len(), 112);
        let dir = tempfile::tempdir().unwrap();
        let files = emit_results(&rows, dir.path(), false).unwrap();
        assert_eq!(files.len(), 5);
        let svg = std::fs::read_to_string(dir.path().join("fed_link_30.svg")).unwrap();
        assert!(svg.contains(r#"width="800" height="500""#));
        assert!(svg.contains("capacity uncertainty (λ)"));
        assert!(svg.contains("objective ($)"));
        assert_eq!(svg.matches("<polyline").count(), 4);
        assert_eq!(svg.matches("<circle").count(), 28);
    }

    #[test]
    fn csv_round_trip() {
        let rows = fake_rows(&[DisruptionKind::Node, DisruptionKind::Terminal]);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        write_fed_csv(&rows, &p, false).unwrap();
        assert_eq!(read_fed_csv(&p).unwrap(), rows);
        let head = std::fs::read_to_string(&p).unwrap();
        assert!(head.starts_with("kind,n_elements,q,lambda,objective,status,unsatisfied,wall_time_s\n"));
        write_fed_csv(&rows, &p, true).unwrap();
        assert!(read_fed_csv(&p).unwrap().iter().all(|r| r.wall_time == 0.0));
    }

    #[test]
    fn empty_results_rejected() {
        let dir = tempfile::tempdir().unwrap();
        assert!(emit_results(&[], dir.path(), false).is_err());
    }

    #[test]
    fn charts_are_deterministic_and_handle_flat_series() {
        let mut rows = fake_rows(&[DisruptionKind::Terminal]);
        for r in &mut rows {
            r.objective = 5.0;
        }
        let a = chart_series(&rows);
        let (key, series) = a.iter().next().unwrap();
        let svg = render_chart("t", series);
        assert_eq!(svg, render_chart("t", &chart_series(&rows)[key]));
        assert!(!svg.contains("NaN"));
    }

    #[test]
    fn bad_csv_rows_are_schema_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        std::fs::write(
            &p,
            "kind,n_elements,q,lambda,objective,status,unsatisfied,wall_time_s\nbridge,1,0.1,0,1,optimal,0,0\n",
        )
        .unwrap();
        assert!(matches!(read_fed_csv(&p), Err(Error::Schema { .. })));
    }
}
