use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::{Metric, SummaryRow, SweepResult, TrialRecord};
use crate::cluster::Algorithm;
use crate::error::{Error, Result};

pub const SWEEP_HEADER: &str = "p,algorithm,metric,mean,std,trials";

pub fn sweep_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.p, r.algorithm, r.metric, r.mean, r.std, r.trials
        );
    }
    out
}

pub fn read_sweep_csv(text: &str) -> Result<Vec<SummaryRow>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, h)) if h.trim() == SWEEP_HEADER => {}
        Some((_, h)) => return Err(Error::Parse(format!("unexpected header {h:?}"))),
        None => return Err(Error::Parse("empty sweep file".into())),
    }
    lines
        .map(|(ln, line)| {
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != 6 {
                return Err(Error::Parse(format!("line {}: expected 6 fields", ln + 1)));
            }
            let num = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| Error::Parse(format!("line {}: bad number {s:?}", ln + 1)))
            };
            Ok(SummaryRow {
                p: num(f[0])?,
                algorithm: f[1].parse()?,
                metric: f[2].parse()?,
                mean: num(f[3])?,
                std: num(f[4])?,
                trials: f[5]
                    .parse()
                    .map_err(|_| Error::Parse(format!("line {}: bad trial count", ln + 1)))?,
            })
        })
        .collect()
}

/// Per-trial records, including the failure reason column.
pub fn trials_csv(records: &[TrialRecord]) -> String {
    let mut out = String::from("p,algorithm,trial,clustering,completion,angle,grassmann,reason\n");
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.p,
            r.algorithm,
            r.trial,
            r.clustering,
            r.completion,
            r.angle,
            r.grassmann,
            r.reason.replace([',', '\n'], ";")
        );
    }
    out
}

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Line chart of mean `metric` against p, one polyline per algorithm.
pub fn svg_chart(rows: &[SummaryRow], metric: Metric) -> String {
    let (w, h) = (640.0, 420.0);
    let (left, right, top, bottom) = (70.0, 150.0, 30.0, 55.0);
    let pw = w - left - right;
    let ph = h - top - bottom;
    let sel: Vec<&SummaryRow> = rows
        .iter()
        .filter(|r| r.metric == metric && r.mean.is_finite())
        .collect();
    let (mut x0, mut x1) = sel
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), r| (a.min(r.p), b.max(r.p)));
    if !x0.is_finite() {
        (x0, x1) = (0.0, 1.0);
    }
    if x1 <= x0 {
        (x0, x1) = (x0 - 0.05, x1 + 0.05);
    }
    let mut y1 = sel.iter().map(|r| r.mean).fold(0.0, f64::max);
    if y1 <= 0.0 {
        y1 = 1.0;
    }
    y1 *= 1.05;
    let sx = |p: f64| left + (p - x0) / (x1 - x0) * pw;
    let sy = |v: f64| top + ph - v / y1 * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="18" text-anchor="middle" font-size="14">{} error</text>"#,
        left + pw / 2.0,
        metric
    );
    let _ = writeln!(
        s,
        r#"<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for i in 0..=5 {
        let fx = x0 + (x1 - x0) * i as f64 / 5.0;
        let fy = y1 * i as f64 / 5.0;
        let (px, py) = (sx(fx), sy(fy));
        let _ = writeln!(
            s,
            r#"<line x1="{px:.2}" y1="{}" x2="{px:.2}" y2="{}" stroke="black"/><text x="{px:.2}" y="{}" text-anchor="middle">{fx:.2}</text>"#,
            top + ph,
            top + ph + 5.0,
            top + ph + 18.0
        );
        let _ = writeln!(
            s,
            r#"<line x1="{}" y1="{py:.2}" x2="{left}" y2="{py:.2}" stroke="black"/><text x="{}" y="{:.2}" text-anchor="end">{fy:.3}</text>"#,
            left - 5.0,
            left - 8.0,
            py + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">sampling ratio p</text>"#,
        left + pw / 2.0,
        h - 12.0
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{0}" text-anchor="middle" transform="rotate(-90 18 {0})">mean {1} error</text>"#,
        top + ph / 2.0,
        metric
    );
    let mut algos: Vec<Algorithm> = Vec::new();
    for r in &sel {
        if !algos.contains(&r.algorithm) {
            algos.push(r.algorithm);
        }
    }
    for (k, &a) in algos.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let mut pts: Vec<(f64, f64)> = sel
            .iter()
            .filter(|r| r.algorithm == a)
            .map(|r| (sx(r.p), sy(r.mean)))
            .collect();
        pts.sort_by(|u, v| u.0.total_cmp(&v.0));
        let coords: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            coords.join(" ")
        );
        for (x, y) in &pts {
            let _ = writeln!(s, r#"<circle cx="{x:.2}" cy="{y:.2}" r="2.5" fill="{color}"/>"#);
        }
        let ly = top + 15.0 + 20.0 * k as f64;
        let lx = left + pw + 12.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0,
            xml_escape(a.name())
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Writes `sweep.csv`, `trials.csv` and, with `svg`, one chart per metric
/// present in the result. Returns the written paths.
pub fn emit(result: &SweepResult, dir: &Path, svg: bool) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let path = dir.join("sweep.csv");
    fs::write(&path, sweep_csv(&result.rows))?;
    written.push(path);
    let path = dir.join("trials.csv");
    fs::write(&path, trials_csv(&result.records))?;
    written.push(path);
    if svg {
        for metric in Metric::ALL {
            if !result.rows.iter().any(|r| r.metric == metric) {
                continue;
            }
            let path = dir.join(format!("{metric}.svg"));
            fs::write(&path, svg_chart(&result.rows, metric))?;
            written.push(path);
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows() -> Vec<SummaryRow> {
        let mut out = Vec::new();
        for (i, p) in [0.3, 0.35, 0.4].into_iter().enumerate() {
            for a in [Algorithm::EwzfOo, Algorithm::Tsc] {
                out.push(SummaryRow {
                    p,
                    algorithm: a,
                    metric: Metric::Clustering,
                    mean: 0.1 / (i + 1) as f64,
                    std: 0.01,
                    trials: 20,
                });
            }
        }
        out
    }

    #[test]
    fn empty_csv_is_header_only() {
        assert_eq!(sweep_csv(&[]), format!("{SWEEP_HEADER}\n"));
        assert!(read_sweep_csv(&sweep_csv(&[])).unwrap().is_empty());
    }

    #[test]
    fn csv_round_trip() {
        let mut r = rows();
        r[0].mean = f64::NAN;
        r[0].trials = 0;
        let back = read_sweep_csv(&sweep_csv(&r)).unwrap();
        assert_eq!(back.len(), r.len());
        assert!(back[0].mean.is_nan());
        assert_eq!(&back[1..], &r[1..]);
        assert!(read_sweep_csv("p,algo\n").is_err());
        assert!(read_sweep_csv(&format!("{SWEEP_HEADER}\n0.3,tsc,clustering,1\n")).is_err());
    }

    #[test]
    fn svg_structure() {
        let s = svg_chart(&rows(), Metric::Clustering);
        assert!(s.starts_with("<svg"));
        assert!(s.trim_end().ends_with("</svg>"));
        assert_eq!(s.matches("<polyline").count(), 2);
        assert!(s.contains("sampling ratio p"));
        let empty = svg_chart(&[], Metric::Grassmann);
        assert_eq!(empty.matches("<polyline").count(), 0);
    }
}
