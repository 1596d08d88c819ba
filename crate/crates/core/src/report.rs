//! Sweep report files and the merged plot table built from them.
//!
//! A report is CSV preceded by `#` comment lines:
//!
//! ```text
//! # gestalt-report v1
//! # principle: closure
//! # seed: 7
//! # h_base: 0.83
//! # g_star: 40
//! # g_knee: 30
//! param,x,h_base,accuracy,p_true,phi,status,error
//! 0,0,0.83,0.83,0.61,0,ok,
//! ```
//!
//! Floats are written in shortest round-trip form, so `phi` can be
//! recomputed exactly from `h_base` and `accuracy`.

use std::fmt::Write as _;
use std::path::Path;

use crate::engine::{PointOutcome, SweepResult};
use crate::error::{Error, Result};
use crate::perturb::Principle;

pub const REPORT_HEADER: &str = "# gestalt-report v1";
pub const COLUMNS: [&str; 8] = ["param", "x", "h_base", "accuracy", "p_true", "phi", "status", "error"];
/// Millimetres per pixel used when no scale is recorded.
pub const DEFAULT_MM_PER_PX: f64 = 0.714;

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub param: String,
    pub x: f64,
    pub h_base: f64,
    pub accuracy: Option<f64>,
    pub p_true: Option<f64>,
    pub phi: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    /// `# key: value` lines in file order, including the derived ones.
    pub meta: Vec<(String, String)>,
    pub rows: Vec<ReportRow>,
}

impl Report {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn principle(&self) -> Option<Principle> {
        self.get("principle").and_then(|p| p.parse().ok())
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// Render a sweep result. `config` is echoed verbatim as comment lines
/// (values must not contain newlines).
pub fn render_report(result: &SweepResult, config: &[(String, String)], tau: f64) -> String {
    let mut out = format!("{REPORT_HEADER}\n");
    let _ = writeln!(out, "# principle: {}", result.principle);
    for (k, v) in config {
        let _ = writeln!(out, "# {k}: {}", v.replace('\n', " "));
    }
    let _ = writeln!(out, "# h_base: {}", result.h_base);
    let _ = writeln!(out, "# p_true_base: {}", result.base_true_prob);
    let g_star = result.g_star_argmax().map(|g| g.to_string()).unwrap_or_else(|_| "none".into());
    let knee = result.g_knee(tau).map(|g| g.to_string()).unwrap_or_else(|| "none".into());
    let _ = writeln!(out, "# g_star: {g_star}");
    let _ = writeln!(out, "# g_knee: {knee}");

    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(COLUMNS).expect("in-memory write");
    for p in &result.points {
        let (acc, pt, phi, status, err) = match &p.outcome {
            PointOutcome::Measured {
                accuracy,
                mean_true_prob,
                phi,
            } => (Some(*accuracy), Some(*mean_true_prob), Some(*phi), "ok", String::new()),
            PointOutcome::Failed { reason } => (None, None, None, "failed", reason.replace('\n', " ")),
        };
        w.write_record([
            p.param.to_string(),
            p.x.to_string(),
            result.h_base.to_string(),
            opt(acc),
            opt(pt),
            opt(phi),
            status.to_string(),
            err,
        ])
        .expect("in-memory write");
    }
    out.push_str(&String::from_utf8(w.into_inner().expect("flush")).expect("utf8"));
    out
}

fn parse_err(path: &str, message: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_string(),
        message: message.into(),
    }
}

pub fn parse_report(text: &str, path: &str) -> Result<Report> {
    let mut lines = text.lines();
    if lines.next().map(str::trim_end) != Some(REPORT_HEADER) {
        return Err(parse_err(path, format!("missing `{REPORT_HEADER}` header")));
    }
    let mut meta = Vec::new();
    let mut body = String::new();
    for line in lines {
        if let Some(c) = line.strip_prefix('#') {
            let (k, v) = c
                .split_once(':')
                .ok_or_else(|| parse_err(path, format!("bad comment line `{line}`")))?;
            meta.push((k.trim().to_string(), v.trim().to_string()));
        } else {
            body.push_str(line);
            body.push('\n');
        }
    }
    let mut r = csv::ReaderBuilder::new().from_reader(body.as_bytes());
    let header = r.headers().map_err(|e| parse_err(path, e.to_string()))?.clone();
    if header.iter().collect::<Vec<_>>() != COLUMNS {
        return Err(parse_err(path, format!("unexpected columns {header:?}")));
    }
    let num = |s: &str, col: &str, row: usize| -> Result<Option<f64>> {
        if s.is_empty() {
            return Ok(None);
        }
        s.parse()
            .map(Some)
            .map_err(|_| parse_err(path, format!("row {row}: bad {col} `{s}`")))
    };
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| parse_err(path, e.to_string()))?;
        let row = i + 1;
        let req = |v: Option<f64>, col: &str| v.ok_or_else(|| parse_err(path, format!("row {row}: empty {col}")));
        let status = &rec[6];
        let row_data = ReportRow {
            param: rec[0].to_string(),
            x: req(num(&rec[1], "x", row)?, "x")?,
            h_base: req(num(&rec[2], "h_base", row)?, "h_base")?,
            accuracy: num(&rec[3], "accuracy", row)?,
            p_true: num(&rec[4], "p_true", row)?,
            phi: num(&rec[5], "phi", row)?,
            error: (!rec[7].is_empty()).then(|| rec[7].to_string()),
        };
        match status {
            "ok" if row_data.accuracy.is_none() || row_data.phi.is_none() => {
                return Err(parse_err(path, format!("row {row}: ok row without accuracy")))
            }
            "ok" | "failed" => {}
            other => return Err(parse_err(path, format!("row {row}: unknown status `{other}`"))),
        }
        rows.push(row_data);
    }
    Ok(Report { meta, rows })
}

pub fn read_report(path: &Path) -> Result<Report> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_report(&text, &path.display().to_string())
}

/// Axis value in the unit shown on the sensitivity plots: millimetres for
/// proximity, the raw parameter otherwise.
pub fn display_x(principle: Option<Principle>, x: f64, mm_per_px: f64) -> f64 {
    match principle {
        Some(Principle::Proximity) => x * mm_per_px,
        _ => x,
    }
}

pub fn display_unit(principle: Option<Principle>) -> &'static str {
    match principle {
        Some(Principle::Proximity) => "mm",
        Some(p) => p.unit(),
        None => "",
    }
}

/// Merge reports into one plot table (one series per input, `y` = mean
/// true-class probability) followed by a g* summary per principle.
///
/// `mm_per_px` overrides the scale recorded in each report.
pub fn merge_reports(reports: &[(String, Report)], mm_per_px: Option<f64>) -> String {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(["series", "principle", "unit", "x", "p_true", "accuracy"])
        .expect("in-memory write");
    for (name, r) in reports {
        let p = r.principle();
        let scale = mm_per_px
            .or_else(|| r.get("mm_per_px").and_then(|s| s.parse().ok()))
            .unwrap_or(DEFAULT_MM_PER_PX);
        for row in r.rows.iter().filter(|row| row.accuracy.is_some()) {
            w.write_record([
                name.clone(),
                p.map(|p| p.to_string()).unwrap_or_default(),
                display_unit(p).to_string(),
                display_x(p, row.x, scale).to_string(),
                opt(row.p_true),
                opt(row.accuracy),
            ])
            .expect("in-memory write");
        }
    }
    let mut out = String::from_utf8(w.into_inner().expect("flush")).expect("utf8");

    let mut order: Vec<&(String, Report)> = reports.iter().collect();
    order.sort_by_key(|(_, r)| r.principle());
    let mut s = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    s.write_record(["principle", "parameter", "series", "h_base", "g_star", "g_knee"])
        .expect("in-memory write");
    for (name, r) in order {
        let p = r.principle();
        s.write_record([
            p.map(|p| p.to_string()).unwrap_or_default(),
            p.map(|p| p.parameter_name().to_string()).unwrap_or_default(),
            name.clone(),
            r.get("h_base").unwrap_or("").to_string(),
            r.get("g_star").unwrap_or("").to_string(),
            r.get("g_knee").unwrap_or("").to_string(),
        ])
        .expect("in-memory write");
    }
    out.push_str("\n# summary\n");
    out.push_str(&String::from_utf8(s.into_inner().expect("flush")).expect("utf8"));
    out
}
