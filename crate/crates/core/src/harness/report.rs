use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{FailureKind, TaskRecord};

pub const OVERALL: &str = "overall";

/// One row of the results table: a site or the whole run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupMetrics {
    pub site: String,
    pub tasks: usize,
    pub success_pct: f64,
    pub self_aware_pct: f64,
    pub oblivious_pct: f64,
    /// Mean wall time of successful tasks; none when there are none.
    pub tct_success_s: Option<f64>,
    pub tct_failed_s: Option<f64>,
    pub calls_total: f64,
    pub calls_planner: f64,
    pub calls_navigator: f64,
}

/// Per-site rows in site order, then the overall row. Empty for no records.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub rows: Vec<GroupMetrics>,
}

impl RunMetrics {
    pub fn overall(&self) -> Option<&GroupMetrics> {
        self.rows.iter().find(|r| r.site == OVERALL)
    }

    pub fn site(&self, site: &str) -> Option<&GroupMetrics> {
        self.rows.iter().find(|r| r.site == site)
    }
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

fn group(site: &str, records: &[&TaskRecord]) -> GroupMetrics {
    let n = records.len();
    let pct = |pred: &dyn Fn(&TaskRecord) -> bool| {
        records.iter().filter(|r| pred(r)).count() as f64 * 100.0 / n as f64
    };
    GroupMetrics {
        site: site.to_string(),
        tasks: n,
        success_pct: pct(&|r| r.failure_kind.is_none()),
        self_aware_pct: pct(&|r| r.failure_kind == Some(FailureKind::SelfAware)),
        oblivious_pct: pct(&|r| r.failure_kind == Some(FailureKind::Oblivious)),
        tct_success_s: mean(
            records
                .iter()
                .filter(|r| r.failure_kind.is_none())
                .map(|r| r.wall_time_s),
        ),
        tct_failed_s: mean(
            records
                .iter()
                .filter(|r| r.failure_kind.is_some())
                .map(|r| r.wall_time_s),
        ),
        calls_total: mean(records.iter().map(|r| r.ledger.total as f64)).unwrap_or(0.0),
        calls_planner: mean(records.iter().map(|r| r.ledger.planner as f64)).unwrap_or(0.0),
        calls_navigator: mean(records.iter().map(|r| r.ledger.navigator as f64)).unwrap_or(0.0),
    }
}

/// Pure function of the records.
pub fn compute_metrics(records: &[TaskRecord]) -> RunMetrics {
    if records.is_empty() {
        return RunMetrics::default();
    }
    let mut by_site: BTreeMap<&str, Vec<&TaskRecord>> = BTreeMap::new();
    for r in records {
        by_site.entry(r.site.as_str()).or_default().push(r);
    }
    let mut rows: Vec<GroupMetrics> = by_site.iter().map(|(site, rs)| group(site, rs)).collect();
    rows.push(group(OVERALL, &records.iter().collect::<Vec<_>>()));
    RunMetrics { rows }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    #[default]
    Table,
    Json,
    Csv,
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Table => "txt",
            ReportFormat::Json => "json",
            ReportFormat::Csv => "csv",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReportError {
    #[error("unknown report format {0:?}; expected table, json or csv")]
    UnknownFormat(String),
    #[error("report line {line}: {reason}")]
    Malformed { line: usize, reason: String },
}

impl FromStr for ReportFormat {
    type Err = ReportError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "table" => Ok(ReportFormat::Table),
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(ReportError::UnknownFormat(other.to_string())),
        }
    }
}

pub const COLUMNS: [&str; 10] = [
    "site",
    "tasks",
    "success_pct",
    "self_aware_pct",
    "oblivious_pct",
    "tct_success_s",
    "tct_failed_s",
    "calls_total",
    "calls_planner",
    "calls_navigator",
];

fn round_to(x: f64, places: i32) -> f64 {
    let f = 10f64.powi(places);
    let r = (x * f).round() / f;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

/// Percentages and call means at 0.1, seconds at 1.
pub fn rounded(m: &GroupMetrics) -> GroupMetrics {
    GroupMetrics {
        site: m.site.clone(),
        tasks: m.tasks,
        success_pct: round_to(m.success_pct, 1),
        self_aware_pct: round_to(m.self_aware_pct, 1),
        oblivious_pct: round_to(m.oblivious_pct, 1),
        tct_success_s: m.tct_success_s.map(|v| round_to(v, 0)),
        tct_failed_s: m.tct_failed_s.map(|v| round_to(v, 0)),
        calls_total: round_to(m.calls_total, 1),
        calls_planner: round_to(m.calls_planner, 1),
        calls_navigator: round_to(m.calls_navigator, 1),
    }
}

fn cells(m: &GroupMetrics) -> Vec<String> {
    let m = rounded(m);
    let secs = |v: Option<f64>| v.map(|v| format!("{v:.0}")).unwrap_or_default();
    vec![
        m.site.clone(),
        m.tasks.to_string(),
        format!("{:.1}", m.success_pct),
        format!("{:.1}", m.self_aware_pct),
        format!("{:.1}", m.oblivious_pct),
        secs(m.tct_success_s),
        secs(m.tct_failed_s),
        format!("{:.1}", m.calls_total),
        format!("{:.1}", m.calls_planner),
        format!("{:.1}", m.calls_navigator),
    ]
}

const TABLE_HEADERS: [&str; 10] = [
    "Site",
    "Tasks",
    "Success %",
    "Self-aware failures %",
    "Oblivious failures %",
    "TCT success (s)",
    "TCT failed (s)",
    "LLM calls total",
    "LLM calls planner",
    "LLM calls navigator",
];

/// Deterministic serialization of the metrics.
pub fn emit_report(metrics: &RunMetrics, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => {
            let rows: Vec<GroupMetrics> = metrics.rows.iter().map(rounded).collect();
            let mut s = serde_json::to_string_pretty(
                &serde_json::json!({ "columns": COLUMNS, "rows": rows }),
            )
            .expect("metrics serialize");
            s.push('\n');
            s
        }
        ReportFormat::Csv => {
            let mut s = COLUMNS.join(",");
            s.push('\n');
            for row in &metrics.rows {
                let line: Vec<String> = cells(row).into_iter().map(|c| csv_cell(&c)).collect();
                s.push_str(&line.join(","));
                s.push('\n');
            }
            s
        }
        ReportFormat::Table => {
            let rows: Vec<Vec<String>> = metrics
                .rows
                .iter()
                .map(|r| {
                    cells(r)
                        .into_iter()
                        .map(|c| if c.is_empty() { "-".to_string() } else { c })
                        .collect()
                })
                .collect();
            let widths: Vec<usize> = (0..TABLE_HEADERS.len())
                .map(|i| {
                    rows.iter()
                        .map(|r| r[i].len())
                        .chain([TABLE_HEADERS[i].len()])
                        .max()
                        .unwrap_or(0)
                })
                .collect();
            let mut s = String::new();
            let line = |cols: Vec<&str>, s: &mut String| {
                let padded: Vec<String> = cols
                    .iter()
                    .enumerate()
                    .map(|(i, c)| {
                        if i == 0 {
                            format!("{c:<w$}", w = widths[i])
                        } else {
                            format!("{c:>w$}", w = widths[i])
                        }
                    })
                    .collect();
                let _ = writeln!(s, "{}", padded.join(" | ").trim_end());
            };
            line(TABLE_HEADERS.to_vec(), &mut s);
            let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
            let _ = writeln!(s, "{}", rule.join("-+-"));
            for r in &rows {
                line(r.iter().map(String::as_str).collect(), &mut s);
            }
            s
        }
    }
}

fn csv_cell(c: &str) -> String {
    if c.contains([',', '"', '\n']) {
        format!("\"{}\"", c.replace('"', "\"\""))
    } else {
        c.to_string()
    }
}

fn split_csv_line(line: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut quoted = false;
    let mut chars = line.chars().peekable();
    while let Some(c) = chars.next() {
        match (c, quoted) {
            ('"', true) if chars.peek() == Some(&'"') => {
                cur.push('"');
                chars.next();
            }
            ('"', _) => quoted = !quoted,
            (',', false) => out.push(std::mem::take(&mut cur)),
            _ => cur.push(c),
        }
    }
    out.push(cur);
    out
}

pub fn parse_report_json(text: &str) -> Result<RunMetrics, ReportError> {
    #[derive(Deserialize)]
    struct Doc {
        rows: Vec<GroupMetrics>,
    }
    let doc: Doc = serde_json::from_str(text).map_err(|e| ReportError::Malformed {
        line: e.line(),
        reason: e.to_string(),
    })?;
    Ok(RunMetrics { rows: doc.rows })
}

pub fn parse_report_csv(text: &str) -> Result<RunMetrics, ReportError> {
    let mut lines = text.lines().enumerate();
    let header = lines.next().map(|(_, l)| l).unwrap_or_default();
    if header != COLUMNS.join(",") {
        return Err(ReportError::Malformed {
            line: 1,
            reason: "unexpected header".into(),
        });
    }
    let mut rows = Vec::new();
    for (idx, line) in lines.filter(|(_, l)| !l.trim().is_empty()) {
        let bad = |reason: String| ReportError::Malformed {
            line: idx + 1,
            reason,
        };
        let c = split_csv_line(line);
        if c.len() != COLUMNS.len() {
            return Err(bad(format!(
                "expected {} cells, found {}",
                COLUMNS.len(),
                c.len()
            )));
        }
        let num = |i: usize| {
            c[i].parse::<f64>()
                .map_err(|e| bad(format!("{}: {e}", COLUMNS[i])))
        };
        let opt = |i: usize| {
            if c[i].is_empty() {
                Ok(None)
            } else {
                num(i).map(Some)
            }
        };
        rows.push(GroupMetrics {
            site: c[0].clone(),
            tasks: c[1].parse().map_err(|e| bad(format!("tasks: {e}")))?,
            success_pct: num(2)?,
            self_aware_pct: num(3)?,
            oblivious_pct: num(4)?,
            tct_success_s: opt(5)?,
            tct_failed_s: opt(6)?,
            calls_total: num(7)?,
            calls_planner: num(8)?,
            calls_navigator: num(9)?,
        });
    }
    Ok(RunMetrics { rows })
}
