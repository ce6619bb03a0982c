use std::path::Path;

use serde::{Deserialize, Serialize};

use super::sweep::SweepRow;
use crate::policy::AgentConfig;
use crate::simulator::SimConfig;
use crate::{Error, Result};

pub const METRICS_CSV: &str = "metrics.csv";
pub const CURVES_CSV: &str = "curves.csv";
pub const METRICS_JSON: &str = "metrics.json";

/// Settings echoed into every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportConfig {
    pub sim: SimConfig,
    pub agent: Option<AgentConfig>,
    pub seeds: Vec<u64>,
    /// Policy the relative curves are measured against.
    pub reference: Option<String>,
    /// Anything else the caller wants recorded (dataset spec, paths).
    #[serde(default)]
    pub extra: serde_json::Value,
}

/// One line of `metrics.csv`; `tier` is `all` for the overall numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsLine {
    pub kind: String,
    pub value: String,
    pub policy: String,
    pub tier: String,
    pub episodes: usize,
    pub success_rate: f64,
    pub average_turn: f64,
    pub impatience: f64,
}

pub fn metrics_lines(rows: &[SweepRow]) -> Vec<MetricsLine> {
    let mut out = Vec::new();
    for row in rows {
        let r = &row.report;
        let parts = std::iter::once(("all".to_string(), &r.summary))
            .chain(r.tiers.iter().map(|(t, s)| (t.name().to_string(), s)));
        for (tier, s) in parts {
            out.push(MetricsLine {
                kind: row.kind.clone(),
                value: row.value.clone(),
                policy: r.policy.clone(),
                tier,
                episodes: s.episodes,
                success_rate: s.success_rate,
                average_turn: s.average_turn,
                impatience: s.impatience,
            });
        }
    }
    out
}

/// Per-turn success of each row minus that of the reference policy at the
/// same grid point. Rows without a reference at their grid point are
/// skipped.
pub fn relative_curves(rows: &[SweepRow], reference: &str) -> Vec<(usize, Vec<f64>)> {
    rows.iter()
        .enumerate()
        .filter_map(|(i, row)| {
            let base = rows.iter().find(|r| {
                r.kind == row.kind && r.value == row.value && r.report.policy == reference
            })?;
            let rel = row
                .report
                .per_turn_success
                .iter()
                .zip(&base.report.per_turn_success)
                .map(|(a, b)| a - b)
                .collect();
            Some((i, rel))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CurveLine {
    kind: String,
    value: String,
    policy: String,
    turn: usize,
    success: f64,
    relative: Option<f64>,
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| Error::io(path, e.into())
}

/// Writes `metrics.csv`, `curves.csv` and `metrics.json` into `dir`.
pub fn write_report(dir: impl AsRef<Path>, rows: &[SweepRow], config: &ReportConfig) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let relative = config
        .reference
        .as_deref()
        .map(|r| relative_curves(rows, r))
        .unwrap_or_default();

    let path = dir.join(METRICS_CSV);
    let mut w = csv::Writer::from_path(&path).map_err(csv_err(&path))?;
    for line in metrics_lines(rows) {
        w.serialize(line).map_err(csv_err(&path))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let path = dir.join(CURVES_CSV);
    let mut w = csv::Writer::from_path(&path).map_err(csv_err(&path))?;
    for (i, row) in rows.iter().enumerate() {
        let rel = relative.iter().find(|(j, _)| *j == i).map(|(_, r)| r);
        for (t, &s) in row.report.per_turn_success.iter().enumerate() {
            w.serialize(CurveLine {
                kind: row.kind.clone(),
                value: row.value.clone(),
                policy: row.report.policy.clone(),
                turn: t + 1,
                success: s,
                relative: rel.map(|r| r[t]),
            })
            .map_err(csv_err(&path))?;
        }
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let json = serde_json::json!({
        "config": config,
        "rows": rows,
        "relative_curves": relative
            .iter()
            .map(|(i, r)| serde_json::json!({
                "kind": rows[*i].kind,
                "value": rows[*i].value,
                "policy": rows[*i].report.policy,
                "relative_success": r,
            }))
            .collect::<Vec<_>>(),
    });
    let path = dir.join(METRICS_JSON);
    std::fs::write(&path, serde_json::to_string_pretty(&json)?).map_err(|e| Error::io(&path, e))
}

pub fn read_metrics_csv(path: impl AsRef<Path>) -> Result<Vec<MetricsLine>> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    r.deserialize()
        .map(|rec| {
            rec.map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: e.position().map_or(0, |p| p.line() as usize),
                message: e.to_string(),
            })
        })
        .collect()
}
