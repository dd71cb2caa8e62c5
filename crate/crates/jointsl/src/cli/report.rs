//! Result emission: the score-panel JSON bundle, the per-replication
//! long-format CSV, and median/IQR summaries for box-plot rendering.

use crate::cli::formats::fmt_float;
use crate::error::{Error, Result};
use crate::scoring::Metric;
use crate::superlearn::{PredictSettings, Score, ScorePanel, TestEvaluation};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Weights below this are displayed as 0 in reports; the exact values stay
/// in the panel itself.
pub const WEIGHT_DISPLAY_FLOOR: f64 = 1e-8;

pub fn display_weight(w: f64) -> f64 {
    if w < WEIGHT_DISPLAY_FLOOR {
        0.0
    } else {
        w
    }
}

/// One rendered table cell: a model's score and ensemble weight at one
/// landmark interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableCell {
    pub landmark: f64,
    pub score: Score,
    /// `None` on the eSL row (a combination has no single weight).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weight: Option<f64>,
}

/// One table row: a library member (score + weight per interval) or the
/// final eSL row (score per interval).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub name: String,
    pub cells: Vec<TableCell>,
}

/// Per-metric table mirroring the panel layout: one row per model plus an
/// eSL row (always last).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricTable {
    pub metric: Metric,
    pub rows: Vec<TableRow>,
}

/// Renders the per-metric score/weight tables from a panel.
pub fn render_tables(panel: &ScorePanel) -> Result<Vec<MetricTable>> {
    let mut tables = Vec::with_capacity(panel.metrics.len());
    for &metric in &panel.metrics {
        let mut rows: Vec<TableRow> = panel
            .model_names
            .iter()
            .map(|n| TableRow {
                name: n.clone(),
                cells: Vec::with_capacity(panel.landmarks.len()),
            })
            .collect();
        let mut esl_row = TableRow {
            name: "eSL".into(),
            cells: Vec::with_capacity(panel.landmarks.len()),
        };
        for &t in &panel.landmarks {
            let ip = panel.interval(t, metric).ok_or_else(|| {
                Error::invalid(format!(
                    "panel has no interval for landmark {t} and {metric}"
                ))
            })?;
            for (l, row) in rows.iter_mut().enumerate() {
                row.cells.push(TableCell {
                    landmark: t,
                    score: ip.member_scores[l],
                    weight: Some(display_weight(ip.esl.weights[l])),
                });
            }
            esl_row.cells.push(TableCell {
                landmark: t,
                score: ip.esl.score,
                weight: None,
            });
        }
        rows.push(esl_row);
        tables.push(MetricTable { metric, rows });
    }
    Ok(tables)
}

/// The `superlearn` command's output file: panel + rendered tables +
/// reproducibility envelope.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PanelBundle {
    pub tool_version: String,
    pub seed: u64,
    /// Echo of the invoking configuration.
    pub config: serde_json::Value,
    /// Prediction/fit settings needed to reproduce or extend the run.
    pub settings: PredictSettings,
    pub warnings: Vec<String>,
    pub panel: ScorePanel,
    pub table: Vec<MetricTable>,
}

/// The `evaluate` command's output file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvaluationBundle {
    pub tool_version: String,
    pub seed: u64,
    pub config: serde_json::Value,
    pub warnings: Vec<String>,
    pub evaluations: Vec<TestEvaluation>,
}

pub fn write_json_pretty<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::invalid(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::invalid(format!("{} is not valid JSON: {e}", path.display())))
}

// ---------------------------------------------------------------------------
// Replication report.
// ---------------------------------------------------------------------------

/// The five comparison arms of the replication experiment.
pub const ARMS: [&str; 5] = [
    "dSL-train",
    "eSL-train",
    "dSL-test",
    "eSL-test",
    "oracle-test",
];

/// One observation in the long-format replication CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRow {
    pub replication: usize,
    pub arm: String,
    pub metric: String,
    pub interval: String,
    pub value: f64,
}

pub fn interval_label(t: f64, dt: f64) -> String {
    format!("({},{}]", fmt_float(t), fmt_float(t + dt))
}

/// Serializes the long-format CSV: `replication,arm,metric,interval,value`.
pub fn replication_csv(rows: &[ReplicationRow]) -> Result<String> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(["replication", "arm", "metric", "interval", "value"])?;
    for r in rows {
        w.write_record([
            &r.replication.to_string(),
            &r.arm,
            &r.metric,
            &r.interval,
            &fmt_float(r.value),
        ])?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::invalid(format!("csv buffer error: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::invalid(format!("non-utf8 csv output: {e}")))
}

/// Median and interquartile range (type-7 linear interpolation).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileSummary {
    pub n: usize,
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
}

fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    let frac = h - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Summarizes a sample; non-finite values are kept out of the quantile
/// computation but counted in `n`.
pub fn quantile_summary(values: &[f64]) -> Option<QuantileSummary> {
    let mut finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    if finite.is_empty() {
        return None;
    }
    finite.sort_by(f64::total_cmp);
    Some(QuantileSummary {
        n: values.len(),
        median: quantile_sorted(&finite, 0.5),
        q25: quantile_sorted(&finite, 0.25),
        q75: quantile_sorted(&finite, 0.75),
    })
}

/// Groups replication rows and summarizes each (arm, metric, interval).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmSummary {
    pub arm: String,
    pub metric: String,
    pub interval: String,
    pub summary: QuantileSummary,
}

pub fn summarize_rows(rows: &[ReplicationRow]) -> Vec<ArmSummary> {
    let mut keys: Vec<(String, String, String)> = Vec::new();
    for r in rows {
        let key = (r.arm.clone(), r.metric.clone(), r.interval.clone());
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    let mut out = Vec::with_capacity(keys.len());
    for (arm, metric, interval) in keys {
        let values: Vec<f64> = rows
            .iter()
            .filter(|r| r.arm == arm && r.metric == metric && r.interval == interval)
            .map(|r| r.value)
            .collect();
        if let Some(summary) = quantile_summary(&values) {
            out.push(ArmSummary {
                arm,
                metric,
                interval,
                summary,
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles_match_hand_values() {
        // Sorted sample 1..=5: median 3, q25 2, q75 4 (type-7).
        let s = quantile_summary(&[5.0, 3.0, 1.0, 4.0, 2.0]).unwrap();
        assert_eq!(s.median, 3.0);
        assert_eq!(s.q25, 2.0);
        assert_eq!(s.q75, 4.0);
        // Even n interpolates: {1,2,3,4} → median 2.5, q25 1.75, q75 3.25.
        let s = quantile_summary(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(s.median, 2.5);
        assert_eq!(s.q25, 1.75);
        assert_eq!(s.q75, 3.25);
        // Infinite entries are excluded from quantiles but counted.
        let s = quantile_summary(&[1.0, f64::INFINITY, 3.0]).unwrap();
        assert_eq!(s.n, 3);
        assert_eq!(s.median, 2.0);
        assert!(quantile_summary(&[f64::INFINITY]).is_none());
    }

    #[test]
    fn replication_csv_layout() {
        let rows = vec![
            ReplicationRow {
                replication: 0,
                arm: "dSL-test".into(),
                metric: "epce".into(),
                interval: interval_label(16.0, 2.0),
                value: 0.25,
            },
            ReplicationRow {
                replication: 1,
                arm: "oracle-test".into(),
                metric: "ibs-ipcw".into(),
                interval: interval_label(19.0, 2.0),
                value: f64::INFINITY,
            },
        ];
        let text = replication_csv(&rows).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "replication,arm,metric,interval,value");
        assert_eq!(lines[1], "0,dSL-test,epce,\"(16,18]\",0.25");
        assert_eq!(lines[2], "1,oracle-test,ibs-ipcw,\"(19,21]\",inf");
    }

    #[test]
    fn weight_display_floor() {
        assert_eq!(display_weight(1e-9), 0.0);
        assert_eq!(display_weight(0.3), 0.3);
    }
}
