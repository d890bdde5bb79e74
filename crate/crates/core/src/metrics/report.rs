//! Report assembly and rendering.
//!
//! One report covers one scored suite: per-task scores keyed by task id
//! plus aggregates under every weighting scheme. The JSON rendering is
//! byte-stable across reruns (sorted maps, no timestamps), which makes
//! reports diffable and lets tests pin them exactly. The table rendering
//! is for humans.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{
    aggregate, AggregateScore, ConsistencyDenominator, MetricsError, TaskScore, Weighting,
};
use crate::types::TaskType;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub judge: String,
    pub consistency_denominator: ConsistencyDenominator,
    /// The weighting the run was asked to headline; all four are computed.
    pub weighting: Weighting,
    pub aggregates: BTreeMap<String, AggregateScore>,
    pub tasks: BTreeMap<String, TaskScore>,
    pub warnings: Vec<String>,
}

impl MetricsReport {
    pub fn build(
        scores: Vec<TaskScore>,
        judge: String,
        consistency_denominator: ConsistencyDenominator,
        weighting: Weighting,
        warnings: Vec<String>,
    ) -> Result<Self, MetricsError> {
        let mut aggregates = BTreeMap::new();
        for w in Weighting::ALL {
            aggregates.insert(w.as_str().to_string(), aggregate(&scores, w)?);
        }
        let mut tasks = BTreeMap::new();
        for score in scores {
            if tasks.insert(score.task_id.clone(), score).is_some() {
                return Err(MetricsError::Invalid(
                    "duplicate task id in scores".into(),
                ));
            }
        }
        Ok(MetricsReport {
            judge,
            consistency_denominator,
            weighting,
            aggregates,
            tasks,
            warnings,
        })
    }

    pub fn headline(&self) -> &AggregateScore {
        &self.aggregates[self.weighting.as_str()]
    }
}

/// Pretty JSON with a trailing newline. Rerunning on identical inputs
/// yields identical bytes.
pub fn render_report_json(report: &MetricsReport) -> String {
    let mut out = serde_json::to_string_pretty(report).expect("report serializes");
    out.push('\n');
    out
}

fn pct(x: f64) -> String {
    format!("{:.1}", 100.0 * x)
}

fn mean<F: Fn(&TaskScore) -> f64>(tasks: &[&TaskScore], f: F) -> Option<f64> {
    if tasks.is_empty() {
        return None;
    }
    Some(tasks.iter().map(|t| f(t)).sum::<f64>() / tasks.len() as f64)
}

fn cell(value: Option<f64>) -> String {
    value.map(pct).unwrap_or_else(|| "-".into())
}

/// Plain-text tables: accuracy broken down by category and task type,
/// then one row per task, then the four aggregates.
pub fn render_report_table(report: &MetricsReport) -> String {
    let scores: Vec<&TaskScore> = report.tasks.values().collect();
    let categories: BTreeSet<&str> = scores.iter().map(|s| s.category.as_str()).collect();
    let mut out = String::new();

    out.push_str("Accuracy by category and task type (%)\n\n");
    let mut rows: Vec<(String, Vec<String>)> = Vec::new();
    let all_label = "all".to_string();
    for category in categories.iter().copied().chain([all_label.as_str()]) {
        let cohort: Vec<&TaskScore> = scores
            .iter()
            .copied()
            .filter(|s| category == "all" || s.category == category)
            .collect();
        let mut cells = Vec::new();
        for task_type in TaskType::ALL {
            let of_type: Vec<&TaskScore> = cohort
                .iter()
                .copied()
                .filter(|s| s.task_type == task_type)
                .collect();
            cells.push(cell(mean(&of_type, |s| s.accuracy)));
        }
        cells.push(cell(mean(&cohort, |s| s.accuracy)));
        cells.push(cell(mean(&cohort, |s| s.consistency)));
        rows.push((category.to_string(), cells));
    }
    let headers = ["Present", "Cumulative", "Future", "Overall", "Consistency"];
    let name_width = rows
        .iter()
        .map(|(name, _)| name.len())
        .chain(["Category".len()])
        .max()
        .unwrap();
    let _ = writeln!(
        out,
        "{:<name_width$}  {:>11}  {:>11}  {:>11}  {:>11}  {:>11}",
        "Category", headers[0], headers[1], headers[2], headers[3], headers[4]
    );
    for (name, cells) in &rows {
        let _ = writeln!(
            out,
            "{:<name_width$}  {:>11}  {:>11}  {:>11}  {:>11}  {:>11}",
            name, cells[0], cells[1], cells[2], cells[3], cells[4]
        );
    }

    out.push_str("\nPer task\n\n");
    let id_width = scores
        .iter()
        .map(|s| s.task_id.len())
        .chain(["Task".len()])
        .max()
        .unwrap();
    let _ = writeln!(
        out,
        "{:<id_width$}  {:<10}  {:>12}  {:>15}  {:>16}  {:>20}",
        "Task", "Type", "Accuracy (%)", "Consistency (%)", "Mean latency (s)", "direct/carried/empty"
    );
    for s in &scores {
        let latency = s
            .mean_latency
            .map(|l| format!("{l:.3}"))
            .unwrap_or_else(|| "-".into());
        let _ = writeln!(
            out,
            "{:<id_width$}  {:<10}  {:>12}  {:>15}  {:>16}  {:>20}",
            s.task_id,
            s.task_type.as_str(),
            pct(s.accuracy),
            pct(s.consistency),
            latency,
            format!("{}/{}/{}", s.direct, s.carried, s.empty)
        );
    }

    out.push_str("\nAggregates (%)\n\n");
    let _ = writeln!(
        out,
        "{:<18}  {:>9}  {:>12}  {:>16}",
        "Weighting", "Accuracy", "Consistency", "Mean latency (s)"
    );
    for w in Weighting::ALL {
        let a = &report.aggregates[w.as_str()];
        let marker = if w == report.weighting { " *" } else { "" };
        let latency = a
            .mean_latency
            .map(|l| format!("{l:.3}"))
            .unwrap_or_else(|| "-".into());
        let _ = writeln!(
            out,
            "{:<18}  {:>9}  {:>12}  {:>16}{marker}",
            w.as_str(),
            pct(a.accuracy),
            pct(a.consistency),
            latency
        );
    }
    let _ = writeln!(
        out,
        "\njudge: {}; consistency denominator: {}; {} tasks",
        report.judge,
        report.consistency_denominator,
        report.tasks.len()
    );

    if !report.warnings.is_empty() {
        out.push_str("\nWarnings\n\n");
        for w in &report.warnings {
            let _ = writeln!(out, "  {w}");
        }
    }
    out
}
