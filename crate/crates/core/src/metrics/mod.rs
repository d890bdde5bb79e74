//! Scoring pipeline: response logs in, report out.
//!
//! Stages, in order:
//!
//! 1. extrapolation expands a sparse response log onto the per-timestep
//!    grid: whatever the assistant last said stands until it says
//!    something new,
//! 2. a judge grades each timestep's standing response against the
//!    ground-truth caption,
//! 3. per-task accuracy and consistency fold the verdicts and
//!    substring distances,
//! 4. aggregation combines tasks under one of four weighting schemes,
//! 5. rendering produces a stable JSON report and a readable table.
//!
//! Everything here is deterministic given the same logs, annotations, and
//! judge; reports carry no timestamps so reruns are byte-identical.

mod extrapolate;
mod judge;
mod lcs;
mod report;
mod score;

pub use extrapolate::{extrapolate_timeline, ResponseOrigin, Timeline};
pub(crate) use judge::{normalize_tokens, overlap_ratio};
pub use judge::{
    CachedJudge, Judge, JudgeVerdict, OracleJudge, RemoteJudge, RemoteJudgeConfig,
    JUDGE_PROMPT_TEMPLATE,
};
pub use lcs::{lcs_distance, longest_common_substring_len};
pub use report::{render_report_json, render_report_table, MetricsReport};
pub use score::{
    aggregate, score_task, AggregateScore, ConsistencyDenominator, TaskScore, Weighting,
};

#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error("task {task_id}: consistency needs at least 2 timesteps, got {timesteps}")]
    DegenerateTrack { task_id: String, timesteps: usize },
    #[error("malformed judge verdict: {0}")]
    MalformedVerdict(String),
    #[error("judge unavailable: {0}")]
    JudgeUnavailable(String),
    #[error("{0}")]
    Invalid(String),
}
