//! Per-task scores and cross-task aggregation.
//!
//! Accuracy is the share of timesteps whose standing response the judge
//! accepted. Consistency rewards keeping answers stable while the scene is
//! stable: each consecutive pair contributes `1 - D(r_i, r_i+1) +
//! D(g_i, g_i+1)` where `D` is the substring distance, so response churn
//! costs exactly as much as the ground truth itself churned. The pair sum
//! is divided by the timestep count by default (a full-length track of
//! stable answers lands just below 1) and clamped into [0, 1].

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{extrapolate_timeline, lcs_distance, Judge, MetricsError, ResponseOrigin};
use crate::types::{AnnotationTrack, ResponseLog, TaskType};

/// What the consistency pair sum is divided by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConsistencyDenominator {
    /// Timestep count `n`. The score saturates below 1 on finite tracks.
    #[default]
    Timesteps,
    /// Pair count `n - 1`, a plain mean over pairs.
    Pairs,
}

impl ConsistencyDenominator {
    pub fn as_str(&self) -> &'static str {
        match self {
            ConsistencyDenominator::Timesteps => "timesteps",
            ConsistencyDenominator::Pairs => "pairs",
        }
    }

    fn divisor(&self, timesteps: usize) -> f64 {
        match self {
            ConsistencyDenominator::Timesteps => timesteps as f64,
            ConsistencyDenominator::Pairs => (timesteps - 1) as f64,
        }
    }
}

impl std::fmt::Display for ConsistencyDenominator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ConsistencyDenominator {
    type Err = MetricsError;

    fn from_str(s: &str) -> Result<Self, MetricsError> {
        match s.to_ascii_lowercase().as_str() {
            "timesteps" => Ok(ConsistencyDenominator::Timesteps),
            "pairs" => Ok(ConsistencyDenominator::Pairs),
            _ => Err(MetricsError::Invalid(format!(
                "unknown consistency denominator {s:?} (expected timesteps or pairs)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskScore {
    pub task_id: String,
    pub task_type: TaskType,
    pub category: String,
    pub timesteps: usize,
    pub responses: usize,
    /// Share of judged timesteps graded a match.
    pub accuracy: f64,
    /// Raw consistency clamped into [0, 1].
    pub consistency: f64,
    pub raw_consistency: f64,
    /// Mean seconds per response, pauses included. Absent when the model
    /// never answered.
    pub mean_latency: Option<f64>,
    pub judged: usize,
    pub judge_failures: usize,
    pub direct: usize,
    pub carried: usize,
    pub empty: usize,
}

/// Grades one task. Judge failures drop the timestep from the accuracy
/// denominator and leave a warning; a judge that fails every timestep
/// fails the task.
pub fn score_task(
    track: &AnnotationTrack,
    log: &ResponseLog,
    judge: &mut dyn Judge,
    denominator: ConsistencyDenominator,
    warnings: &mut Vec<String>,
) -> Result<TaskScore, MetricsError> {
    let n = track.len_timesteps();
    if n < 2 {
        return Err(MetricsError::DegenerateTrack {
            task_id: track.task_id.clone(),
            timesteps: n,
        });
    }
    let timeline = extrapolate_timeline(&log.responses, n);
    let mut matches = 0usize;
    let mut judged = 0usize;
    let mut judge_failures = 0usize;
    for (i, text) in timeline.texts.iter().enumerate() {
        let caption = track.caption_at(i as u32).expect("grid length checked");
        match judge.verdict(&track.prompt, caption, text) {
            Ok(v) => {
                judged += 1;
                if v.pred() {
                    matches += 1;
                }
            }
            Err(e) => {
                judge_failures += 1;
                warnings.push(format!("task {} timestep {i}: {e}", track.task_id));
            }
        }
    }
    if judged == 0 {
        return Err(MetricsError::JudgeUnavailable(format!(
            "all {n} verdicts failed for task {}",
            track.task_id
        )));
    }
    let mut pair_sum = 0.0;
    for i in 0..n - 1 {
        let d_response = lcs_distance(&timeline.texts[i], &timeline.texts[i + 1]);
        let d_truth = lcs_distance(
            track.caption_at(i as u32).expect("grid length checked"),
            track.caption_at(i as u32 + 1).expect("grid length checked"),
        );
        pair_sum += 1.0 - d_response + d_truth;
    }
    let raw_consistency = pair_sum / denominator.divisor(n);
    let mean_latency = if log.responses.is_empty() {
        None
    } else {
        Some(log.responses.iter().map(|r| r.latency).sum::<f64>() / log.responses.len() as f64)
    };
    Ok(TaskScore {
        task_id: track.task_id.clone(),
        task_type: track.task_type,
        category: track.category.clone(),
        timesteps: n,
        responses: log.responses.len(),
        accuracy: matches as f64 / judged as f64,
        consistency: raw_consistency.clamp(0.0, 1.0),
        raw_consistency,
        mean_latency,
        judged,
        judge_failures,
        direct: timeline.count_origin(ResponseOrigin::Direct),
        carried: timeline.count_origin(ResponseOrigin::Carried),
        empty: timeline.count_origin(ResponseOrigin::Empty),
    })
}

/// How much each task counts when averaging across a suite. Inverse
/// schemes stop over-represented cohorts from dominating the mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    #[default]
    Uniform,
    /// Each video category contributes equally.
    InverseCategory,
    /// Each task type contributes equally.
    InverseTask,
    /// Product of both inverse weights.
    InverseBoth,
}

impl Weighting {
    pub const ALL: [Weighting; 4] = [
        Weighting::Uniform,
        Weighting::InverseCategory,
        Weighting::InverseTask,
        Weighting::InverseBoth,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Weighting::Uniform => "uniform",
            Weighting::InverseCategory => "inverse_category",
            Weighting::InverseTask => "inverse_task",
            Weighting::InverseBoth => "inverse_both",
        }
    }
}

impl std::fmt::Display for Weighting {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Weighting {
    type Err = MetricsError;

    fn from_str(s: &str) -> Result<Self, MetricsError> {
        match s.to_ascii_lowercase().as_str() {
            "uniform" => Ok(Weighting::Uniform),
            "inverse_category" => Ok(Weighting::InverseCategory),
            "inverse_task" => Ok(Weighting::InverseTask),
            "inverse_both" => Ok(Weighting::InverseBoth),
            _ => Err(MetricsError::Invalid(format!(
                "unknown weighting {s:?} (expected uniform, inverse_category, inverse_task, or inverse_both)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateScore {
    pub accuracy: f64,
    pub consistency: f64,
    /// Weighted over tasks that answered at least once.
    pub mean_latency: Option<f64>,
    pub tasks: usize,
}

fn cohort_weights(scores: &[TaskScore], weighting: Weighting) -> Vec<f64> {
    let mut by_category: BTreeMap<&str, f64> = BTreeMap::new();
    let mut by_type: BTreeMap<TaskType, f64> = BTreeMap::new();
    for s in scores {
        *by_category.entry(s.category.as_str()).or_default() += 1.0;
        *by_type.entry(s.task_type).or_default() += 1.0;
    }
    let raw: Vec<f64> = scores
        .iter()
        .map(|s| match weighting {
            Weighting::Uniform => 1.0,
            Weighting::InverseCategory => 1.0 / by_category[s.category.as_str()],
            Weighting::InverseTask => 1.0 / by_type[&s.task_type],
            Weighting::InverseBoth => {
                1.0 / (by_category[s.category.as_str()] * by_type[&s.task_type])
            }
        })
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

/// Weighted mean of per-task scores.
pub fn aggregate(scores: &[TaskScore], weighting: Weighting) -> Result<AggregateScore, MetricsError> {
    if scores.is_empty() {
        return Err(MetricsError::Invalid("no task scores to aggregate".into()));
    }
    let weights = cohort_weights(scores, weighting);
    let mut accuracy = 0.0;
    let mut consistency = 0.0;
    let mut latency_sum = 0.0;
    let mut latency_weight = 0.0;
    for (s, w) in scores.iter().zip(&weights) {
        accuracy += w * s.accuracy;
        consistency += w * s.consistency;
        if let Some(l) = s.mean_latency {
            latency_sum += w * l;
            latency_weight += w;
        }
    }
    let mean_latency = (latency_weight > 0.0).then(|| latency_sum / latency_weight);
    Ok(AggregateScore {
        accuracy,
        consistency,
        mean_latency,
        tasks: scores.len(),
    })
}
