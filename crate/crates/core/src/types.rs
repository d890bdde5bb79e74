//! Annotation and response-log schemas shared by every other module.
//!
//! Both file formats are plain JSON. Validation reports *all* violations at
//! once rather than bailing at the first, so a bad file can be fixed in one
//! pass; every violation carries the offending track id and field.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

/// What the task asks about relative to the current second of the stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskType {
    /// Describe what is happening right now.
    Present,
    /// Summarize everything seen so far.
    Cumulative,
    /// Anticipate what happens next.
    Future,
}

impl TaskType {
    pub const ALL: [TaskType; 3] = [TaskType::Present, TaskType::Cumulative, TaskType::Future];

    pub fn as_str(&self) -> &'static str {
        match self {
            TaskType::Present => "present",
            TaskType::Cumulative => "cumulative",
            TaskType::Future => "future",
        }
    }
}

impl fmt::Display for TaskType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Ground truth for one second of the stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationEntry {
    /// 0-based integer second.
    #[serde(rename = "t")]
    pub timestep: u32,
    pub caption: String,
}

/// One task over one video: a prompt plus per-second ground-truth captions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationTrack {
    pub task_id: String,
    pub video_id: String,
    pub task_type: TaskType,
    pub category: String,
    pub prompt: String,
    pub entries: Vec<AnnotationEntry>,
}

impl AnnotationTrack {
    /// Number of annotated timesteps.
    pub fn len_timesteps(&self) -> usize {
        self.entries.len()
    }

    /// Caption at `timestep`, if annotated.
    pub fn caption_at(&self, timestep: u32) -> Option<&str> {
        self.entries
            .get(timestep as usize)
            .map(|e| e.caption.as_str())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct AnnotationFile {
    tracks: Vec<AnnotationTrack>,
}

/// Which runner produced a response log.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Sync,
    Async,
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Protocol::Sync => "sync",
            Protocol::Async => "async",
        })
    }
}

/// One model utterance, stamped on the run's timeline.
///
/// `covered_timestep` is the newest frame the model had seen when this
/// response was produced; `is_pause` marks a deliberate non-answer and
/// implies empty text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimedResponse {
    pub emit_time: f64,
    pub covered_timestep: u32,
    pub text: String,
    pub is_pause: bool,
    pub latency: f64,
}

/// Full transcript of one task run plus enough metadata to reproduce it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseLog {
    pub task_id: String,
    pub protocol: Protocol,
    pub run_metadata: BTreeMap<String, serde_json::Value>,
    pub responses: Vec<TimedResponse>,
}

/// A single schema violation, pointing at the track and field that broke.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub track: String,
    pub field: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{} / {}] {}", self.track, self.field, self.message)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CoreError {
    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("schema violations:{}", format_violations(.0))]
    Schema(Vec<Violation>),
}

fn format_violations(violations: &[Violation]) -> String {
    let mut out = String::new();
    for v in violations {
        out.push_str("\n  ");
        out.push_str(&v.to_string());
    }
    out
}

/// Parses and validates an annotation file, returning its tracks.
///
/// Checks: unique task ids, non-empty prompt, non-empty entries, and
/// timesteps exactly 0..N-1 in order. All violations are reported together.
pub fn validate_annotation_file(document: &str) -> Result<Vec<AnnotationTrack>, CoreError> {
    let file: AnnotationFile = serde_json::from_str(document)?;
    let mut violations = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for track in &file.tracks {
        let id = if track.task_id.is_empty() {
            "<unnamed>"
        } else {
            &track.task_id
        };
        if !seen.insert(track.task_id.clone()) {
            violations.push(Violation {
                track: id.to_string(),
                field: "task_id".into(),
                message: "duplicate task id".into(),
            });
        }
        if track.task_id.is_empty() {
            violations.push(Violation {
                track: id.to_string(),
                field: "task_id".into(),
                message: "task id must be non-empty".into(),
            });
        }
        if track.prompt.trim().is_empty() {
            violations.push(Violation {
                track: id.to_string(),
                field: "prompt".into(),
                message: "prompt must be non-empty".into(),
            });
        }
        if track.entries.is_empty() {
            violations.push(Violation {
                track: id.to_string(),
                field: "entries".into(),
                message: "track has no annotated timesteps".into(),
            });
        }
        for (i, entry) in track.entries.iter().enumerate() {
            if entry.timestep as usize != i {
                violations.push(Violation {
                    track: id.to_string(),
                    field: format!("entries[{i}].t"),
                    message: format!(
                        "timesteps must run 0..{} consecutively, found {}",
                        track.entries.len() - 1,
                        entry.timestep
                    ),
                });
                break;
            }
        }
    }
    if violations.is_empty() {
        Ok(file.tracks)
    } else {
        Err(CoreError::Schema(violations))
    }
}

/// Serializes tracks back into the annotation file format.
pub fn annotation_file_to_json(tracks: &[AnnotationTrack]) -> String {
    let file = AnnotationFile {
        tracks: tracks.to_vec(),
    };
    let mut s = serde_json::to_string_pretty(&file).expect("annotation serialization");
    s.push('\n');
    s
}

impl ResponseLog {
    /// Checks the log's internal ordering invariants.
    ///
    /// Responses must strictly increase in emit_time and never go backwards
    /// in covered_timestep; emit_time and latency must be finite and
    /// non-negative; pauses must carry empty text.
    pub fn validate(&self) -> Result<(), CoreError> {
        let mut violations = Vec::new();
        let mut prev_emit = f64::NEG_INFINITY;
        let mut prev_covered = 0u32;
        for (i, r) in self.responses.iter().enumerate() {
            if !r.emit_time.is_finite() || r.emit_time < 0.0 {
                violations.push(Violation {
                    track: self.task_id.clone(),
                    field: format!("responses[{i}].emit_time"),
                    message: format!("must be finite and >= 0, found {}", r.emit_time),
                });
            }
            if !r.latency.is_finite() || r.latency < 0.0 {
                violations.push(Violation {
                    track: self.task_id.clone(),
                    field: format!("responses[{i}].latency"),
                    message: format!("must be finite and >= 0, found {}", r.latency),
                });
            }
            if i > 0 && r.emit_time <= prev_emit {
                violations.push(Violation {
                    track: self.task_id.clone(),
                    field: format!("responses[{i}].emit_time"),
                    message: format!(
                        "emit times must strictly increase ({} after {})",
                        r.emit_time, prev_emit
                    ),
                });
            }
            if i > 0 && r.covered_timestep < prev_covered {
                violations.push(Violation {
                    track: self.task_id.clone(),
                    field: format!("responses[{i}].covered_timestep"),
                    message: format!(
                        "covered timesteps must be non-decreasing ({} after {})",
                        r.covered_timestep, prev_covered
                    ),
                });
            }
            if r.is_pause && !r.text.is_empty() {
                violations.push(Violation {
                    track: self.task_id.clone(),
                    field: format!("responses[{i}].text"),
                    message: "pause responses must have empty text".into(),
                });
            }
            prev_emit = r.emit_time;
            prev_covered = r.covered_timestep;
        }
        if violations.is_empty() {
            Ok(())
        } else {
            Err(CoreError::Schema(violations))
        }
    }

    /// Deterministic pretty-printed JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("response log serialization");
        s.push('\n');
        s
    }
}

/// Parses and validates a response log document.
pub fn load_response_log(document: &str) -> Result<ResponseLog, CoreError> {
    let log: ResponseLog = serde_json::from_str(document)?;
    log.validate()?;
    Ok(log)
}
