//! Task runners: stream frames at a model backend and log timed responses.
//!
//! Two protocols share one backend interface. The synchronous runner locks
//! the model to the camera: one inference per frame, each response stamped
//! on the capture grid. The asynchronous runner lets the model lag: frames
//! queue in the bounded camera buffer while an inference is in flight, and
//! every new turn starts from whatever queued up in the meantime.
//!
//! Both protocols run under either clock mode. Under a virtual clock a run
//! is a single-threaded discrete-event simulation and replays bit for bit;
//! under a wall clock the camera and the model are real concurrent
//! processes paced by sleeps.

mod asynchronous;
mod sync;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::backend::{BackendError, ModelBackend, TaskSetup};
use crate::backend::{BackendConfig, InferenceRequest};
use crate::clock::{Clock, ClockError, ClockMode};
use crate::memory::{MemoryBuffer, MemoryConfig, MemoryError};
use crate::stream::{FrameSource, StreamConfig, StreamError, TraceEvent};
use crate::types::{AnnotationTrack, Protocol, ResponseLog, TimedResponse};

#[derive(Debug, thiserror::Error)]
pub enum ProtocolError {
    #[error("invalid run config: {0}")]
    InvalidConfig(String),
    #[error("source provides {have} frames but the track covers {need} timesteps")]
    ShortSource { have: usize, need: usize },
    #[error(transparent)]
    Stream(#[from] StreamError),
    #[error(transparent)]
    Memory(#[from] MemoryError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Clock(#[from] ClockError),
    #[error("{0}")]
    Internal(String),
}

/// Everything a single task run needs besides the track and the frames.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub protocol: Protocol,
    #[serde(default)]
    pub stream: StreamConfig,
    #[serde(default)]
    pub memory: MemoryConfig,
    pub backend: BackendConfig,
    /// Record camera buffer events (insert/drop/drain) for the run.
    #[serde(default)]
    pub trace: bool,
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ProtocolError> {
        self.stream.validate()?;
        self.memory.validate()?;
        if self.stream.clock == ClockMode::Virtual && self.backend.is_remote() {
            return Err(ProtocolError::InvalidConfig(
                "remote backends need a wall clock; virtual time cannot pace real requests".into(),
            ));
        }
        Ok(())
    }
}

/// Artifacts of one task run: the transcript and, if requested, the camera
/// buffer trace. The synchronous protocol has no buffer, so its trace is
/// always absent.
#[derive(Debug)]
pub struct TaskRun {
    pub log: ResponseLog,
    pub trace: Option<Vec<TraceEvent>>,
}

/// A finished (or aborted) task run. On error the log still holds every
/// response emitted before the failure, with `incomplete: true` in its
/// metadata, so partial transcripts stay inspectable.
#[derive(Debug)]
pub struct TaskOutcome {
    pub task_id: String,
    pub run: TaskRun,
    pub error: Option<ProtocolError>,
}

impl TaskOutcome {
    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }
}

/// Counters a runner fills in as it goes, kept outside the Result so they
/// survive an abort.
#[derive(Debug, Default)]
pub(crate) struct RunStats {
    frames_emitted: u64,
    frames_dropped: u64,
    frames_drained: u64,
    frames_residual: u64,
    cadence_violations: u32,
    trace: Option<Vec<TraceEvent>>,
}

/// Runs one task end to end and always returns an outcome; failures are
/// carried inside rather than bubbling, so one bad task cannot take down a
/// suite.
pub fn run_task(
    track: &AnnotationTrack,
    source: &FrameSource,
    config: &RunConfig,
    backend: &mut dyn ModelBackend,
) -> TaskOutcome {
    let n = track.len_timesteps();
    let mut responses: Vec<TimedResponse> = Vec::new();
    let mut stats = RunStats::default();

    let result = run_task_inner(track, source, config, backend, &mut responses, &mut stats);

    let mut run_metadata = BTreeMap::new();
    let mut put = |k: &str, v: serde_json::Value| {
        run_metadata.insert(k.to_string(), v);
    };
    put("protocol", json!(config.protocol));
    put("clock_mode", json!(config.stream.clock));
    put("camera_fps", json!(config.stream.camera_fps));
    put("camera_buffer_size", json!(config.stream.camera_buffer_size));
    put("memory_policy", json!(config.memory.policy));
    put("context_size", json!(config.memory.context_size));
    put("backend", json!(backend.id()));
    put("backend_stats", json!(backend.stats()));
    put("timesteps", json!(n));
    put("stream_end", json!(config.stream.stream_end(n)));
    put("frames_emitted", json!(stats.frames_emitted));
    put("frames_dropped", json!(stats.frames_dropped));
    put("frames_drained", json!(stats.frames_drained));
    put("frames_residual", json!(stats.frames_residual));
    put("cadence_violations", json!(stats.cadence_violations));
    put("incomplete", json!(result.is_err()));
    if let Err(err) = &result {
        put("error", json!(err.to_string()));
    }

    let log = ResponseLog {
        task_id: track.task_id.clone(),
        protocol: config.protocol,
        run_metadata,
        responses,
    };

    let mut error = result.err();
    if error.is_none() {
        // a runner bug that breaks log invariants must not pass silently
        if let Err(violation) = log.validate() {
            error = Some(ProtocolError::Internal(format!(
                "runner produced an invalid log: {violation}"
            )));
        }
    }

    TaskOutcome {
        task_id: track.task_id.clone(),
        run: TaskRun {
            log,
            trace: stats.trace,
        },
        error,
    }
}

fn run_task_inner(
    track: &AnnotationTrack,
    source: &FrameSource,
    config: &RunConfig,
    backend: &mut dyn ModelBackend,
    responses: &mut Vec<TimedResponse>,
    stats: &mut RunStats,
) -> Result<(), ProtocolError> {
    config.validate()?;
    let need = track.len_timesteps();
    if need == 0 {
        return Err(ProtocolError::InvalidConfig(format!(
            "track {} has no annotation entries",
            track.task_id
        )));
    }
    let have = source.frame_count();
    if have < need {
        return Err(ProtocolError::ShortSource { have, need });
    }
    // the annotated span defines the stream; surplus frames never play
    let source = source.truncated(need);

    let clock = Clock::new(config.stream.clock);
    let mut memory = MemoryBuffer::new(config.memory)?;
    let captions: Vec<String> = track.entries.iter().map(|e| e.caption.clone()).collect();
    backend.begin_task(&TaskSetup {
        task_id: &track.task_id,
        prompt: &track.prompt,
        captions: &captions,
    });

    match config.protocol {
        Protocol::Sync => sync::run(
            &track.prompt,
            &source,
            config,
            &clock,
            &mut memory,
            backend,
            responses,
            stats,
        ),
        Protocol::Async => match config.stream.clock {
            ClockMode::Virtual => asynchronous::run_virtual(
                &track.prompt,
                &source,
                config,
                &clock,
                &mut memory,
                backend,
                responses,
                stats,
            ),
            ClockMode::Wall => asynchronous::run_wall(
                &track.prompt,
                &source,
                config,
                &clock,
                &mut memory,
                backend,
                responses,
                stats,
            ),
        },
    }
}

/// One model turn: absorb `frames`, pick a context, infer. Returns the
/// backend's result after checking its latency is usable as a time delta.
fn infer_turn(
    prompt: &str,
    frames: &[crate::stream::Frame],
    request_time: f64,
    memory: &mut MemoryBuffer,
    backend: &mut dyn ModelBackend,
    clock: &Clock,
) -> Result<crate::backend::InferenceResult, ProtocolError> {
    memory.ingest(frames)?;
    let context = memory.select_context()?;
    let request = InferenceRequest {
        prompt: prompt.to_string(),
        context,
        request_time,
    };
    let result = backend.infer(&request, clock)?;
    if !result.latency.is_finite() || result.latency < 0.0 {
        return Err(ProtocolError::Internal(format!(
            "backend {} reported invalid latency {}",
            backend.id(),
            result.latency
        )));
    }
    Ok(result)
}

/// Runs every task against one shared backend, in task id order so suite
/// output is stable regardless of manifest ordering. Memory and clock state
/// are fresh per task; the backend is re-pointed via `begin_task`.
pub fn run_suite(
    tasks: &[(&AnnotationTrack, &FrameSource)],
    config: &RunConfig,
    backend: &mut dyn ModelBackend,
) -> Vec<TaskOutcome> {
    let mut ordered: Vec<&(&AnnotationTrack, &FrameSource)> = tasks.iter().collect();
    ordered.sort_by(|a, b| a.0.task_id.cmp(&b.0.task_id));
    ordered
        .into_iter()
        .map(|(track, source)| run_task(track, source, config, backend))
        .collect()
}
