//! Streaming evaluation harness for vision-language assistants.
//!
//! The crate models a camera that streams frames at a fixed rate into a
//! bounded drop-oldest buffer, a model that consumes those frames under a
//! memory policy, and a scorer that grades the resulting timed transcript
//! against per-second ground truth. Two protocols are supported:
//!
//! * synchronous: the stream advances in lockstep with inference, one
//!   response per annotated second, latency recorded but never penalized;
//! * asynchronous: the stream advances in real time (wall clock) or on a
//!   deterministic virtual clock, so slow models skip frames and their
//!   responses go stale.
//!
//! Modules mirror the pipeline: [`types`] (annotations and response logs),
//! [`clock`] / [`stream`] (time, camera, buffer), [`memory`] (context
//! selection), [`backend`] (mock, echo, remote, speculative), [`protocol`]
//! (the two runners), [`metrics`] (extrapolation, judging, aggregation).

pub mod backend;
pub mod clock;
pub mod memory;
pub mod metrics;
pub mod protocol;
pub mod stream;
pub mod types;

pub use backend::{
    build_backend, BackendConfig, BackendError, InferenceRequest, InferenceResult, ModelBackend,
    TaskSetup,
};
pub use clock::{Clock, ClockError, ClockMode};
pub use memory::{MemoryBuffer, MemoryConfig, MemoryError, MemoryPolicy};
pub use metrics::{
    aggregate, extrapolate_timeline, lcs_distance, render_report_json, render_report_table,
    score_task, AggregateScore, CachedJudge, ConsistencyDenominator, Judge, JudgeVerdict,
    MetricsError, MetricsReport, OracleJudge, RemoteJudge, RemoteJudgeConfig, ResponseOrigin,
    TaskScore, Timeline, Weighting,
};
pub use protocol::{run_suite, run_task, ProtocolError, RunConfig, TaskOutcome, TaskRun};
pub use stream::{
    open_frame_source, run_camera_process, CameraBuffer, Frame, FrameSource, SourceSpec,
    StreamConfig, StreamError, TraceEvent, TraceKind,
};
pub use types::{
    annotation_file_to_json, load_response_log, validate_annotation_file, AnnotationEntry,
    AnnotationTrack, CoreError, Protocol, ResponseLog, TaskType, TimedResponse,
};
