//! Model backends.
//!
//! A backend answers one inference request at a time: given the prompt and
//! the selected context frames, it produces response text and the latency
//! the model spent producing it. Under a virtual clock the backend computes
//! latency without sleeping and the caller advances the clock; under a wall
//! clock the backend really blocks and reports measured elapsed time.
//!
//! Four implementations ship:
//!
//! * `mock`: scripted responses and latencies, for repeatable runs;
//! * `echo`: answers with the annotation caption for the newest context
//!   frame, for suites where the script varies per task;
//! * `remote`: an OpenAI-compatible chat completions endpoint;
//! * `speculative`: wraps any of the above and skips regeneration while a
//!   change detector judges the newest frame unchanged.

mod echo;
mod mock;
mod remote;
mod speculative;

pub use echo::EchoBackend;
pub use mock::{LatencyModel, MockBackend, MockRule, MockScript};
pub use remote::{build_request_body, RemoteBackend, RemoteConfig};
pub use speculative::{ChangeDetector, SpeculativeBackend, SpeculativeConfig};

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::clock::{Clock, ClockMode};
use crate::stream::Frame;

/// One inference call. `request_time` is the clock reading when the call
/// was issued, in seconds since run start.
#[derive(Debug, Clone)]
pub struct InferenceRequest {
    pub prompt: String,
    pub context: Vec<Frame>,
    pub request_time: f64,
}

impl InferenceRequest {
    /// Timestep of the newest context frame. Contexts are never empty.
    pub fn active_timestep(&self) -> u32 {
        self.context
            .last()
            .map(|f| f.timestep)
            .expect("inference requests carry at least one frame")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InferenceResult {
    pub text: String,
    /// Seconds the model spent on this request (measured under a wall
    /// clock, computed under a virtual one).
    pub latency: f64,
    /// True when the model declined to produce new output for this step.
    pub is_pause: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum BackendError {
    #[error("backend configuration: {0}")]
    Config(String),
    #[error("request failed after retries: {0}")]
    Request(String),
    #[error("could not parse model reply: {0}")]
    MalformedReply(String),
    #[error("API key environment variable {0} is not set")]
    MissingApiKey(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Clock(#[from] crate::clock::ClockError),
}

/// Everything a backend may need to know when a task starts. Captions are
/// the per-timestep ground truth; only simulated backends read them (the
/// echo backend answers with them), real models never see them.
#[derive(Debug, Clone, Copy)]
pub struct TaskSetup<'a> {
    pub task_id: &'a str,
    pub prompt: &'a str,
    pub captions: &'a [String],
}

/// A model under evaluation. One instance serves a whole suite run;
/// `begin_task` resets any cross-request state between tasks.
pub trait ModelBackend: Send {
    /// Stable identifier recorded in run metadata.
    fn id(&self) -> String;

    fn infer(
        &mut self,
        request: &InferenceRequest,
        clock: &Clock,
    ) -> Result<InferenceResult, BackendError>;

    /// Called before each task's first request.
    fn begin_task(&mut self, _setup: &TaskSetup<'_>) {}

    /// Cost in seconds of deciding that a frame needs no new inference,
    /// if this backend can estimate one.
    fn verify_cost_hint(&self) -> Option<f64> {
        None
    }

    /// Counters worth surfacing in run metadata.
    fn stats(&self) -> BTreeMap<String, u64> {
        BTreeMap::new()
    }
}

/// Declarative backend selection, as stored in suite manifests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BackendConfig {
    Mock {
        /// Path to a script file, resolved against the manifest directory.
        script: String,
    },
    Echo {
        #[serde(default)]
        latency: f64,
    },
    Remote(RemoteConfig),
    Speculative {
        inner: Box<BackendConfig>,
        #[serde(flatten)]
        config: SpeculativeConfig,
    },
}

impl BackendConfig {
    /// True if any layer of this config calls out over the network.
    pub fn is_remote(&self) -> bool {
        match self {
            BackendConfig::Remote(_) => true,
            BackendConfig::Speculative { inner, .. } => inner.is_remote(),
            BackendConfig::Mock { .. } | BackendConfig::Echo { .. } => false,
        }
    }
}

/// Instantiates a backend from its config. Relative script paths resolve
/// against `base_dir`. Remote backends measure real round trips, so they
/// are rejected under a virtual clock.
pub fn build_backend(
    cfg: &BackendConfig,
    base_dir: &Path,
    clock_mode: ClockMode,
) -> Result<Box<dyn ModelBackend>, BackendError> {
    if clock_mode == ClockMode::Virtual && cfg.is_remote() {
        return Err(BackendError::Config(
            "remote backends require a wall clock; virtual time cannot pace real network calls"
                .into(),
        ));
    }
    match cfg {
        BackendConfig::Mock { script } => {
            let path = base_dir.join(script);
            let script = MockScript::load(&path)?;
            Ok(Box::new(MockBackend::new(script)?))
        }
        BackendConfig::Echo { latency } => Ok(Box::new(EchoBackend::new(*latency)?)),
        BackendConfig::Remote(remote) => Ok(Box::new(RemoteBackend::new(remote.clone())?)),
        BackendConfig::Speculative { inner, config } => {
            let inner = build_backend(inner, base_dir, clock_mode)?;
            Ok(Box::new(SpeculativeBackend::new(inner, config.clone())?))
        }
    }
}
