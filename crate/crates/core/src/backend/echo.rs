//! Ground-truth echo backend.
//!
//! Answers every request with the annotation caption for the newest context
//! frame, after a fixed latency. This is the "perfect model at speed L"
//! used to study scheduling effects in isolation: any accuracy it loses
//! comes from staleness, never from wrong answers.

use std::collections::BTreeMap;

use super::{BackendError, InferenceRequest, InferenceResult, ModelBackend, TaskSetup};
use crate::clock::{Clock, ClockMode};
use crate::stream::sleep_until;

pub struct EchoBackend {
    latency: f64,
    task_id: Option<String>,
    captions: Vec<String>,
    calls: u64,
}

impl EchoBackend {
    pub fn new(latency: f64) -> Result<Self, BackendError> {
        if !latency.is_finite() || latency < 0.0 {
            return Err(BackendError::Config(format!(
                "echo latency {latency} must be finite and non-negative"
            )));
        }
        Ok(EchoBackend {
            latency,
            task_id: None,
            captions: Vec::new(),
            calls: 0,
        })
    }
}

impl ModelBackend for EchoBackend {
    fn id(&self) -> String {
        "echo".into()
    }

    fn begin_task(&mut self, setup: &TaskSetup<'_>) {
        self.task_id = Some(setup.task_id.to_string());
        self.captions = setup.captions.to_vec();
    }

    fn infer(
        &mut self,
        request: &InferenceRequest,
        clock: &Clock,
    ) -> Result<InferenceResult, BackendError> {
        self.calls += 1;
        let step = request.active_timestep();
        let task = self.task_id.as_deref().ok_or_else(|| {
            BackendError::Config("echo backend used before begin_task".into())
        })?;
        let text = self.captions.get(step as usize).cloned().ok_or_else(|| {
            BackendError::Config(format!(
                "echo backend has no caption for timestep {step} of task {task}"
            ))
        })?;
        let latency = match clock.mode() {
            ClockMode::Virtual => self.latency,
            ClockMode::Wall => {
                let start = clock.now();
                sleep_until(clock, start + self.latency);
                clock.now() - start
            }
        };
        Ok(InferenceResult {
            text,
            latency,
            is_pause: false,
        })
    }

    fn stats(&self) -> BTreeMap<String, u64> {
        BTreeMap::from([("calls".to_string(), self.calls)])
    }
}
