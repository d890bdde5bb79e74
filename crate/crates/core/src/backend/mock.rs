//! Scripted backend for repeatable runs.
//!
//! A script maps timestep ranges to response text and latency. The timestep
//! a request is answered for is the newest context frame's, so the same
//! script drives both protocols: whatever the model last saw decides what
//! it says.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{BackendError, InferenceRequest, InferenceResult, ModelBackend};
use crate::clock::{Clock, ClockMode};
use crate::stream::sleep_until;

/// Latency as a function of the request. `linear` grows with context
/// length, which is how context size gets a cost in simulated runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LatencyModel {
    Constant { c: f64 },
    Linear { a: f64, b: f64 },
}

impl Default for LatencyModel {
    fn default() -> Self {
        LatencyModel::Constant { c: 0.0 }
    }
}

impl LatencyModel {
    fn validate(&self) -> Result<(), BackendError> {
        let ok = match *self {
            LatencyModel::Constant { c } => c.is_finite() && c >= 0.0,
            LatencyModel::Linear { a, b } => {
                a.is_finite() && b.is_finite() && a >= 0.0 && b >= 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(BackendError::Config(
                "latency model coefficients must be finite and non-negative".into(),
            ))
        }
    }

    fn seconds(&self, context_len: usize) -> f64 {
        match *self {
            LatencyModel::Constant { c } => c,
            LatencyModel::Linear { a, b } => a + b * context_len as f64,
        }
    }
}

/// One scripted answer, active for timesteps `from..=to`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockRule {
    pub from: u32,
    pub to: u32,
    pub text: String,
    /// Overrides the script-wide latency model for this range.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latency: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MockScript {
    #[serde(default)]
    pub rules: Vec<MockRule>,
    #[serde(default)]
    pub latency: LatencyModel,
    /// Timesteps at which the model emits a pause instead of text.
    #[serde(default)]
    pub pause_steps: Vec<u32>,
}

impl MockScript {
    pub fn load(path: &Path) -> Result<Self, BackendError> {
        let body = std::fs::read_to_string(path)?;
        serde_json::from_str(&body)
            .map_err(|e| BackendError::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        self.latency.validate()?;
        let mut spans: Vec<(u32, u32)> = Vec::with_capacity(self.rules.len());
        for rule in &self.rules {
            if rule.from > rule.to {
                return Err(BackendError::Config(format!(
                    "rule range {}..={} is inverted",
                    rule.from, rule.to
                )));
            }
            if let Some(l) = rule.latency {
                if !l.is_finite() || l < 0.0 {
                    return Err(BackendError::Config(format!(
                        "rule latency {l} must be finite and non-negative"
                    )));
                }
            }
            spans.push((rule.from, rule.to));
        }
        spans.sort_unstable();
        for pair in spans.windows(2) {
            if pair[1].0 <= pair[0].1 {
                return Err(BackendError::Config(format!(
                    "rule ranges {}..={} and {}..={} overlap",
                    pair[0].0, pair[0].1, pair[1].0, pair[1].1
                )));
            }
        }
        Ok(())
    }

    fn rule_for(&self, timestep: u32) -> Option<&MockRule> {
        self.rules
            .iter()
            .find(|r| r.from <= timestep && timestep <= r.to)
    }
}

pub struct MockBackend {
    script: MockScript,
    calls: u64,
}

impl MockBackend {
    pub fn new(script: MockScript) -> Result<Self, BackendError> {
        script.validate()?;
        Ok(MockBackend { script, calls: 0 })
    }
}

impl ModelBackend for MockBackend {
    fn id(&self) -> String {
        "mock".into()
    }

    fn infer(
        &mut self,
        request: &InferenceRequest,
        clock: &Clock,
    ) -> Result<InferenceResult, BackendError> {
        self.calls += 1;
        let step = request.active_timestep();
        let rule = self.script.rule_for(step);
        let scripted = rule
            .and_then(|r| r.latency)
            .unwrap_or_else(|| self.script.latency.seconds(request.context.len()));
        let is_pause = self.script.pause_steps.contains(&step);
        let text = if is_pause {
            String::new()
        } else {
            rule.map(|r| r.text.clone()).ok_or_else(|| {
                BackendError::Config(format!("mock script has no rule for timestep {step}"))
            })?
        };
        let latency = match clock.mode() {
            ClockMode::Virtual => scripted,
            ClockMode::Wall => {
                let start = clock.now();
                sleep_until(clock, start + scripted);
                clock.now() - start
            }
        };
        Ok(InferenceResult {
            text,
            latency,
            is_pause,
        })
    }

    fn stats(&self) -> BTreeMap<String, u64> {
        BTreeMap::from([("calls".to_string(), self.calls)])
    }
}
