//! Verdicts on whether a response matches the ground truth.
//!
//! A verdict couples a binary match with a 0 to 3 rubric score: 3 forces a
//! yes, 0 and 1 force a no, and 2 can go either way. The oracle judge
//! grades by token overlap and needs no network; the remote judge asks a
//! chat completions model with a fixed rubric prompt. Both sit behind one
//! trait so scoring code cannot tell them apart.

use std::collections::HashMap;
use std::path::PathBuf;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::MetricsError;

/// The rubric prompt sent to remote judges, with `<question>`,
/// `<gt_answer>`, and `<model_response>` slots.
pub const JUDGE_PROMPT_TEMPLATE: &str = include_str!("../../assets/judge_prompt.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct JudgeVerdict {
    pred: bool,
    rubric: u8,
}

impl JudgeVerdict {
    /// Rejects rubric scores outside 0..=3 and combinations the rubric
    /// forbids: a 3 is always a match, a 0 or 1 never is.
    pub fn new(pred: bool, rubric: u8) -> Result<Self, MetricsError> {
        if rubric > 3 {
            return Err(MetricsError::MalformedVerdict(format!(
                "rubric score {rubric} outside 0..=3"
            )));
        }
        if rubric == 3 && !pred {
            return Err(MetricsError::MalformedVerdict(
                "rubric 3 must be a match".into(),
            ));
        }
        if rubric <= 1 && pred {
            return Err(MetricsError::MalformedVerdict(format!(
                "rubric {rubric} cannot be a match"
            )));
        }
        Ok(JudgeVerdict { pred, rubric })
    }

    pub fn pred(&self) -> bool {
        self.pred
    }

    pub fn rubric(&self) -> u8 {
        self.rubric
    }
}

pub trait Judge: Send {
    /// Stable identifier recorded in reports.
    fn id(&self) -> String;

    fn verdict(
        &mut self,
        question: &str,
        ground_truth: &str,
        response: &str,
    ) -> Result<JudgeVerdict, MetricsError>;
}

const STOPWORDS: [&str; 16] = [
    "a", "an", "the", "of", "and", "or", "to", "in", "on", "at", "is", "are", "was", "were",
    "with", "for",
];

/// Lowercases, strips punctuation, and drops filler words, leaving the
/// tokens that carry meaning.
pub(crate) fn normalize_tokens(text: &str) -> Vec<String> {
    let lowered: String = text
        .chars()
        .flat_map(char::to_lowercase)
        .map(|c| if c.is_alphanumeric() { c } else { ' ' })
        .collect();
    lowered
        .split_whitespace()
        .filter(|t| !STOPWORDS.contains(t))
        .map(str::to_owned)
        .collect()
}

/// Share of the larger token set that both token lists have in common.
/// Two empty lists count as identical.
pub(crate) fn overlap_ratio(a: &[String], b: &[String]) -> f64 {
    use std::collections::BTreeSet;
    let sa: BTreeSet<&String> = a.iter().collect();
    let sb: BTreeSet<&String> = b.iter().collect();
    let max = sa.len().max(sb.len());
    if max == 0 {
        return 1.0;
    }
    sa.intersection(&sb).count() as f64 / max as f64
}

/// Offline judge graded purely on token overlap. Deterministic and free,
/// so it is the default for simulated runs: same token sequence scores 3,
/// overlap of at least half scores 2, any overlap scores 1, none scores 0.
#[derive(Debug, Default)]
pub struct OracleJudge;

impl Judge for OracleJudge {
    fn id(&self) -> String {
        "oracle".into()
    }

    fn verdict(
        &mut self,
        _question: &str,
        ground_truth: &str,
        response: &str,
    ) -> Result<JudgeVerdict, MetricsError> {
        let g = normalize_tokens(ground_truth);
        let r = normalize_tokens(response);
        if g == r {
            return JudgeVerdict::new(true, 3);
        }
        let overlap = overlap_ratio(&g, &r);
        if overlap >= 0.5 {
            JudgeVerdict::new(true, 2)
        } else if overlap > 0.0 {
            JudgeVerdict::new(false, 1)
        } else {
            JudgeVerdict::new(false, 0)
        }
    }
}

/// Memoizes verdicts by (question, ground truth, response). Extrapolated
/// timelines repeat themselves heavily, so this cuts remote judge calls by
/// an order of magnitude on stable streams.
pub struct CachedJudge {
    inner: Box<dyn Judge>,
    cache: HashMap<(String, String, String), JudgeVerdict>,
    hits: u64,
    misses: u64,
}

impl CachedJudge {
    pub fn new(inner: Box<dyn Judge>) -> Self {
        CachedJudge {
            inner,
            cache: HashMap::new(),
            hits: 0,
            misses: 0,
        }
    }

    pub fn hits(&self) -> u64 {
        self.hits
    }

    pub fn misses(&self) -> u64 {
        self.misses
    }
}

impl Judge for CachedJudge {
    fn id(&self) -> String {
        self.inner.id()
    }

    fn verdict(
        &mut self,
        question: &str,
        ground_truth: &str,
        response: &str,
    ) -> Result<JudgeVerdict, MetricsError> {
        let key = (
            question.to_string(),
            ground_truth.to_string(),
            response.to_string(),
        );
        if let Some(v) = self.cache.get(&key) {
            self.hits += 1;
            return Ok(*v);
        }
        let v = self.inner.verdict(question, ground_truth, response)?;
        self.misses += 1;
        self.cache.insert(key, v);
        Ok(v)
    }
}

fn default_timeout() -> f64 {
    60.0
}

fn default_backoff() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemoteJudgeConfig {
    /// API root, e.g. `https://api.openai.com/v1`.
    pub base_url: String,
    pub model: String,
    /// Name of the environment variable holding the bearer token.
    pub api_key_env: String,
    #[serde(default = "default_timeout")]
    pub timeout_s: f64,
    /// First retry delay in seconds; doubles per retry.
    #[serde(default = "default_backoff")]
    pub backoff_s: f64,
    /// Replaces the built-in rubric prompt. Must keep the three slots.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub template_path: Option<PathBuf>,
}

fn fill_template(template: &str, question: &str, ground_truth: &str, response: &str) -> String {
    template
        .replace("<question>", question)
        .replace("<gt_answer>", ground_truth)
        .replace("<model_response>", response)
}

/// Pulls a verdict out of whatever the judge model wrote. Accepts strict
/// JSON, Python-style single quotes, code fences, and prose around the
/// dictionary; `pred` may be yes/no or a boolean.
fn parse_verdict_text(content: &str) -> Result<JudgeVerdict, MetricsError> {
    let trimmed = content.trim();
    let start = trimmed.find('{');
    let end = trimmed.rfind('}');
    let (Some(start), Some(end)) = (start, end) else {
        return Err(MetricsError::MalformedVerdict(format!(
            "no JSON object in {trimmed:?}"
        )));
    };
    if start >= end {
        return Err(MetricsError::MalformedVerdict(format!(
            "no JSON object in {trimmed:?}"
        )));
    }
    let body = &trimmed[start..=end];
    let value: Value = serde_json::from_str(body)
        .or_else(|_| serde_json::from_str(&body.replace('\'', "\"")))
        .map_err(|e| MetricsError::MalformedVerdict(format!("{e} in {body:?}")))?;
    let pred = match &value["pred"] {
        Value::Bool(b) => *b,
        Value::String(s) => match s.trim().to_ascii_lowercase().as_str() {
            "yes" => true,
            "no" => false,
            other => {
                return Err(MetricsError::MalformedVerdict(format!(
                    "pred must be yes or no, got {other:?}"
                )))
            }
        },
        other => {
            return Err(MetricsError::MalformedVerdict(format!(
                "pred must be yes or no, got {other}"
            )))
        }
    };
    let rubric = match &value["score"] {
        Value::Number(n) => n.as_u64().and_then(|n| u8::try_from(n).ok()),
        Value::String(s) => s.trim().parse::<u8>().ok(),
        _ => None,
    }
    .ok_or_else(|| {
        MetricsError::MalformedVerdict(format!("score must be an integer, got {}", value["score"]))
    })?;
    JudgeVerdict::new(pred, rubric)
}

/// Chat completions judge. One malformed verdict earns one fresh attempt;
/// transport failures and 5xx responses are retried twice with doubling
/// backoff before giving up on the timestep.
pub struct RemoteJudge {
    config: RemoteJudgeConfig,
    template: String,
    api_key: String,
    client: reqwest::blocking::Client,
    requests: u64,
}

impl RemoteJudge {
    pub fn new(config: RemoteJudgeConfig) -> Result<Self, MetricsError> {
        if config.base_url.is_empty() || config.model.is_empty() || config.api_key_env.is_empty() {
            return Err(MetricsError::Invalid(
                "remote judge needs base_url, model, and api_key_env".into(),
            ));
        }
        let template = match &config.template_path {
            Some(path) => std::fs::read_to_string(path).map_err(|e| {
                MetricsError::Invalid(format!("judge template {}: {e}", path.display()))
            })?,
            None => JUDGE_PROMPT_TEMPLATE.to_string(),
        };
        for slot in ["<question>", "<gt_answer>", "<model_response>"] {
            if !template.contains(slot) {
                return Err(MetricsError::Invalid(format!(
                    "judge template is missing the {slot} slot"
                )));
            }
        }
        let api_key = std::env::var(&config.api_key_env).map_err(|_| {
            MetricsError::Invalid(format!(
                "API key environment variable {} is not set",
                config.api_key_env
            ))
        })?;
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs_f64(config.timeout_s))
            .build()
            .map_err(|e| MetricsError::Invalid(format!("http client: {e}")))?;
        Ok(RemoteJudge {
            config,
            template,
            api_key,
            client,
            requests: 0,
        })
    }

    pub fn requests(&self) -> u64 {
        self.requests
    }

    fn endpoint(&self) -> String {
        format!(
            "{}/chat/completions",
            self.config.base_url.trim_end_matches('/')
        )
    }

    fn attempt(&self, body: &Value) -> Result<String, (bool, String)> {
        let response = self
            .client
            .post(self.endpoint())
            .bearer_auth(&self.api_key)
            .json(body)
            .send()
            .map_err(|e| (e.is_connect() || e.is_timeout() || e.is_request(), e.to_string()))?;
        let status = response.status();
        if status.is_server_error() {
            return Err((true, format!("server returned {status}")));
        }
        if !status.is_success() {
            let detail = response.text().unwrap_or_default();
            return Err((false, format!("server returned {status}: {detail}")));
        }
        let reply: Value = response
            .json()
            .map_err(|e| (false, format!("unparseable reply: {e}")))?;
        reply["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_owned)
            .ok_or_else(|| (false, format!("no choices[0].message.content in {reply}")))
    }

    fn ask(&mut self, prompt: &str) -> Result<String, MetricsError> {
        const MAX_ATTEMPTS: u32 = 3;
        let body = json!({
            "model": self.config.model,
            "messages": [{"role": "user", "content": prompt}],
        });
        let mut backoff = self.config.backoff_s;
        let mut attempt = 0;
        loop {
            attempt += 1;
            self.requests += 1;
            match self.attempt(&body) {
                Ok(content) => return Ok(content),
                Err((retryable, msg)) => {
                    if !retryable || attempt >= MAX_ATTEMPTS {
                        return Err(MetricsError::JudgeUnavailable(format!(
                            "attempt {attempt}/{MAX_ATTEMPTS}: {msg}"
                        )));
                    }
                    std::thread::sleep(Duration::from_secs_f64(backoff));
                    backoff *= 2.0;
                }
            }
        }
    }
}

impl Judge for RemoteJudge {
    fn id(&self) -> String {
        format!("remote({})", self.config.model)
    }

    fn verdict(
        &mut self,
        question: &str,
        ground_truth: &str,
        response: &str,
    ) -> Result<JudgeVerdict, MetricsError> {
        let prompt = fill_template(&self.template, question, ground_truth, response);
        match parse_verdict_text(&self.ask(&prompt)?) {
            Ok(v) => Ok(v),
            // one fresh sample; judges occasionally break format
            Err(MetricsError::MalformedVerdict(_)) => parse_verdict_text(&self.ask(&prompt)?),
            Err(e) => Err(e),
        }
    }
}
