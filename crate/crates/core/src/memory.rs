//! Frame memory and context selection.
//!
//! Three policies, all parameterized by one context size `k`:
//!
//! * `sw`: keep only the `k` most recent frames; the context is everything
//!   retained.
//! * `u`: keep every frame; the context is `k` frames evenly spaced over
//!   the retention, always including the first and the last.
//! * `sw+u`: keep every frame; the context is the ceil(k/2) most recent
//!   frames plus floor(k/2) evenly spaced over the strictly older
//!   remainder, merged in capture order. A short older pool is taken
//!   whole; the recent half is never grown to compensate.
//!
//! Whenever at most `k` frames are retained, the context is all of them.
//! Retention stores shared frame handles, so nothing here copies payloads.

use serde::{Deserialize, Serialize};

use crate::stream::Frame;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MemoryPolicy {
    SlidingWindow,
    Uniform,
    SlidingWindowUniform,
}

impl MemoryPolicy {
    pub fn as_str(&self) -> &'static str {
        match self {
            MemoryPolicy::SlidingWindow => "sw",
            MemoryPolicy::Uniform => "u",
            MemoryPolicy::SlidingWindowUniform => "sw+u",
        }
    }
}

impl std::fmt::Display for MemoryPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for MemoryPolicy {
    type Err = MemoryError;

    fn from_str(s: &str) -> Result<Self, MemoryError> {
        match s.to_ascii_lowercase().as_str() {
            "sw" => Ok(MemoryPolicy::SlidingWindow),
            "u" => Ok(MemoryPolicy::Uniform),
            "sw+u" => Ok(MemoryPolicy::SlidingWindowUniform),
            _ => Err(MemoryError::InvalidConfig(format!(
                "unknown memory policy {s:?} (expected sw, u, or sw+u)"
            ))),
        }
    }
}

impl Serialize for MemoryPolicy {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for MemoryPolicy {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MemoryConfig {
    pub policy: MemoryPolicy,
    pub context_size: usize,
}

impl Default for MemoryConfig {
    fn default() -> Self {
        MemoryConfig {
            policy: MemoryPolicy::SlidingWindow,
            context_size: 64,
        }
    }
}

impl MemoryConfig {
    pub fn validate(&self) -> Result<(), MemoryError> {
        if self.context_size == 0 {
            return Err(MemoryError::InvalidConfig(
                "context_size must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum MemoryError {
    #[error("invalid memory config: {0}")]
    InvalidConfig(String),
    #[error("memory is empty; nothing to select a context from")]
    EmptyMemory,
    #[error("out-of-order ingestion: frame timestep {got} after {last}")]
    OutOfOrder { last: u32, got: u32 },
}

/// Per-task frame retention. Construct fresh for every task run.
#[derive(Debug, Clone)]
pub struct MemoryBuffer {
    cfg: MemoryConfig,
    frames: Vec<Frame>,
    last_timestep: Option<u32>,
}

impl MemoryBuffer {
    pub fn new(cfg: MemoryConfig) -> Result<Self, MemoryError> {
        cfg.validate()?;
        Ok(MemoryBuffer {
            cfg,
            frames: Vec::new(),
            last_timestep: None,
        })
    }

    /// Appends newly drained frames. Timesteps must strictly increase across
    /// the whole ingestion history; the camera never re-delivers a frame.
    pub fn ingest(&mut self, frames: &[Frame]) -> Result<(), MemoryError> {
        for frame in frames {
            if let Some(last) = self.last_timestep {
                if frame.timestep <= last {
                    return Err(MemoryError::OutOfOrder {
                        last,
                        got: frame.timestep,
                    });
                }
            }
            self.last_timestep = Some(frame.timestep);
            self.frames.push(frame.clone());
        }
        if self.cfg.policy == MemoryPolicy::SlidingWindow {
            let k = self.cfg.context_size;
            if self.frames.len() > k {
                self.frames.drain(..self.frames.len() - k);
            }
        }
        Ok(())
    }

    pub fn retained_len(&self) -> usize {
        self.frames.len()
    }

    pub fn retained(&self) -> &[Frame] {
        &self.frames
    }

    /// Selects the context the backend will see, in capture order.
    pub fn select_context(&self) -> Result<Vec<Frame>, MemoryError> {
        if self.frames.is_empty() {
            return Err(MemoryError::EmptyMemory);
        }
        let n = self.frames.len();
        let k = self.cfg.context_size;
        if n <= k {
            return Ok(self.frames.clone());
        }
        let indices = match self.cfg.policy {
            // retention already trimmed to k, handled by n <= k above
            MemoryPolicy::SlidingWindow => unreachable!("sliding window retains at most k frames"),
            MemoryPolicy::Uniform => uniform_indices(n, k),
            MemoryPolicy::SlidingWindowUniform => {
                let recent = k.div_ceil(2);
                let older_quota = k / 2;
                let pool = n - recent;
                // k = 1 leaves no older slots at all
                let mut idx = if older_quota == 0 {
                    Vec::new()
                } else if pool <= older_quota {
                    (0..pool).collect()
                } else {
                    uniform_indices(pool, older_quota)
                };
                idx.extend(n - recent..n);
                idx
            }
        };
        Ok(indices.iter().map(|&i| self.frames[i].clone()).collect())
    }
}

/// Indices of `k` elements evenly spaced over `0..n`, endpoints included:
/// index_j = round(j * (n-1) / (k-1)) with round-half-up, computed in
/// integers. With one slot (k = 1) the newest element wins. Returns all of
/// `0..n` when k >= n.
pub fn uniform_indices(n: usize, k: usize) -> Vec<usize> {
    assert!(n > 0 && k > 0, "uniform_indices needs n >= 1 and k >= 1");
    if k >= n {
        return (0..n).collect();
    }
    if k == 1 {
        return vec![n - 1];
    }
    let mut out = Vec::with_capacity(k);
    for j in 0..k {
        let idx = (2 * j * (n - 1) + (k - 1)) / (2 * (k - 1));
        if out.last() != Some(&idx) {
            out.push(idx);
        }
    }
    out
}
