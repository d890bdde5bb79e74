//! Run clocks. Every task run owns one clock that starts at 0.0 seconds.
//!
//! A wall clock reads the OS monotonic timer. A virtual clock is a bare
//! counter that only moves when the runner applies an event (a frame capture
//! instant or an inference latency), which is what makes asynchronous runs
//! replayable bit for bit: identical event schedules produce identical
//! timestamp sequences.
//!
//! Virtual time is stored in integer nanoseconds so repeated advances never
//! accumulate float error. Reads are safe from any thread; virtual
//! advancement is meant to have a single writer (the runner).

use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Instant;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClockMode {
    Wall,
    Virtual,
}

impl std::fmt::Display for ClockMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ClockMode::Wall => "wall",
            ClockMode::Virtual => "virtual",
        })
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ClockError {
    #[error("cannot advance a wall clock; it moves on its own")]
    NotVirtual,
    #[error("clock would move backwards: now {now}s, requested {requested}s")]
    Backwards { now: f64, requested: f64 },
    #[error("advance amount must be finite and >= 0, got {0}")]
    BadAdvance(f64),
}

#[derive(Debug)]
enum Inner {
    Wall { start: Instant },
    Virtual { now_ns: AtomicU64 },
}

/// Seconds-since-start clock, wall or virtual.
#[derive(Debug)]
pub struct Clock {
    inner: Inner,
}

const NS_PER_SEC: f64 = 1e9;

pub(crate) fn secs_to_ns(secs: f64) -> u64 {
    debug_assert!(secs.is_finite() && secs >= 0.0);
    (secs * NS_PER_SEC).round() as u64
}

pub(crate) fn ns_to_secs(ns: u64) -> f64 {
    ns as f64 / NS_PER_SEC
}

impl Clock {
    pub fn new(mode: ClockMode) -> Self {
        match mode {
            ClockMode::Wall => Self::wall(),
            ClockMode::Virtual => Self::virtual_clock(),
        }
    }

    pub fn wall() -> Self {
        Clock {
            inner: Inner::Wall {
                start: Instant::now(),
            },
        }
    }

    pub fn virtual_clock() -> Self {
        Clock {
            inner: Inner::Virtual {
                now_ns: AtomicU64::new(0),
            },
        }
    }

    pub fn mode(&self) -> ClockMode {
        match self.inner {
            Inner::Wall { .. } => ClockMode::Wall,
            Inner::Virtual { .. } => ClockMode::Virtual,
        }
    }

    /// Seconds since the clock was created (wall) or last advanced to
    /// (virtual). Non-decreasing across reads.
    pub fn now(&self) -> f64 {
        match &self.inner {
            Inner::Wall { start } => start.elapsed().as_secs_f64(),
            Inner::Virtual { now_ns } => ns_to_secs(now_ns.load(Ordering::SeqCst)),
        }
    }

    /// Moves a virtual clock forward by `secs`. Errors on wall clocks and on
    /// negative or non-finite amounts.
    pub fn advance(&self, secs: f64) -> Result<f64, ClockError> {
        if !secs.is_finite() || secs < 0.0 {
            return Err(ClockError::BadAdvance(secs));
        }
        match &self.inner {
            Inner::Wall { .. } => Err(ClockError::NotVirtual),
            Inner::Virtual { now_ns } => {
                let prev = now_ns.fetch_add(secs_to_ns(secs), Ordering::SeqCst);
                Ok(ns_to_secs(prev + secs_to_ns(secs)))
            }
        }
    }

    /// Moves a virtual clock forward to the absolute instant `t` seconds.
    /// `t` earlier than now is an error: virtual time never rewinds.
    pub fn advance_to(&self, t: f64) -> Result<(), ClockError> {
        if !t.is_finite() || t < 0.0 {
            return Err(ClockError::BadAdvance(t));
        }
        self.advance_to_ns(secs_to_ns(t))
    }

    pub(crate) fn advance_to_ns(&self, target_ns: u64) -> Result<(), ClockError> {
        match &self.inner {
            Inner::Wall { .. } => Err(ClockError::NotVirtual),
            Inner::Virtual { now_ns } => {
                let now = now_ns.load(Ordering::SeqCst);
                if target_ns < now {
                    return Err(ClockError::Backwards {
                        now: ns_to_secs(now),
                        requested: ns_to_secs(target_ns),
                    });
                }
                now_ns.store(target_ns, Ordering::SeqCst);
                Ok(())
            }
        }
    }
}
