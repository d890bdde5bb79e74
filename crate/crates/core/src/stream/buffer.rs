//! Bounded FIFO frame buffer shared by the camera producer and the model
//! consumer. When full, inserting drops the oldest frame; the consumer
//! always drains everything that is pending. Insert and drain are
//! individually atomic, so a frame that arrives during a drain lands in
//! exactly one of this drain or the next.

use std::collections::VecDeque;
use std::sync::{Condvar, Mutex};

use serde::{Deserialize, Serialize};

use super::Frame;
use crate::clock::Clock;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceKind {
    Insert,
    Drop,
    Drain,
}

/// One line of the optional buffer trace: a frame identified by `timestep`
/// was inserted, dropped, or drained at buffer time `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub event: TraceKind,
    pub t: f64,
    pub timestep: u32,
}

impl TraceEvent {
    /// Renders a list of events as JSON lines.
    pub fn to_jsonl(events: &[TraceEvent]) -> String {
        let mut out = String::new();
        for e in events {
            out.push_str(&serde_json::to_string(e).expect("trace serialization"));
            out.push('\n');
        }
        out
    }
}

/// Counter snapshot used for conservation checks and run metadata:
/// inserted == drained + dropped + pending always holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BufferCounters {
    pub inserted: u64,
    pub drained: u64,
    pub dropped: u64,
    pub pending: usize,
}

#[derive(Debug)]
struct BufState {
    frames: VecDeque<Frame>,
    inserted: u64,
    drained: u64,
    dropped: u64,
    closed: bool,
    trace: Option<Vec<TraceEvent>>,
}

/// Result of a blocking wait on the buffer.
#[derive(Debug)]
pub enum Drained {
    /// At least one frame was pending; all of them, oldest first.
    Frames(Vec<Frame>),
    /// The producer closed the stream and nothing is left.
    Closed,
}

#[derive(Debug)]
pub struct CameraBuffer {
    capacity: usize,
    state: Mutex<BufState>,
    arrived: Condvar,
}

impl CameraBuffer {
    pub fn new(capacity: usize) -> Self {
        Self::build(capacity, false)
    }

    /// A buffer that records every insert/drop/drain as a trace event.
    pub fn with_trace(capacity: usize) -> Self {
        Self::build(capacity, true)
    }

    fn build(capacity: usize, trace: bool) -> Self {
        assert!(capacity >= 1, "camera buffer capacity must be >= 1");
        CameraBuffer {
            capacity,
            state: Mutex::new(BufState {
                frames: VecDeque::new(),
                inserted: 0,
                drained: 0,
                dropped: 0,
                closed: false,
                trace: trace.then(Vec::new),
            }),
            arrived: Condvar::new(),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Inserts a frame at buffer time `now`, evicting the oldest frame if
    /// the buffer is full. Returns the dropped frame's timestep, if any.
    /// Inserts racing a consumer-side close are discarded, not queued.
    pub fn insert(&self, frame: Frame, now: f64) -> Option<u32> {
        let mut s = self.state.lock().unwrap();
        if s.closed {
            return None;
        }
        let evicted = if s.frames.len() == self.capacity {
            s.frames.pop_front()
        } else {
            None
        };
        let inserted_step = frame.timestep;
        s.frames.push_back(frame);
        s.inserted += 1;
        if let Some(t) = s.trace.as_mut() {
            t.push(TraceEvent {
                event: TraceKind::Insert,
                t: now,
                timestep: inserted_step,
            });
        }
        let dropped_step = evicted.map(|f| f.timestep);
        if let Some(step) = dropped_step {
            s.dropped += 1;
            if let Some(t) = s.trace.as_mut() {
                t.push(TraceEvent {
                    event: TraceKind::Drop,
                    t: now,
                    timestep: step,
                });
            }
        }
        drop(s);
        self.arrived.notify_all();
        dropped_step
    }

    /// Takes every pending frame, oldest first. Never blocks.
    pub fn drain(&self, now: f64) -> Vec<Frame> {
        let mut s = self.state.lock().unwrap();
        let frames: Vec<Frame> = s.frames.drain(..).collect();
        s.drained += frames.len() as u64;
        if let Some(t) = s.trace.as_mut() {
            for f in &frames {
                t.push(TraceEvent {
                    event: TraceKind::Drain,
                    t: now,
                    timestep: f.timestep,
                });
            }
        }
        frames
    }

    /// Blocks until at least one frame is pending or the stream is closed,
    /// then drains. Used by the wall-clock consumer.
    pub fn wait_drain(&self, clock: &Clock) -> Drained {
        let mut s = self.state.lock().unwrap();
        loop {
            if !s.frames.is_empty() {
                let frames: Vec<Frame> = s.frames.drain(..).collect();
                s.drained += frames.len() as u64;
                let now = clock.now();
                if let Some(t) = s.trace.as_mut() {
                    for f in &frames {
                        t.push(TraceEvent {
                            event: TraceKind::Drain,
                            t: now,
                            timestep: f.timestep,
                        });
                    }
                }
                return Drained::Frames(frames);
            }
            if s.closed {
                return Drained::Closed;
            }
            s = self.arrived.wait(s).unwrap();
        }
    }

    /// Signals end of stream: no more inserts will follow.
    pub fn close(&self) {
        let mut s = self.state.lock().unwrap();
        s.closed = true;
        drop(s);
        self.arrived.notify_all();
    }

    pub fn is_closed(&self) -> bool {
        self.state.lock().unwrap().closed
    }

    pub fn is_empty(&self) -> bool {
        self.state.lock().unwrap().frames.is_empty()
    }

    pub fn len(&self) -> usize {
        self.state.lock().unwrap().frames.len()
    }

    pub fn counters(&self) -> BufferCounters {
        let s = self.state.lock().unwrap();
        BufferCounters {
            inserted: s.inserted,
            drained: s.drained,
            dropped: s.dropped,
            pending: s.frames.len(),
        }
    }

    /// The trace recorded so far; empty unless built with [`with_trace`].
    ///
    /// [`with_trace`]: CameraBuffer::with_trace
    pub fn trace(&self) -> Vec<TraceEvent> {
        self.state
            .lock()
            .unwrap()
            .trace
            .clone()
            .unwrap_or_default()
    }
}
