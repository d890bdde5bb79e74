//! Camera-side plumbing: frames, the bounded drop-oldest buffer, frame
//! sources, and the camera producer loop.

mod buffer;
mod camera;
mod source;

pub use buffer::{BufferCounters, CameraBuffer, Drained, TraceEvent, TraceKind};
pub use camera::{run_camera_process, StreamSummary, CADENCE_TOLERANCE_SECS};
pub(crate) use camera::sleep_until;
pub use source::{open_frame_source, FrameSource, SourceSpec};

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::clock::ClockMode;

/// One captured frame. Payload bytes are shared, so clones are cheap and a
/// frame retained by the memory buffer never copies pixel data.
#[derive(Clone, PartialEq)]
pub struct Frame {
    /// 0-based index in the stream; equals round(capture_time * camera_fps)
    /// under nominal cadence.
    pub timestep: u32,
    /// Seconds since run start at which the camera captured this frame.
    pub capture_time: f64,
    pub payload: Arc<Vec<u8>>,
}

impl Frame {
    pub fn new(timestep: u32, capture_time: f64, payload: Arc<Vec<u8>>) -> Self {
        Frame {
            timestep,
            capture_time,
            payload,
        }
    }
}

impl std::fmt::Debug for Frame {
    // payloads can be whole images; print their length, not their bytes
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Frame")
            .field("timestep", &self.timestep)
            .field("capture_time", &self.capture_time)
            .field("payload_len", &self.payload.len())
            .finish()
    }
}

/// Camera and clock configuration for one run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StreamConfig {
    pub camera_fps: f64,
    pub camera_buffer_size: usize,
    pub clock: ClockMode,
}

impl Default for StreamConfig {
    fn default() -> Self {
        StreamConfig {
            camera_fps: 1.0,
            camera_buffer_size: 600,
            clock: ClockMode::Virtual,
        }
    }
}

impl StreamConfig {
    pub fn validate(&self) -> Result<(), StreamError> {
        if !self.camera_fps.is_finite() || self.camera_fps <= 0.0 {
            return Err(StreamError::InvalidConfig(format!(
                "camera_fps must be finite and > 0, got {}",
                self.camera_fps
            )));
        }
        if self.camera_buffer_size == 0 {
            return Err(StreamError::InvalidConfig(
                "camera_buffer_size must be >= 1".into(),
            ));
        }
        Ok(())
    }

    /// Nominal capture instant of frame `timestep`.
    pub fn capture_time(&self, timestep: u32) -> f64 {
        timestep as f64 / self.camera_fps
    }

    /// Instant at which a stream of `frame_count` frames is over.
    pub fn stream_end(&self, frame_count: usize) -> f64 {
        frame_count as f64 / self.camera_fps
    }
}

#[derive(Debug, thiserror::Error)]
pub enum StreamError {
    #[error("invalid stream config: {0}")]
    InvalidConfig(String),
    #[error("frame source not found: {0}")]
    SourceNotFound(String),
    #[error("frame source is empty: {0}")]
    EmptySource(String),
    #[error("unparseable source descriptor {descriptor:?}: {message}")]
    BadDescriptor { descriptor: String, message: String },
    #[error("source I/O error on {path}: {err}")]
    Io { path: String, err: std::io::Error },
    #[error(transparent)]
    Clock(#[from] crate::clock::ClockError),
}
