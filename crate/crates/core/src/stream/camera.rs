//! The camera producer: streams frames from a source into the buffer at the
//! configured rate, then closes the stream.
//!
//! On the wall clock each frame is scheduled at its absolute nominal instant
//! (run start + i/fps), so one slow insert does not shift every later frame.
//! Deviations beyond the tolerance are counted, never fatal. On a virtual
//! clock the loop advances the clock itself, which only makes sense when
//! nobody else drives time; the asynchronous virtual runner interleaves
//! inserts with inference events instead of calling this.

use std::time::Duration;

use super::{CameraBuffer, Frame, FrameSource, StreamConfig, StreamError};
use crate::clock::{Clock, ClockMode};

/// Per-frame deviation from nominal cadence that gets flagged (seconds).
pub const CADENCE_TOLERANCE_SECS: f64 = 0.05;

/// What the camera did over one full stream.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StreamSummary {
    pub frames_emitted: u64,
    pub frames_dropped: u64,
    /// Capture instant of the last frame.
    pub end_time: f64,
    /// Frames whose actual capture instant missed nominal by more than
    /// [`CADENCE_TOLERANCE_SECS`]. Always 0 on a virtual clock.
    pub cadence_violations: u32,
}

/// Runs the full camera loop to completion and closes the buffer.
pub fn run_camera_process(
    source: &FrameSource,
    cfg: &StreamConfig,
    buffer: &CameraBuffer,
    clock: &Clock,
) -> Result<StreamSummary, StreamError> {
    cfg.validate()?;
    let before = buffer.counters();
    let mut cadence_violations = 0u32;
    let mut end_time = 0.0;
    for i in 0..source.frame_count() as u32 {
        // a consumer closing the buffer mid-stream is an abort request
        if buffer.is_closed() {
            break;
        }
        let nominal = cfg.capture_time(i);
        let capture_time = match clock.mode() {
            ClockMode::Virtual => {
                clock.advance_to(nominal)?;
                nominal
            }
            ClockMode::Wall => {
                sleep_until(clock, nominal);
                let actual = clock.now();
                if (actual - nominal).abs() > CADENCE_TOLERANCE_SECS {
                    cadence_violations += 1;
                }
                actual
            }
        };
        let payload = source.payload(i).expect("payload within frame_count");
        buffer.insert(Frame::new(i, capture_time, payload), capture_time);
        end_time = capture_time;
    }
    buffer.close();
    let after = buffer.counters();
    Ok(StreamSummary {
        frames_emitted: after.inserted - before.inserted,
        frames_dropped: after.dropped - before.dropped,
        end_time,
        cadence_violations,
    })
}

/// Sleeps until the clock reads `target` seconds. Coarse sleep to just
/// short of the target, then a brief spin for the last stretch, which keeps
/// per-frame deviation well under the cadence tolerance.
pub(crate) fn sleep_until(clock: &Clock, target: f64) {
    const SPIN_WINDOW: f64 = 0.002;
    loop {
        let remaining = target - clock.now();
        if remaining <= 0.0 {
            return;
        }
        if remaining > SPIN_WINDOW {
            std::thread::sleep(Duration::from_secs_f64(remaining - SPIN_WINDOW));
        } else {
            std::hint::spin_loop();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stream::{open_frame_source, SourceSpec};

    fn synthetic(count: u32) -> FrameSource {
        open_frame_source(&SourceSpec::Synthetic {
            count,
            pattern: "f{i}".into(),
        })
        .unwrap()
    }

    #[test]
    fn virtual_camera_fills_buffer_without_drops() {
        let cfg = StreamConfig {
            camera_fps: 1.0,
            camera_buffer_size: 600,
            clock: ClockMode::Virtual,
        };
        let buffer = CameraBuffer::new(cfg.camera_buffer_size);
        let clock = Clock::virtual_clock();
        let summary = run_camera_process(&synthetic(10), &cfg, &buffer, &clock).unwrap();
        assert_eq!(summary.frames_emitted, 10);
        assert_eq!(summary.frames_dropped, 0);
        assert_eq!(summary.end_time, 9.0);
        assert_eq!(summary.cadence_violations, 0);
        assert_eq!(buffer.len(), 10);
        assert!(buffer.is_closed());
    }

    #[test]
    fn virtual_camera_overflow_drops_oldest() {
        let cfg = StreamConfig {
            camera_fps: 1.0,
            camera_buffer_size: 3,
            clock: ClockMode::Virtual,
        };
        let buffer = CameraBuffer::new(cfg.camera_buffer_size);
        let clock = Clock::virtual_clock();
        let summary = run_camera_process(&synthetic(10), &cfg, &buffer, &clock).unwrap();
        assert_eq!(summary.frames_dropped, 7);
        let steps: Vec<u32> = buffer.drain(9.0).iter().map(|f| f.timestep).collect();
        assert_eq!(steps, vec![7, 8, 9]);
    }

    #[test]
    fn wall_camera_holds_cadence() {
        let cfg = StreamConfig {
            camera_fps: 2.0,
            camera_buffer_size: 16,
            clock: ClockMode::Wall,
        };
        let buffer = CameraBuffer::new(cfg.camera_buffer_size);
        let clock = Clock::wall();
        let summary = run_camera_process(&synthetic(4), &cfg, &buffer, &clock).unwrap();
        assert_eq!(summary.frames_emitted, 4);
        assert_eq!(summary.cadence_violations, 0, "cadence drifted over 50ms");
        let frames = buffer.drain(clock.now());
        for w in frames.windows(2) {
            let delta = w[1].capture_time - w[0].capture_time;
            assert!(
                (delta - 0.5).abs() <= CADENCE_TOLERANCE_SECS,
                "inter-frame delta {delta} outside 0.5s +/- 50ms"
            );
        }
    }

    #[test]
    fn rejects_bad_config() {
        let cfg = StreamConfig {
            camera_fps: 0.0,
            camera_buffer_size: 4,
            clock: ClockMode::Virtual,
        };
        let buffer = CameraBuffer::new(4);
        let clock = Clock::virtual_clock();
        assert!(matches!(
            run_camera_process(&synthetic(2), &cfg, &buffer, &clock),
            Err(StreamError::InvalidConfig(_))
        ));
    }
}
