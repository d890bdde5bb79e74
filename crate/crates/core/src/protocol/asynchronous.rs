//! Asynchronous protocol: the camera never waits for the model. Frames
//! queue in the bounded camera buffer while an inference is in flight, and
//! when the model frees up it drains everything pending and starts a new
//! turn. A response's covered timestep is the newest frame drained for the
//! turn that produced it.
//!
//! A virtual run is a single-threaded discrete-event simulation over two
//! event kinds, frame captures and inference completions. When both fall on
//! the same instant the completion applies first: that response was already
//! formed when the frame arrived, so the frame belongs to the next turn.
//! The model stops once a response lands at or after stream end; frames
//! still buffered at that point were never seen and count as residual.
//!
//! A wall run is the same protocol as two real threads, camera producer and
//! model loop, meeting at the buffer.

use crate::backend::ModelBackend;
use crate::clock::Clock;
use crate::memory::MemoryBuffer;
use crate::stream::{run_camera_process, CameraBuffer, Drained, Frame, FrameSource};
use crate::types::TimedResponse;

use super::{infer_turn, ProtocolError, RunConfig, RunStats};

/// An inference in flight in the virtual simulation. The result is known
/// the moment the turn starts; it is withheld until `completion`.
struct Pending {
    completion: f64,
    covered: u32,
    text: String,
    is_pause: bool,
    latency: f64,
}

#[allow(clippy::too_many_arguments)]
pub(super) fn run_virtual(
    prompt: &str,
    source: &FrameSource,
    config: &RunConfig,
    clock: &Clock,
    memory: &mut MemoryBuffer,
    backend: &mut dyn ModelBackend,
    responses: &mut Vec<TimedResponse>,
    stats: &mut RunStats,
) -> Result<(), ProtocolError> {
    let buffer = if config.trace {
        CameraBuffer::with_trace(config.stream.camera_buffer_size)
    } else {
        CameraBuffer::new(config.stream.camera_buffer_size)
    };
    let result = virtual_loop(
        prompt, source, config, &buffer, clock, memory, backend, responses,
    );
    collect_buffer_stats(&buffer, config, stats);
    result
}

#[allow(clippy::too_many_arguments)]
fn virtual_loop(
    prompt: &str,
    source: &FrameSource,
    config: &RunConfig,
    buffer: &CameraBuffer,
    clock: &Clock,
    memory: &mut MemoryBuffer,
    backend: &mut dyn ModelBackend,
    responses: &mut Vec<TimedResponse>,
) -> Result<(), ProtocolError> {
    let n = source.frame_count() as u32;
    let end = config.stream.stream_end(source.frame_count());
    let mut next: u32 = 0;
    let mut inflight: Option<Pending> = None;

    loop {
        let next_capture = (next < n).then(|| config.stream.capture_time(next));
        let complete_first = match (&inflight, next_capture) {
            // a completion tied with a capture applies first
            (Some(p), Some(t)) => p.completion <= t,
            (Some(_), None) => true,
            (None, Some(_)) => false,
            (None, None) => break,
        };
        if complete_first {
            let p = inflight.take().expect("inflight checked above");
            clock.advance_to(p.completion)?;
            responses.push(TimedResponse {
                emit_time: p.completion,
                covered_timestep: p.covered,
                text: p.text,
                is_pause: p.is_pause,
                latency: p.latency,
            });
            if p.completion >= end {
                // every capture precedes stream end, so nothing is left to
                // insert here; whatever sits in the buffer stays residual
                break;
            }
            inflight = start_turn(prompt, buffer, clock, memory, backend, p.completion)?;
        } else {
            let t = next_capture.expect("capture checked above");
            clock.advance_to(t)?;
            let payload = source.payload(next).expect("frame count checked");
            buffer.insert(Frame::new(next, t, payload), t);
            next += 1;
            if inflight.is_none() {
                // an idle model wakes on arrival and takes the frame at once
                inflight = start_turn(prompt, buffer, clock, memory, backend, t)?;
            }
        }
    }
    Ok(())
}

/// Drains the buffer and launches one inference at virtual time `now`.
/// Returns `None` when nothing was pending.
fn start_turn(
    prompt: &str,
    buffer: &CameraBuffer,
    clock: &Clock,
    memory: &mut MemoryBuffer,
    backend: &mut dyn ModelBackend,
    now: f64,
) -> Result<Option<Pending>, ProtocolError> {
    let frames = buffer.drain(now);
    let Some(newest) = frames.last() else {
        return Ok(None);
    };
    let covered = newest.timestep;
    let result = infer_turn(prompt, &frames, now, memory, backend, clock)?;
    Ok(Some(Pending {
        completion: now + result.latency,
        covered,
        text: result.text,
        is_pause: result.is_pause,
        latency: result.latency,
    }))
}

#[allow(clippy::too_many_arguments)]
pub(super) fn run_wall(
    prompt: &str,
    source: &FrameSource,
    config: &RunConfig,
    clock: &Clock,
    memory: &mut MemoryBuffer,
    backend: &mut dyn ModelBackend,
    responses: &mut Vec<TimedResponse>,
    stats: &mut RunStats,
) -> Result<(), ProtocolError> {
    let end = config.stream.stream_end(source.frame_count());
    let buffer = if config.trace {
        CameraBuffer::with_trace(config.stream.camera_buffer_size)
    } else {
        CameraBuffer::new(config.stream.camera_buffer_size)
    };

    let (model_result, camera_result) = std::thread::scope(|scope| {
        let camera = scope.spawn(|| run_camera_process(source, &config.stream, &buffer, clock));
        let model_result = wall_model_loop(prompt, end, &buffer, clock, memory, backend, responses);
        if model_result.is_err() {
            // closing the buffer tells the camera to stop pacing out frames
            buffer.close();
        }
        (model_result, camera.join())
    });

    collect_buffer_stats(&buffer, config, stats);
    match camera_result {
        Ok(Ok(summary)) => stats.cadence_violations = summary.cadence_violations,
        Ok(Err(stream_err)) => {
            if model_result.is_ok() {
                return Err(stream_err.into());
            }
        }
        Err(_) => {
            if model_result.is_ok() {
                return Err(ProtocolError::Internal("camera thread panicked".into()));
            }
        }
    }
    model_result
}

fn wall_model_loop(
    prompt: &str,
    end: f64,
    buffer: &CameraBuffer,
    clock: &Clock,
    memory: &mut MemoryBuffer,
    backend: &mut dyn ModelBackend,
    responses: &mut Vec<TimedResponse>,
) -> Result<(), ProtocolError> {
    loop {
        match buffer.wait_drain(clock) {
            Drained::Closed => break,
            Drained::Frames(frames) => {
                let t = clock.now();
                let covered = frames.last().expect("drained frames nonempty").timestep;
                let result = infer_turn(prompt, &frames, t, memory, backend, clock)?;
                let emit = clock.now();
                responses.push(TimedResponse {
                    emit_time: emit,
                    covered_timestep: covered,
                    text: result.text,
                    is_pause: result.is_pause,
                    latency: result.latency,
                });
                if emit >= end {
                    break;
                }
            }
        }
    }
    Ok(())
}

fn collect_buffer_stats(buffer: &CameraBuffer, config: &RunConfig, stats: &mut RunStats) {
    let counters = buffer.counters();
    stats.frames_emitted = counters.inserted;
    stats.frames_dropped = counters.dropped;
    stats.frames_drained = counters.drained;
    stats.frames_residual = counters.pending as u64;
    if config.trace {
        stats.trace = Some(buffer.trace());
    }
}
