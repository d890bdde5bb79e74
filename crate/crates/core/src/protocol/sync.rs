//! Synchronous protocol: the model answers every frame before the next one
//! is considered, as if the camera waited for it. Responses land exactly on
//! the capture grid, so accuracy here is an upper bound unclouded by
//! scheduling; latency is recorded but does not shift emit times.

use crate::backend::ModelBackend;
use crate::clock::{Clock, ClockMode};
use crate::memory::MemoryBuffer;
use crate::stream::{Frame, FrameSource};
use crate::types::TimedResponse;

use super::{infer_turn, ProtocolError, RunConfig, RunStats};

#[allow(clippy::too_many_arguments)]
pub(super) fn run(
    prompt: &str,
    source: &FrameSource,
    config: &RunConfig,
    clock: &Clock,
    memory: &mut MemoryBuffer,
    backend: &mut dyn ModelBackend,
    responses: &mut Vec<TimedResponse>,
    stats: &mut RunStats,
) -> Result<(), ProtocolError> {
    let n = source.frame_count() as u32;
    for i in 0..n {
        let t = config.stream.capture_time(i);
        if clock.mode() == ClockMode::Virtual {
            clock.advance_to(t)?;
        }
        let frame = Frame::new(i, t, source.payload(i).expect("frame count checked"));
        stats.frames_emitted += 1;
        stats.frames_drained += 1;
        let result = infer_turn(prompt, std::slice::from_ref(&frame), t, memory, backend, clock)?;
        responses.push(TimedResponse {
            emit_time: t,
            covered_timestep: i,
            text: result.text,
            is_pause: result.is_pause,
            latency: result.latency,
        });
    }
    Ok(())
}
