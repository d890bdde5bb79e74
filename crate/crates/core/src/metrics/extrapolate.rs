//! Response extrapolation onto the timestep grid.
//!
//! A model that answers every two seconds still gets graded every second:
//! at timesteps it skipped, its previous answer stands. For each timestep
//! `i` the standing response is the latest-emitted non-pause response
//! whose covered timestep is at most `i`. Before the first response
//! arrives the standing text is empty.

use serde::{Deserialize, Serialize};

use crate::types::TimedResponse;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResponseOrigin {
    /// A response covering exactly this timestep.
    Direct,
    /// An older response carried forward.
    Carried,
    /// Nothing emitted yet.
    Empty,
}

/// Per-timestep standing responses for one task. `texts` and `origins`
/// always have exactly the track's timestep count.
#[derive(Debug, Clone, PartialEq)]
pub struct Timeline {
    pub texts: Vec<String>,
    pub origins: Vec<ResponseOrigin>,
}

impl Timeline {
    pub fn len(&self) -> usize {
        self.texts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.texts.is_empty()
    }

    pub fn count_origin(&self, origin: ResponseOrigin) -> usize {
        self.origins.iter().filter(|&&o| o == origin).count()
    }
}

/// Expands a response log onto `timesteps` grid points. Responses must be
/// ordered by emit time with non-decreasing coverage, which is what logs
/// guarantee; pauses keep the prior response standing. Responses covering
/// timesteps beyond the grid are ignored.
pub fn extrapolate_timeline(responses: &[TimedResponse], timesteps: usize) -> Timeline {
    let mut texts = Vec::with_capacity(timesteps);
    let mut origins = Vec::with_capacity(timesteps);
    let mut next = responses.iter().peekable();
    let mut standing: Option<&TimedResponse> = None;
    for i in 0..timesteps {
        while let Some(r) = next.peek() {
            if r.covered_timestep as usize > i {
                break;
            }
            let r = next.next().expect("peeked");
            if !r.is_pause {
                standing = Some(r);
            }
        }
        match standing {
            None => {
                texts.push(String::new());
                origins.push(ResponseOrigin::Empty);
            }
            Some(r) if r.covered_timestep as usize == i => {
                texts.push(r.text.clone());
                origins.push(ResponseOrigin::Direct);
            }
            Some(r) => {
                texts.push(r.text.clone());
                origins.push(ResponseOrigin::Carried);
            }
        }
    }
    Timeline { texts, origins }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn response(emit: f64, covered: u32, text: &str, pause: bool) -> TimedResponse {
        TimedResponse {
            emit_time: emit,
            covered_timestep: covered,
            text: text.into(),
            is_pause: pause,
            latency: 0.5,
        }
    }

    #[test]
    fn gaps_carry_the_previous_answer_forward() {
        let responses = vec![
            response(1.0, 0, "cat", false),
            response(3.0, 2, "dog", false),
        ];
        let tl = extrapolate_timeline(&responses, 5);
        assert_eq!(tl.texts, vec!["cat", "cat", "dog", "dog", "dog"]);
        assert_eq!(
            tl.origins,
            vec![
                ResponseOrigin::Direct,
                ResponseOrigin::Carried,
                ResponseOrigin::Direct,
                ResponseOrigin::Carried,
                ResponseOrigin::Carried,
            ]
        );
    }

    #[test]
    fn timesteps_before_first_response_are_empty() {
        let responses = vec![response(2.5, 2, "late", false)];
        let tl = extrapolate_timeline(&responses, 4);
        assert_eq!(tl.texts, vec!["", "", "late", "late"]);
        assert_eq!(tl.origins[0], ResponseOrigin::Empty);
        assert_eq!(tl.count_origin(ResponseOrigin::Empty), 2);
    }

    #[test]
    fn pauses_never_overwrite_standing_text() {
        let responses = vec![
            response(1.0, 0, "cat", false),
            response(2.0, 1, "", true),
            response(3.0, 2, "dog", false),
        ];
        let tl = extrapolate_timeline(&responses, 3);
        assert_eq!(tl.texts, vec!["cat", "cat", "dog"]);
        // the pause covers timestep 1, but the standing answer is older
        assert_eq!(tl.origins[1], ResponseOrigin::Carried);
    }

    #[test]
    fn later_emit_wins_when_coverage_repeats() {
        let responses = vec![
            response(1.0, 1, "first", false),
            response(1.5, 1, "second", false),
        ];
        let tl = extrapolate_timeline(&responses, 3);
        assert_eq!(tl.texts, vec!["", "second", "second"]);
    }

    #[test]
    fn coverage_beyond_the_grid_is_ignored() {
        let responses = vec![
            response(1.0, 0, "in", false),
            response(9.0, 7, "out", false),
        ];
        let tl = extrapolate_timeline(&responses, 3);
        assert_eq!(tl.texts, vec!["in", "in", "in"]);
    }

    #[test]
    fn empty_log_yields_all_empty() {
        let tl = extrapolate_timeline(&[], 3);
        assert_eq!(tl.texts, vec!["", "", ""]);
        assert_eq!(tl.count_origin(ResponseOrigin::Empty), 3);
        assert_eq!(tl.len(), 3);
    }
}
