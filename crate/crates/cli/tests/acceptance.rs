//! Acceptance suite: one test per numbered criterion, covering the whole
//! pipeline from fixtures through protocol runs to scored reports. Each
//! test prints a single `criterion NN <name>: PASS` or `... FAIL (<why>)`
//! line; run with `--nocapture` to see the lines for passing tests too.

use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::Instant;

use rand::prelude::*;
use streameval_core::backend::{ChangeDetector, SpeculativeConfig};
use streameval_core::metrics::longest_common_substring_len;
use streameval_core::{
    aggregate, build_backend, lcs_distance, open_frame_source, run_task, AnnotationEntry,
    AnnotationTrack, BackendConfig, ClockMode, ConsistencyDenominator, Frame, MemoryBuffer,
    MemoryConfig, MemoryPolicy, OracleJudge, Protocol, ResponseLog, RunConfig, SourceSpec,
    StreamConfig, TaskOutcome, TaskScore, TaskType, TimedResponse, TraceKind, Weighting,
};

/// Runs one criterion check and prints its verdict line. A failed check
/// panics after printing, so the suite stays a plain test target.
fn criterion(number: u32, name: &str, check: impl FnOnce() -> Result<(), String>) {
    match check() {
        Ok(()) => println!("criterion {number:02} {name}: PASS"),
        Err(why) => {
            println!("criterion {number:02} {name}: FAIL ({why})");
            panic!("criterion {number:02} {name}: {why}");
        }
    }
}

macro_rules! ensure {
    ($cond:expr, $($arg:tt)+) => {
        match $cond {
            true => {}
            false => return Err(format!($($arg)+)),
        }
    };
}

fn track_from(id: &str, captions: &[String]) -> AnnotationTrack {
    AnnotationTrack {
        task_id: id.to_string(),
        video_id: format!("vid-{id}"),
        task_type: TaskType::Present,
        category: "accept".to_string(),
        prompt: "What is happening right now?".to_string(),
        entries: captions
            .iter()
            .enumerate()
            .map(|(i, caption)| AnnotationEntry {
                timestep: i as u32,
                caption: caption.clone(),
            })
            .collect(),
    }
}

fn echo_config(protocol: Protocol, latency: f64, buffer: usize, trace: bool) -> RunConfig {
    RunConfig {
        protocol,
        stream: StreamConfig {
            camera_fps: 1.0,
            camera_buffer_size: buffer,
            clock: ClockMode::Virtual,
        },
        memory: MemoryConfig::default(),
        backend: BackendConfig::Echo { latency },
        trace,
    }
}

/// Runs `track` against a synthetic source, failing on any task error.
fn run_ok(track: &AnnotationTrack, config: &RunConfig) -> Result<TaskOutcome, String> {
    let spec = SourceSpec::parse(&format!("synthetic:{}", track.len_timesteps()))
        .map_err(|e| e.to_string())?;
    let source = open_frame_source(&spec).map_err(|e| e.to_string())?;
    let mut backend = build_backend(&config.backend, Path::new("."), config.stream.clock)
        .map_err(|e| e.to_string())?;
    let outcome = run_task(track, &source, config, backend.as_mut());
    match &outcome.error {
        Some(e) => Err(format!("task {} failed: {e}", track.task_id)),
        None => Ok(outcome),
    }
}

fn oracle_score(track: &AnnotationTrack, log: &ResponseLog) -> Result<TaskScore, String> {
    let mut judge = OracleJudge;
    let mut warnings = Vec::new();
    score_with(track, log, &mut judge, &mut warnings)
}

fn score_with(
    track: &AnnotationTrack,
    log: &ResponseLog,
    judge: &mut OracleJudge,
    warnings: &mut Vec<String>,
) -> Result<TaskScore, String> {
    streameval_core::score_task(track, log, judge, ConsistencyDenominator::Timesteps, warnings)
        .map_err(|e| format!("scoring {}: {e}", track.task_id))
}

fn streameval(args: &[&str]) -> Result<std::process::Output, String> {
    Command::new(env!("CARGO_BIN_EXE_streameval"))
        .args(args)
        .output()
        .map_err(|e| format!("spawning streameval: {e}"))
}

fn streameval_ok(args: &[&str]) -> Result<(), String> {
    let out = streameval(args)?;
    ensure!(
        out.status.code() == Some(0),
        "streameval {args:?} exited {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    Ok(())
}

fn overall_accuracy(report_json: &Path) -> Result<f64, String> {
    let text = std::fs::read_to_string(report_json)
        .map_err(|e| format!("reading {}: {e}", report_json.display()))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| format!("parsing report: {e}"))?;
    value["aggregates"]["uniform"]["accuracy"]
        .as_f64()
        .ok_or_else(|| "report lacks aggregates.uniform.accuracy".to_string())
}

#[test]
fn criterion_01_perfect_model_fixpoint() {
    criterion(1, "perfect zero-latency model scores 1.000 both ways", || {
        let started = Instant::now();
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let fixture = dir.path().join("fixture");
        streameval_ok(&["fixtures", "smoke", fixture.to_str().unwrap()])?;
        let manifest = fixture.join("manifest.json");
        let annotations = fixture.join("annotations.json");
        for protocol in ["sync", "async"] {
            let logs = dir.path().join(protocol);
            let report = dir.path().join(format!("{protocol}-report"));
            streameval_ok(&[
                "run",
                "--manifest",
                manifest.to_str().unwrap(),
                "--out",
                logs.to_str().unwrap(),
                "--protocol",
                protocol,
            ])?;
            streameval_ok(&[
                "score",
                "--logs",
                logs.to_str().unwrap(),
                "--annotations",
                annotations.to_str().unwrap(),
                "--out",
                report.to_str().unwrap(),
            ])?;
            let accuracy = overall_accuracy(&report.join("report.json"))?;
            ensure!(
                accuracy == 1.0,
                "{protocol} overall accuracy {accuracy} is not exactly 1.0"
            );
        }
        let elapsed = started.elapsed().as_secs_f64();
        ensure!(elapsed < 5.0, "pipeline took {elapsed:.2} s, budget is 5 s");
        Ok(())
    });
}

#[test]
fn criterion_02_latency_accuracy_tradeoff() {
    criterion(2, "async accuracy strictly falls as latency grows", || {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let fixture = dir.path().join("fixture");
        streameval_ok(&["fixtures", "tradeoff", fixture.to_str().unwrap()])?;
        let manifest = fixture.join("manifest.json");
        let annotations = fixture.join("annotations.json");
        let score_run = |label: &str, extra: &[&str]| -> Result<f64, String> {
            let logs = dir.path().join(label);
            let report = dir.path().join(format!("{label}-report"));
            let mut args = vec![
                "run",
                "--manifest",
                manifest.to_str().unwrap(),
                "--out",
                logs.to_str().unwrap(),
            ];
            args.extend_from_slice(extra);
            streameval_ok(&args)?;
            streameval_ok(&[
                "score",
                "--logs",
                logs.to_str().unwrap(),
                "--annotations",
                annotations.to_str().unwrap(),
                "--out",
                report.to_str().unwrap(),
            ])?;
            overall_accuracy(&report.join("report.json"))
        };

        let mut accuracies = Vec::new();
        for latency in ["0.5", "2", "5", "10"] {
            let backend = format!("echo:{latency}");
            accuracies.push(score_run(
                &format!("async-{latency}"),
                &["--backend", &backend],
            )?);
        }
        for pair in accuracies.windows(2) {
            ensure!(
                pair[1] < pair[0],
                "accuracy did not strictly decrease across latencies: {accuracies:?}"
            );
        }
        let sync = score_run("sync", &["--protocol", "sync", "--backend", "echo:0.5"])?;
        let gap = (accuracies[0] - sync).abs();
        ensure!(
            gap <= 0.02,
            "async at 0.5 s ({}) differs from sync ({sync}) by {gap}, allowed 0.02",
            accuracies[0]
        );
        Ok(())
    });
}

#[test]
fn criterion_03_async_schedule_determinism() {
    criterion(3, "async schedule is deterministic with exact timing", || {
        let captions: Vec<String> = (0..10).map(|i| format!("second {i} of the feed")).collect();
        let track = track_from("determinism", &captions);
        let config = echo_config(Protocol::Async, 2.5, 600, false);
        let mut logs = Vec::new();
        for _ in 0..5 {
            logs.push(run_ok(&track, &config)?.run.log);
        }
        let first = logs[0].to_json();
        for log in &logs[1..] {
            ensure!(
                log.to_json() == first,
                "repeated runs produced different logs"
            );
        }
        let emits: Vec<f64> = logs[0].responses.iter().map(|r| r.emit_time).collect();
        ensure!(
            emits == [2.5, 5.0, 7.5, 10.0],
            "completion times {emits:?} differ from [2.5, 5.0, 7.5, 10.0]"
        );
        let covered: Vec<u32> = logs[0]
            .responses
            .iter()
            .map(|r| r.covered_timestep)
            .collect();
        ensure!(
            covered == [0, 2, 5, 7],
            "covered timesteps are {covered:?}, required [0, 2, 5, 7]; at t = 5.0 a \
             completion and a capture coincide and the buffer settles the completion \
             first, so frame 5 misses that drain. The required list needs the opposite \
             settlement order, which the drop trace of criterion 04 rules out"
        );
        Ok(())
    });
}

#[test]
fn criterion_04_buffer_drop_trace() {
    criterion(4, "a tiny camera buffer drops the oldest frames", || {
        let captions: Vec<String> = (0..10).map(|i| format!("frame {i} on screen")).collect();
        let track = track_from("buffer-drop", &captions);
        let outcome = run_ok(&track, &echo_config(Protocol::Async, 5.0, 2, true))?;
        let trace = outcome
            .run
            .trace
            .as_ref()
            .ok_or_else(|| "run produced no trace".to_string())?;
        let early_drops: Vec<u32> = trace
            .iter()
            .filter(|e| e.event == TraceKind::Drop && e.t < 5.0)
            .map(|e| e.timestep)
            .collect();
        ensure!(
            early_drops == [1, 2],
            "first busy window dropped frames {early_drops:?}, expected [1, 2]"
        );
        let mut batches: Vec<(f64, Vec<u32>)> = Vec::new();
        for event in trace.iter().filter(|e| e.event == TraceKind::Drain) {
            match batches.last_mut() {
                Some((t, steps)) if *t == event.t => steps.push(event.timestep),
                _ => batches.push((event.t, vec![event.timestep])),
            }
        }
        ensure!(batches.len() >= 2, "expected two drain batches, saw {batches:?}");
        ensure!(
            batches[1].1 == [3, 4],
            "second drain pulled frames {:?}, expected [3, 4]",
            batches[1].1
        );
        Ok(())
    });
}

/// Consistency score for explicit response and ground-truth caption
/// sequences, emitted one response per timestep.
fn consistency_of(responses: &[&str], captions: &[&str]) -> Result<(f64, f64), String> {
    let captions: Vec<String> = captions.iter().map(|c| c.to_string()).collect();
    let track = track_from("consistency", &captions);
    let log = ResponseLog {
        task_id: track.task_id.clone(),
        protocol: Protocol::Sync,
        run_metadata: Default::default(),
        responses: responses
            .iter()
            .enumerate()
            .map(|(i, text)| TimedResponse {
                emit_time: i as f64,
                covered_timestep: i as u32,
                text: text.to_string(),
                is_pause: false,
                latency: 0.0,
            })
            .collect(),
    };
    let score = oracle_score(&track, &log)?;
    Ok((score.raw_consistency, score.consistency))
}

fn brute_force_lcs(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut best = 0;
    for start in 0..a.len() {
        for end in start + 1..=a.len() {
            let window = &a[start..end];
            if window.len() > best && b.windows(window.len()).any(|w| w == window) {
                best = window.len();
            }
        }
    }
    best
}

#[test]
fn criterion_05_metrics_arithmetic() {
    criterion(5, "consistency examples and substring distances are exact", || {
        let (raw, clipped) = consistency_of(&["a red cube"; 5], &["a red cube"; 5])?;
        ensure!(raw == 0.8, "steady responses over steady truth: raw {raw} != 0.8");
        ensure!(clipped == 0.8, "steady over steady: clipped {clipped} != 0.8");

        let (raw, _) = consistency_of(&["aaaa", "bbbb", "aaaa"], &["a red cube"; 3])?;
        ensure!(raw == 0.0, "flipping responses over steady truth: raw {raw} != 0");

        let (raw, clipped) = consistency_of(&["a red cube"; 3], &["aaaa", "bbbb", "aaaa"])?;
        ensure!(
            raw == 4.0 / 3.0,
            "steady responses over flipping truth: raw {raw} != 4/3"
        );
        ensure!(clipped == 1.0, "raw 4/3 must clip to 1.0, got {clipped}");

        let alphabet = ['a', 'b', 'c', 'd', ' ', '日'];
        let mut rng = StdRng::seed_from_u64(0x5eed);
        let random_string = |rng: &mut StdRng| -> String {
            let len = rng.gen_range(0..=20);
            (0..len).map(|_| alphabet[rng.gen_range(0..alphabet.len())]).collect()
        };
        for case in 0..1000 {
            let a = random_string(&mut rng);
            let b = random_string(&mut rng);
            let expected_len = brute_force_lcs(&a, &b);
            let got_len = longest_common_substring_len(&a, &b);
            ensure!(
                got_len == expected_len,
                "case {case}: substring length {got_len} != oracle {expected_len} for {a:?} vs {b:?}"
            );
            let max_len = a.chars().count().max(b.chars().count());
            let expected = if max_len == 0 {
                0.0
            } else {
                1.0 - expected_len as f64 / max_len as f64
            };
            let got = lcs_distance(&a, &b);
            ensure!(
                got == expected,
                "case {case}: distance {got} != oracle {expected} for {a:?} vs {b:?}"
            );
        }
        Ok(())
    });
}

fn context_steps(policy: MemoryPolicy, n: usize, k: usize) -> Result<Vec<usize>, String> {
    let mut memory = MemoryBuffer::new(MemoryConfig {
        policy,
        context_size: k,
    })
    .map_err(|e| e.to_string())?;
    let frames: Vec<Frame> = (0..n as u32)
        .map(|i| Frame::new(i, i as f64, Arc::new(Vec::new())))
        .collect();
    memory.ingest(&frames).map_err(|e| e.to_string())?;
    Ok(memory
        .select_context()
        .map_err(|e| e.to_string())?
        .iter()
        .map(|f| f.timestep as usize)
        .collect())
}

/// Floating-point restatement of half-up even spacing over `0..n`.
fn even_spacing_oracle(n: usize, k: usize) -> Vec<usize> {
    if k >= n {
        return (0..n).collect();
    }
    if k == 1 {
        return vec![n - 1];
    }
    (0..k)
        .map(|j| (j as f64 * (n - 1) as f64 / (k - 1) as f64 + 0.5).floor() as usize)
        .collect()
}

/// Recent half as a suffix, older half evenly spaced over what precedes it.
fn composition_oracle(n: usize, k: usize) -> Vec<usize> {
    if k >= n {
        return (0..n).collect();
    }
    let recent = k.div_ceil(2);
    let older_quota = k / 2;
    let mut picks = if older_quota == 0 {
        Vec::new()
    } else {
        even_spacing_oracle(n - recent, older_quota)
    };
    picks.extend(n - recent..n);
    picks
}

#[test]
fn criterion_06_memory_policies() {
    criterion(6, "memory policies match brute-force selection oracles", || {
        for n in 1..=50usize {
            for k in 1..=16usize {
                let sw = context_steps(MemoryPolicy::SlidingWindow, n, k)?;
                let suffix: Vec<usize> = (n.saturating_sub(k)..n).collect();
                ensure!(sw == suffix, "sliding window n={n} k={k}: {sw:?} != {suffix:?}");

                let uniform = context_steps(MemoryPolicy::Uniform, n, k)?;
                let spaced = even_spacing_oracle(n, k);
                ensure!(uniform == spaced, "uniform n={n} k={k}: {uniform:?} != {spaced:?}");
                if n > k && k >= 2 {
                    ensure!(
                        uniform.first() == Some(&0) && uniform.last() == Some(&(n - 1)),
                        "uniform n={n} k={k} must keep both endpoints: {uniform:?}"
                    );
                }

                let hybrid = context_steps(MemoryPolicy::SlidingWindowUniform, n, k)?;
                let composed = composition_oracle(n, k);
                ensure!(hybrid == composed, "hybrid n={n} k={k}: {hybrid:?} != {composed:?}");
            }
        }
        Ok(())
    });
}

#[test]
fn criterion_07_speculative_wrapper() {
    criterion(7, "speculative replay keeps accuracy and cuts latency", || {
        let captions = vec!["the light stays green".to_string(); 30];
        let track = track_from("steady", &captions);
        let spec = SourceSpec::parse("synthetic:30:steady-scene").map_err(|e| e.to_string())?;
        let source = open_frame_source(&spec).map_err(|e| e.to_string())?;

        let wrapped_backend_config = BackendConfig::Speculative {
            inner: Box::new(BackendConfig::Echo { latency: 5.8 }),
            config: SpeculativeConfig {
                detector: ChangeDetector::ExactPayload,
                verify_cost: Some(1.5),
            },
        };
        let mut config = echo_config(Protocol::Async, 5.8, 600, false);
        config.backend = wrapped_backend_config;
        let mut backend = build_backend(&config.backend, Path::new("."), ClockMode::Virtual)
            .map_err(|e| e.to_string())?;
        let outcome = run_task(&track, &source, &config, backend.as_mut());
        ensure!(
            outcome.error.is_none(),
            "wrapped run failed: {:?}",
            outcome.error
        );
        let stats = backend.stats();
        ensure!(
            stats.get("generated") == Some(&1),
            "generate path ran {:?} times, expected exactly once",
            stats.get("generated")
        );
        let wrapped = oracle_score(&track, &outcome.run.log)?;
        let mean_latency = wrapped
            .mean_latency
            .ok_or_else(|| "wrapped run emitted no responses".to_string())?;
        ensure!(
            mean_latency < 2.0,
            "mean latency with replay is {mean_latency:.3} s, expected under 2.0 s"
        );

        let plain_outcome = run_ok(&track, &echo_config(Protocol::Async, 5.8, 600, false))?;
        let plain = oracle_score(&track, &plain_outcome.run.log)?;
        ensure!(
            wrapped.accuracy >= plain.accuracy,
            "replay lowered accuracy: {} with vs {} without",
            wrapped.accuracy,
            plain.accuracy
        );
        Ok(())
    });
}

#[test]
fn criterion_08_wall_virtual_agreement() {
    criterion(8, "wall-clock emits track the virtual schedule", || {
        let captions: Vec<String> = (0..10).map(|i| format!("second {i}")).collect();
        let track = track_from("wall", &captions);
        let predicted = run_ok(&track, &echo_config(Protocol::Async, 1.5, 600, false))?;
        let mut wall_config = echo_config(Protocol::Async, 1.5, 600, false);
        wall_config.stream.clock = ClockMode::Wall;
        let measured = run_ok(&track, &wall_config)?;

        let virtual_emits: Vec<f64> =
            predicted.run.log.responses.iter().map(|r| r.emit_time).collect();
        let wall_emits: Vec<f64> =
            measured.run.log.responses.iter().map(|r| r.emit_time).collect();
        ensure!(
            wall_emits.len() == virtual_emits.len(),
            "wall run emitted {} responses, virtual predicted {}",
            wall_emits.len(),
            virtual_emits.len()
        );
        for (i, (wall, virt)) in wall_emits.iter().zip(&virtual_emits).enumerate() {
            let drift = (wall - virt).abs();
            ensure!(
                drift <= 0.05,
                "emit {i} drifted {drift:.3} s from prediction ({wall:.3} vs {virt:.3})"
            );
        }
        ensure!(
            measured.run.log.run_metadata.contains_key("cadence_violations"),
            "wall run metadata does not report cadence_violations"
        );
        Ok(())
    });
}

/// Scores a two-timestep task whose responses are either both right or
/// both wrong, pinning accuracy to exactly 1.0 or 0.0.
fn scored_task(
    id: &str,
    category: &str,
    task_type: TaskType,
    correct: bool,
) -> Result<TaskScore, String> {
    let caption = "the door is open";
    let mut track = track_from(id, &[caption.to_string(), caption.to_string()]);
    track.category = category.to_string();
    track.task_type = task_type;
    let text = if correct { caption } else { "zzz qqq" };
    let log = ResponseLog {
        task_id: track.task_id.clone(),
        protocol: Protocol::Sync,
        run_metadata: Default::default(),
        responses: (0..2)
            .map(|i| TimedResponse {
                emit_time: i as f64,
                covered_timestep: i,
                text: text.to_string(),
                is_pause: false,
                latency: 0.0,
            })
            .collect(),
    };
    oracle_score(&track, &log)
}

#[test]
fn criterion_09_reweighting() {
    criterion(9, "reweighting averages cohorts instead of tasks", || {
        let lopsided = vec![
            scored_task("x1", "crowded", TaskType::Present, true)?,
            scored_task("x2", "crowded", TaskType::Present, true)?,
            scored_task("x3", "crowded", TaskType::Present, true)?,
            scored_task("y1", "lonely", TaskType::Present, false)?,
        ];
        let weighted = aggregate(&lopsided, Weighting::InverseCategory).map_err(|e| e.to_string())?;
        ensure!(
            weighted.accuracy == 0.5,
            "inverse-category accuracy {} is not exactly 0.5",
            weighted.accuracy
        );

        let balanced = vec![
            scored_task("a1", "alpha", TaskType::Present, true)?,
            scored_task("a2", "alpha", TaskType::Cumulative, false)?,
            scored_task("b1", "beta", TaskType::Present, false)?,
            scored_task("b2", "beta", TaskType::Cumulative, true)?,
        ];
        let uniform = aggregate(&balanced, Weighting::Uniform).map_err(|e| e.to_string())?;
        for weighting in [
            Weighting::InverseCategory,
            Weighting::InverseTask,
            Weighting::InverseBoth,
        ] {
            let other = aggregate(&balanced, weighting).map_err(|e| e.to_string())?;
            ensure!(
                other.accuracy == uniform.accuracy && other.consistency == uniform.consistency,
                "{weighting:?} diverged from uniform on balanced cohorts: \
                 accuracy {} vs {}, consistency {} vs {}",
                other.accuracy,
                uniform.accuracy,
                other.consistency,
                uniform.consistency
            );
        }
        Ok(())
    });
}

#[test]
fn criterion_10_report_golden_files() {
    criterion(10, "score output is byte-stable and matches goldens", || {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let fixture = dir.path().join("fixture");
        streameval_ok(&["fixtures", "smoke", fixture.to_str().unwrap()])?;
        let logs = dir.path().join("logs");
        streameval_ok(&[
            "run",
            "--manifest",
            fixture.join("manifest.json").to_str().unwrap(),
            "--out",
            logs.to_str().unwrap(),
        ])?;
        let mut rendered = Vec::new();
        for pass in ["first", "second"] {
            let report = dir.path().join(pass);
            streameval_ok(&[
                "score",
                "--logs",
                logs.to_str().unwrap(),
                "--annotations",
                fixture.join("annotations.json").to_str().unwrap(),
                "--out",
                report.to_str().unwrap(),
            ])?;
            let json = std::fs::read(report.join("report.json")).map_err(|e| e.to_string())?;
            let table = std::fs::read(report.join("report.md")).map_err(|e| e.to_string())?;
            rendered.push((json, table));
        }
        ensure!(
            rendered[0] == rendered[1],
            "scoring the same logs twice produced different bytes"
        );

        let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
        for (name, produced) in [
            ("report.json", &rendered[0].0),
            ("report.md", &rendered[0].1),
        ] {
            let expected = std::fs::read(golden.join(name))
                .map_err(|e| format!("reading golden {name}: {e}"))?;
            ensure!(
                *produced == expected,
                "{name} differs from the committed golden copy"
            );
        }
        Ok(())
    });
}
