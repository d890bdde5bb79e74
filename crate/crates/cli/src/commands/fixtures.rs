//! `fixtures`: deterministic synthetic suites for exercising the harness
//! without any model or video data. Three scenarios:
//!
//! * smoke: three 10-second tasks, one per task type, paired with a
//!   zero-latency echo backend, so a correct pipeline scores exactly 1.0;
//! * tradeoff: one 60-second task whose ground truth changes every 5
//!   seconds, for sweeping backend latency against accuracy;
//! * buffer-drop: one 10-second task with a 5-second mock backend and a
//!   2-slot camera buffer, small enough to hand-trace every drop.

use std::path::Path;

use anyhow::{bail, Context, Result};
use streameval_core::backend::{LatencyModel, MockRule, MockScript};
use streameval_core::{
    annotation_file_to_json, AnnotationEntry, AnnotationTrack, BackendConfig, ClockMode,
    MemoryConfig, Protocol, RunConfig, StreamConfig, TaskType,
};

use crate::manifest::SuiteManifest;
use crate::{FixturesArgs, EXIT_OK};

use super::run::prepare_out_dir;

pub fn cmd_fixtures(args: &FixturesArgs) -> Result<i32> {
    prepare_out_dir(&args.out, args.force)?;
    match args.kind.as_str() {
        "smoke" => write_smoke(&args.out)?,
        "tradeoff" => write_tradeoff(&args.out)?,
        "buffer-drop" => write_buffer_drop(&args.out)?,
        other => bail!("unknown fixture kind {other:?} (expected smoke, tradeoff, or buffer-drop)"),
    }
    println!("wrote {} fixture to {}", args.kind, args.out.display());
    Ok(EXIT_OK)
}

fn track(
    task_id: &str,
    video_id: &str,
    task_type: TaskType,
    category: &str,
    prompt: &str,
    captions: Vec<String>,
) -> AnnotationTrack {
    AnnotationTrack {
        task_id: task_id.to_string(),
        video_id: video_id.to_string(),
        task_type,
        category: category.to_string(),
        prompt: prompt.to_string(),
        entries: captions
            .into_iter()
            .enumerate()
            .map(|(i, caption)| AnnotationEntry {
                timestep: i as u32,
                caption,
            })
            .collect(),
    }
}

fn write_files(
    dir: &Path,
    tracks: &[AnnotationTrack],
    manifest: &SuiteManifest,
) -> Result<()> {
    let annotations_path = dir.join("annotations.json");
    std::fs::write(&annotations_path, annotation_file_to_json(tracks))
        .with_context(|| format!("writing {}", annotations_path.display()))?;
    let manifest_path = dir.join("manifest.json");
    let mut text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    text.push('\n');
    std::fs::write(&manifest_path, text)
        .with_context(|| format!("writing {}", manifest_path.display()))?;
    Ok(())
}

fn base_run(protocol: Protocol, buffer_size: usize, backend: BackendConfig) -> RunConfig {
    RunConfig {
        protocol,
        stream: StreamConfig {
            camera_fps: 1.0,
            camera_buffer_size: buffer_size,
            clock: ClockMode::Virtual,
        },
        memory: MemoryConfig::default(),
        backend,
        trace: false,
    }
}

fn write_smoke(dir: &Path) -> Result<()> {
    let colors = ["red", "red", "green", "green", "blue", "blue", "gold", "gold", "gray", "gray"];
    let present = track(
        "smoke-present",
        "vid-scene",
        TaskType::Present,
        "scene",
        "What object is on the table right now?",
        colors
            .iter()
            .map(|c| format!("a {c} cube rests on the table"))
            .collect(),
    );
    let cumulative = track(
        "smoke-cumulative",
        "vid-tally",
        TaskType::Cumulative,
        "tally",
        "How many blocks has the robot stacked so far?",
        (0..10)
            .map(|i| format!("the robot has stacked {} blocks so far", i / 3))
            .collect(),
    );
    let future = track(
        "smoke-future",
        "vid-door",
        TaskType::Future,
        "forecast",
        "How soon will the door open?",
        (0..10)
            .map(|i| format!("the door opens in {} seconds", 10 - i))
            .collect(),
    );
    let tracks = vec![present, cumulative, future];
    let manifest = SuiteManifest {
        annotations: vec!["annotations.json".into()],
        sources: [
            ("vid-scene".to_string(), "synthetic:10".to_string()),
            ("vid-tally".to_string(), "synthetic:10".to_string()),
            ("vid-door".to_string(), "synthetic:10".to_string()),
        ]
        .into(),
        out_dir: "runs".into(),
        run: base_run(Protocol::Sync, 600, BackendConfig::Echo { latency: 0.0 }),
    };
    write_files(dir, &tracks, &manifest)
}

/// Scene descriptions for the trade-off fixture, one per five-second
/// phase. The word sets are pairwise disjoint, so a stale answer shares
/// no tokens with the current truth and the oracle judge rejects it.
const PHASE_SCENES: [&str; 12] = [
    "violet dawn",
    "amber sunrise",
    "bustling breakfast",
    "crowded commute",
    "blazing noon",
    "gentle drizzle",
    "rolling thunder",
    "double rainbow",
    "golden dusk",
    "quiet twilight",
    "warm supper",
    "silent midnight",
];

fn write_tradeoff(dir: &Path) -> Result<()> {
    let phases = track(
        "tradeoff-phases",
        "vid-phases",
        TaskType::Present,
        "phases",
        "Which phase is the scene in?",
        (0..60).map(|i| PHASE_SCENES[i / 5].to_string()).collect(),
    );
    let manifest = SuiteManifest {
        annotations: vec!["annotations.json".into()],
        sources: [("vid-phases".to_string(), "synthetic:60".to_string())].into(),
        out_dir: "runs".into(),
        run: base_run(Protocol::Async, 600, BackendConfig::Echo { latency: 2.0 }),
    };
    write_files(dir, &[phases], &manifest)
}

fn write_buffer_drop(dir: &Path) -> Result<()> {
    let watch = track(
        "buffer-drop-watch",
        "vid-watch",
        TaskType::Present,
        "watch",
        "What is on screen?",
        (0..10).map(|i| format!("frame {i} is on screen")).collect(),
    );
    let script = MockScript {
        rules: vec![MockRule {
            from: 0,
            to: 9,
            text: "watching the stream".to_string(),
            latency: None,
        }],
        latency: LatencyModel::Constant { c: 5.0 },
        pause_steps: vec![],
    };
    let script_path = dir.join("mock_script.json");
    let mut text = serde_json::to_string_pretty(&script).expect("script serializes");
    text.push('\n');
    std::fs::write(&script_path, text)
        .with_context(|| format!("writing {}", script_path.display()))?;

    let manifest = SuiteManifest {
        annotations: vec!["annotations.json".into()],
        sources: [("vid-watch".to_string(), "synthetic:10".to_string())].into(),
        out_dir: "runs".into(),
        run: base_run(
            Protocol::Async,
            2,
            BackendConfig::Mock {
                script: "mock_script.json".to_string(),
            },
        ),
    };
    write_files(dir, &[watch], &manifest)
}
