//! `run`: execute every task in a manifest against one backend and write a
//! response log per task plus a machine-readable run summary.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde_json::json;
use streameval_core::{
    build_backend, open_frame_source, run_suite, AnnotationTrack, BackendConfig, FrameSource,
    Protocol, RunConfig, SourceSpec, TraceEvent,
};

use crate::manifest::{load_suite, resolve};
use crate::{RunArgs, EXIT_OK, EXIT_PARTIAL};

pub fn cmd_run(args: &RunArgs) -> Result<i32> {
    let suite = load_suite(&args.manifest)?;
    let mut config = suite.manifest.run.clone();
    let overrides = apply_overrides(&mut config, args)?;
    if args.verbose {
        config.trace = true;
    }
    config.validate()?;

    let out_dir = match &args.out {
        Some(p) => p.clone(),
        None => resolve(&suite.base_dir, &suite.manifest.out_dir),
    };
    prepare_out_dir(&out_dir, args.force)?;

    let mut sources: BTreeMap<String, FrameSource> = BTreeMap::new();
    for track in &suite.tracks {
        if !sources.contains_key(&track.video_id) {
            let descriptor = &suite.manifest.sources[&track.video_id];
            let spec = SourceSpec::parse(descriptor)?.resolved_against(&suite.base_dir);
            let source = open_frame_source(&spec)
                .with_context(|| format!("opening source for video {}", track.video_id))?;
            sources.insert(track.video_id.clone(), source);
        }
    }

    let mut backend = build_backend(&config.backend, &suite.base_dir, config.stream.clock)?;
    let pairs: Vec<(&AnnotationTrack, &FrameSource)> = suite
        .tracks
        .iter()
        .map(|t| (t, &sources[&t.video_id]))
        .collect();
    let mut outcomes = run_suite(&pairs, &config, backend.as_mut());

    // echo enough configuration into each log to reproduce the run
    for outcome in &mut outcomes {
        let meta = &mut outcome.run.log.run_metadata;
        meta.insert("manifest_sha256".into(), json!(suite.digest));
        meta.insert("cli_overrides".into(), json!(overrides));
    }

    let mut summary_tasks = BTreeMap::new();
    let mut failed = 0usize;
    for outcome in &outcomes {
        let log_path = out_dir.join(format!("{}.responses.json", outcome.task_id));
        std::fs::write(&log_path, outcome.run.log.to_json())
            .with_context(|| format!("writing {}", log_path.display()))?;
        if let Some(trace) = &outcome.run.trace {
            let trace_path = out_dir.join(format!("{}.trace.jsonl", outcome.task_id));
            std::fs::write(&trace_path, TraceEvent::to_jsonl(trace))
                .with_context(|| format!("writing {}", trace_path.display()))?;
        }

        let meta = &outcome.run.log.run_metadata;
        let mut entry = BTreeMap::from([
            ("ok".to_string(), json!(outcome.is_ok())),
            ("responses".to_string(), json!(outcome.run.log.responses.len())),
            ("frames_dropped".to_string(), meta["frames_dropped"].clone()),
            ("frames_residual".to_string(), meta["frames_residual"].clone()),
        ]);
        match &outcome.error {
            Some(err) => {
                failed += 1;
                entry.insert("error".to_string(), json!(err.to_string()));
                eprintln!("task {}: FAILED: {err}", outcome.task_id);
            }
            None => {
                println!(
                    "task {}: {} responses, {} dropped",
                    outcome.task_id,
                    outcome.run.log.responses.len(),
                    meta["frames_dropped"]
                );
            }
        }
        summary_tasks.insert(outcome.task_id.clone(), entry);
    }

    let summary = json!({
        "manifest_sha256": suite.digest,
        "cli_overrides": overrides,
        "backend": backend.id(),
        "backend_stats": backend.stats(),
        "tasks": summary_tasks,
        "total": outcomes.len(),
        "failed": failed,
    });
    let summary_path = out_dir.join("run_summary.json");
    let mut text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    text.push('\n');
    std::fs::write(&summary_path, text)
        .with_context(|| format!("writing {}", summary_path.display()))?;

    println!(
        "{} of {} tasks ok; logs in {}",
        outcomes.len() - failed,
        outcomes.len(),
        out_dir.display()
    );
    Ok(if failed > 0 { EXIT_PARTIAL } else { EXIT_OK })
}

/// Applies command-line overrides onto the manifest's run config, returning
/// the applied set for the run metadata echo.
fn apply_overrides(
    config: &mut RunConfig,
    args: &RunArgs,
) -> Result<BTreeMap<String, serde_json::Value>> {
    let mut applied = BTreeMap::new();
    if let Some(protocol) = &args.protocol {
        config.protocol = match protocol.to_ascii_lowercase().as_str() {
            "sync" => Protocol::Sync,
            "async" => Protocol::Async,
            other => bail!("unknown protocol {other:?} (expected sync or async)"),
        };
        applied.insert("protocol".to_string(), json!(config.protocol));
    }
    if let Some(policy) = &args.policy {
        config.memory.policy = policy.parse()?;
        applied.insert("policy".to_string(), json!(config.memory.policy));
    }
    if let Some(k) = args.context_size {
        config.memory.context_size = k;
        applied.insert("context_size".to_string(), json!(k));
    }
    if let Some(b) = args.camera_buffer_size {
        config.stream.camera_buffer_size = b;
        applied.insert("camera_buffer_size".to_string(), json!(b));
    }
    if let Some(fps) = args.camera_fps {
        config.stream.camera_fps = fps;
        applied.insert("camera_fps".to_string(), json!(fps));
    }
    if let Some(clock) = &args.clock {
        config.stream.clock = serde_json::from_value(json!(clock.to_ascii_lowercase()))
            .map_err(|_| anyhow::anyhow!("unknown clock {clock:?} (expected wall or virtual)"))?;
        applied.insert("clock".to_string(), json!(config.stream.clock));
    }
    if let Some(descriptor) = &args.backend {
        config.backend = parse_backend_descriptor(descriptor)?;
        applied.insert("backend".to_string(), json!(descriptor));
    }
    Ok(applied)
}

/// Shorthand backend descriptors for overrides: `echo`, `echo:<latency>`,
/// or `mock:<script path>`. Remote and speculative backends are structured
/// enough that they stay manifest-only.
fn parse_backend_descriptor(descriptor: &str) -> Result<BackendConfig> {
    if descriptor == "echo" {
        return Ok(BackendConfig::Echo { latency: 0.0 });
    }
    if let Some(rest) = descriptor.strip_prefix("echo:") {
        let latency: f64 = rest
            .parse()
            .with_context(|| format!("echo latency {rest:?}"))?;
        return Ok(BackendConfig::Echo { latency });
    }
    if let Some(path) = descriptor.strip_prefix("mock:") {
        if path.is_empty() {
            bail!("mock: requires a script path");
        }
        return Ok(BackendConfig::Mock {
            script: path.to_string(),
        });
    }
    bail!("unknown backend descriptor {descriptor:?} (expected echo[:latency] or mock:<path>)")
}

/// Creates `dir` if needed; refuses to reuse a non-empty directory without
/// --force so stale logs never mix with fresh ones.
pub(crate) fn prepare_out_dir(dir: &Path, force: bool) -> Result<()> {
    if dir.exists() {
        if !dir.is_dir() {
            bail!("output path {} exists and is not a directory", dir.display());
        }
        let occupied = std::fs::read_dir(dir)
            .with_context(|| format!("reading {}", dir.display()))?
            .next()
            .is_some();
        if occupied && !force {
            bail!(
                "output directory {} is not empty (pass --force to write anyway)",
                dir.display()
            );
        }
    } else {
        std::fs::create_dir_all(dir)
            .with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backend_descriptors_parse() {
        assert!(matches!(
            parse_backend_descriptor("echo").unwrap(),
            BackendConfig::Echo { latency } if latency == 0.0
        ));
        assert!(matches!(
            parse_backend_descriptor("echo:2.5").unwrap(),
            BackendConfig::Echo { latency } if latency == 2.5
        ));
        assert!(matches!(
            parse_backend_descriptor("mock:scripts/slow.json").unwrap(),
            BackendConfig::Mock { script } if script == "scripts/slow.json"
        ));
        assert!(parse_backend_descriptor("remote:nope").is_err());
        assert!(parse_backend_descriptor("echo:fast").is_err());
    }

    #[test]
    fn out_dir_refuses_nonempty_without_force() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("stale.json"), "{}").unwrap();
        assert!(prepare_out_dir(dir.path(), false).is_err());
        assert!(prepare_out_dir(dir.path(), true).is_ok());
        let fresh = dir.path().join("new");
        assert!(prepare_out_dir(&fresh, false).is_ok());
        assert!(fresh.is_dir());
    }
}
