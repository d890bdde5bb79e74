//! `score`: grade response logs against annotations and write the report.
//! Scoring never re-runs models, so judges and weightings can be swapped
//! over the same logs.

use std::collections::BTreeSet;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use streameval_core::{
    load_response_log, render_report_json, render_report_table, score_task,
    validate_annotation_file, CachedJudge, ConsistencyDenominator, Judge, MetricsReport,
    OracleJudge, RemoteJudge, RemoteJudgeConfig, Weighting,
};

use crate::{ScoreArgs, EXIT_OK};

pub fn cmd_score(args: &ScoreArgs) -> Result<i32> {
    let denominator: ConsistencyDenominator = args.denominator.parse()?;
    let weighting: Weighting = args.weighting.parse()?;
    let mut judge = build_judge(&args.judge)?;

    let doc = std::fs::read_to_string(&args.annotations)
        .with_context(|| format!("reading annotations {}", args.annotations.display()))?;
    let mut tracks = validate_annotation_file(&doc)
        .with_context(|| format!("validating annotations {}", args.annotations.display()))?;
    if tracks.is_empty() {
        bail!("annotation file has no tracks to score");
    }
    tracks.sort_by(|a, b| a.task_id.cmp(&b.task_id));

    let mut missing = Vec::new();
    let mut pairs = Vec::new();
    for track in &tracks {
        let path = args.logs.join(format!("{}.responses.json", track.task_id));
        if !path.is_file() {
            missing.push(track.task_id.clone());
            continue;
        }
        let text = std::fs::read_to_string(&path)
            .with_context(|| format!("reading {}", path.display()))?;
        let log = load_response_log(&text)
            .with_context(|| format!("validating {}", path.display()))?;
        if log.task_id != track.task_id {
            bail!(
                "{} holds a log for task {}, expected {}",
                path.display(),
                log.task_id,
                track.task_id
            );
        }
        pairs.push((track, log));
    }
    if !missing.is_empty() {
        bail!("missing response logs for tasks: {}", missing.join(", "));
    }

    let mut warnings = orphan_log_warnings(&args.logs, &tracks)?;
    let mut scores = Vec::new();
    for (track, log) in &pairs {
        let score = score_task(track, log, judge.as_mut(), denominator, &mut warnings)
            .with_context(|| format!("scoring task {}", track.task_id))?;
        scores.push(score);
    }

    let judge_id = judge.id();
    let report = MetricsReport::build(scores, judge_id, denominator, weighting, warnings)?;
    let json = render_report_json(&report);
    let table = render_report_table(&report);

    let out_dir = args.out.clone().unwrap_or_else(|| args.logs.clone());
    std::fs::create_dir_all(&out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))?;
    let json_path = out_dir.join("report.json");
    let table_path = out_dir.join("report.md");
    std::fs::write(&json_path, &json)
        .with_context(|| format!("writing {}", json_path.display()))?;
    std::fs::write(&table_path, &table)
        .with_context(|| format!("writing {}", table_path.display()))?;

    print!("{table}");
    println!(
        "report written to {} and {}",
        json_path.display(),
        table_path.display()
    );
    Ok(EXIT_OK)
}

/// Judge descriptors: `oracle` or `remote:<config path>`. Every judge is
/// wrapped in the in-process cache so repeated (question, truth, response)
/// triples are decided once.
fn build_judge(descriptor: &str) -> Result<Box<dyn Judge>> {
    if descriptor == "oracle" {
        return Ok(Box::new(CachedJudge::new(Box::new(OracleJudge))));
    }
    if let Some(path) = descriptor.strip_prefix("remote:") {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading judge config {path}"))?;
        let config: RemoteJudgeConfig =
            serde_json::from_str(&text).with_context(|| format!("parsing judge config {path}"))?;
        let judge = RemoteJudge::new(config)?;
        return Ok(Box::new(CachedJudge::new(Box::new(judge))));
    }
    bail!("unknown judge descriptor {descriptor:?} (expected oracle or remote:<config path>)")
}

/// Response logs in the directory that match no annotated task are worth a
/// warning: they usually mean the wrong annotations file.
fn orphan_log_warnings(
    logs_dir: &PathBuf,
    tracks: &[streameval_core::AnnotationTrack],
) -> Result<Vec<String>> {
    let known: BTreeSet<&str> = tracks.iter().map(|t| t.task_id.as_str()).collect();
    let mut names = Vec::new();
    for entry in std::fs::read_dir(logs_dir)
        .with_context(|| format!("reading logs dir {}", logs_dir.display()))?
    {
        let name = entry?.file_name().to_string_lossy().into_owned();
        if let Some(stem) = name.strip_suffix(".responses.json") {
            if !known.contains(stem) {
                names.push(name);
            }
        }
    }
    names.sort();
    Ok(names
        .into_iter()
        .map(|n| format!("orphan log {n} matches no annotated task"))
        .collect())
}
