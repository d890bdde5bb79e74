//! Suite manifests: one JSON file pinning annotations, frame sources, and
//! the run configuration, so a run is reproducible from the manifest alone
//! (plus any command-line overrides, which are echoed into run metadata).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use streameval_core::{validate_annotation_file, AnnotationTrack, RunConfig, SourceSpec};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuiteManifest {
    /// Annotation files, resolved against the manifest's directory.
    pub annotations: Vec<PathBuf>,
    /// Frame source descriptor per video_id (dir:<path> or synthetic:...).
    pub sources: BTreeMap<String, String>,
    /// Default output directory for `run`, resolved against the manifest.
    pub out_dir: PathBuf,
    pub run: RunConfig,
}

/// A manifest plus everything loaded through it.
pub struct LoadedSuite {
    pub manifest: SuiteManifest,
    /// Hex SHA-256 of the manifest file bytes; written into run metadata.
    pub digest: String,
    /// Directory the manifest lives in; relative paths resolve against it.
    pub base_dir: PathBuf,
    pub tracks: Vec<AnnotationTrack>,
}

pub fn load_suite(path: &Path) -> Result<LoadedSuite> {
    let bytes = std::fs::read(path)
        .with_context(|| format!("reading manifest {}", path.display()))?;
    let digest = format!("{:x}", Sha256::digest(&bytes));
    let manifest: SuiteManifest = serde_json::from_slice(&bytes)
        .with_context(|| format!("parsing manifest {}", path.display()))?;
    let base_dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."))
        .to_path_buf();

    if manifest.annotations.is_empty() {
        bail!("manifest lists no annotation files");
    }
    let mut tracks = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for rel in &manifest.annotations {
        let file = resolve(&base_dir, rel);
        let doc = std::fs::read_to_string(&file)
            .with_context(|| format!("reading annotations {}", file.display()))?;
        let parsed = validate_annotation_file(&doc)
            .with_context(|| format!("validating annotations {}", file.display()))?;
        for track in parsed {
            if !seen.insert(track.task_id.clone()) {
                bail!("task id {} appears in more than one annotation file", track.task_id);
            }
            tracks.push(track);
        }
    }

    for track in &tracks {
        let descriptor = manifest.sources.get(&track.video_id).with_context(|| {
            format!(
                "task {} references video {} but the manifest has no source for it",
                track.task_id, track.video_id
            )
        })?;
        SourceSpec::parse(descriptor)
            .with_context(|| format!("source descriptor for video {}", track.video_id))?;
    }

    Ok(LoadedSuite {
        manifest,
        digest,
        base_dir,
        tracks,
    })
}

pub fn resolve(base: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    }
}
