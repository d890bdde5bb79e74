//! Frame sources: a directory of frame files or a synthetic token stream.
//!
//! Descriptors are strings so manifests stay flat:
//!   `dir:<path>`                files in lexicographic order, one per frame
//!   `synthetic:<count>`         payloads "f0", "f1", ...
//!   `synthetic:<count>:<pat>`   payloads from `<pat>` with `{i}` replaced by
//!                               the frame index; without `{i}` every frame
//!                               carries the same payload (a static scene)

use std::path::{Path, PathBuf};
use std::sync::Arc;

use super::StreamError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SourceSpec {
    Dir(PathBuf),
    Synthetic { count: u32, pattern: String },
}

impl SourceSpec {
    pub fn parse(descriptor: &str) -> Result<SourceSpec, StreamError> {
        let bad = |message: &str| StreamError::BadDescriptor {
            descriptor: descriptor.to_string(),
            message: message.to_string(),
        };
        if let Some(path) = descriptor.strip_prefix("dir:") {
            if path.is_empty() {
                return Err(bad("dir: requires a path"));
            }
            return Ok(SourceSpec::Dir(PathBuf::from(path)));
        }
        if let Some(rest) = descriptor.strip_prefix("synthetic:") {
            let (count_str, pattern) = match rest.split_once(':') {
                Some((c, p)) => (c, p.to_string()),
                None => (rest, "f{i}".to_string()),
            };
            let count: u32 = count_str
                .parse()
                .map_err(|_| bad("synthetic: count must be a non-negative integer"))?;
            return Ok(SourceSpec::Synthetic { count, pattern });
        }
        Err(bad("expected dir:<path> or synthetic:<count>[:<pattern>]"))
    }

    /// Resolves a relative dir path against `base` (typically the manifest's
    /// directory). Synthetic specs are unaffected.
    pub fn resolved_against(&self, base: &Path) -> SourceSpec {
        match self {
            SourceSpec::Dir(p) if p.is_relative() => SourceSpec::Dir(base.join(p)),
            other => other.clone(),
        }
    }
}

impl std::fmt::Display for SourceSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SourceSpec::Dir(p) => write!(f, "dir:{}", p.display()),
            SourceSpec::Synthetic { count, pattern } if pattern == "f{i}" => {
                write!(f, "synthetic:{count}")
            }
            SourceSpec::Synthetic { count, pattern } => write!(f, "synthetic:{count}:{pattern}"),
        }
    }
}

/// An opened source: the full frame payload sequence, ready to stream.
#[derive(Debug, Clone)]
pub struct FrameSource {
    descriptor: String,
    payloads: Vec<Arc<Vec<u8>>>,
}

impl FrameSource {
    pub fn frame_count(&self) -> usize {
        self.payloads.len()
    }

    pub fn payload(&self, timestep: u32) -> Option<Arc<Vec<u8>>> {
        self.payloads.get(timestep as usize).cloned()
    }

    pub fn descriptor(&self) -> &str {
        &self.descriptor
    }

    /// A view of the first `count` frames (all of them if fewer exist).
    /// Payloads are shared, not copied.
    pub fn truncated(&self, count: usize) -> FrameSource {
        FrameSource {
            descriptor: self.descriptor.clone(),
            payloads: self.payloads[..count.min(self.payloads.len())].to_vec(),
        }
    }
}

/// Opens a source, loading all frame payloads. Empty sources are rejected:
/// a stream with nothing to show cannot drive a run.
pub fn open_frame_source(spec: &SourceSpec) -> Result<FrameSource, StreamError> {
    let descriptor = spec.to_string();
    let payloads = match spec {
        SourceSpec::Dir(dir) => {
            if !dir.is_dir() {
                return Err(StreamError::SourceNotFound(dir.display().to_string()));
            }
            let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
                .map_err(|err| StreamError::Io {
                    path: dir.display().to_string(),
                    err,
                })?
                .filter_map(|entry| entry.ok().map(|e| e.path()))
                .filter(|p| p.is_file())
                .collect();
            files.sort();
            let mut payloads = Vec::with_capacity(files.len());
            for f in files {
                let bytes = std::fs::read(&f).map_err(|err| StreamError::Io {
                    path: f.display().to_string(),
                    err,
                })?;
                payloads.push(Arc::new(bytes));
            }
            payloads
        }
        SourceSpec::Synthetic { count, pattern } => (0..*count)
            .map(|i| Arc::new(pattern.replace("{i}", &i.to_string()).into_bytes()))
            .collect(),
    };
    if payloads.is_empty() {
        return Err(StreamError::EmptySource(descriptor));
    }
    Ok(FrameSource {
        descriptor,
        payloads,
    })
}
