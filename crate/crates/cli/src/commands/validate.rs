//! `validate`: schema-check annotation files and response logs without
//! running anything. A file is classified by shape: objects with a
//! top-level `tracks` array are annotations, objects with `responses` are
//! logs.

use std::path::Path;

use anyhow::Result;
use streameval_core::{load_response_log, validate_annotation_file};

use crate::{ValidateArgs, EXIT_CONFIG, EXIT_OK};

pub fn cmd_validate(args: &ValidateArgs) -> Result<i32> {
    let mut bad = 0usize;
    for path in &args.paths {
        match check_file(path) {
            Ok(description) => println!("ok: {} ({description})", path.display()),
            Err(message) => {
                bad += 1;
                eprintln!("invalid: {}: {message}", path.display());
            }
        }
    }
    Ok(if bad == 0 { EXIT_OK } else { EXIT_CONFIG })
}

fn check_file(path: &Path) -> Result<String, String> {
    let text = std::fs::read_to_string(path).map_err(|e| e.to_string())?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| format!("not valid JSON: {e}"))?;
    if value.get("tracks").is_some() {
        let tracks = validate_annotation_file(&text).map_err(|e| e.to_string())?;
        Ok(format!(
            "annotation file, {} track{}",
            tracks.len(),
            if tracks.len() == 1 { "" } else { "s" }
        ))
    } else if value.get("responses").is_some() {
        let log = load_response_log(&text).map_err(|e| e.to_string())?;
        Ok(format!(
            "response log for task {}, {} responses",
            log.task_id,
            log.responses.len()
        ))
    } else {
        Err("neither an annotation file (tracks) nor a response log (responses)".to_string())
    }
}
