//! Report output: pretty JSON to stdout, or to `--out` when given.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

pub fn emit<T: Serialize>(report: &T, out: Option<&Path>) -> Result<()> {
    let json = serde_json::to_string_pretty(report)?;
    emit_text(&json, out)
}

pub fn emit_text(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        None => {
            println!("{text}");
            Ok(())
        }
        Some(path) => std::fs::write(path, format!("{text}\n"))
            .with_context(|| format!("writing {}", path.display())),
    }
}

/// Resolves a manifest-relative reference.
pub fn resolve_ref(manifest: &Path, reference: &str) -> PathBuf {
    let candidate = Path::new(reference);
    if candidate.is_absolute() {
        candidate.to_path_buf()
    } else {
        manifest.parent().unwrap_or(Path::new(".")).join(candidate)
    }
}
