use std::path::{Path, PathBuf};

use walkdir::WalkDir;

use super::naming::NamingConfig;
use super::record::{ClipRecord, DatasetManifest, DatasetRole};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkippedFile {
    pub path: PathBuf,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanOutcome {
    pub manifest: DatasetManifest,
    /// Audio files whose names did not parse; never silently dropped.
    pub skipped: Vec<SkippedFile>,
}

fn rel_string(rel: &Path) -> String {
    rel.components()
        .map(|c| c.as_os_str().to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join("/")
}

/// Walks `root` for audio files and maps each to a [`ClipRecord`].
///
/// The machine type is the directory above the split directory
/// (`<root>/<machine>/<split>/<file>`); with a single directory level it is
/// that directory, and files directly under `root` take the root's name.
pub fn scan_dataset(root: impl AsRef<Path>, naming: &NamingConfig, role: DatasetRole) -> Result<ScanOutcome> {
    let root = root.as_ref();
    if !root.is_dir() {
        return Err(Error::io(
            root,
            std::io::Error::new(std::io::ErrorKind::NotFound, "dataset root is not a directory"),
        ));
    }
    let root_name = root
        .canonicalize()
        .ok()
        .and_then(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
        .unwrap_or_default();
    let ext = naming.extension.to_ascii_lowercase();

    let mut records = Vec::new();
    let mut skipped = Vec::new();
    let mut seen_audio = false;
    for entry in WalkDir::new(root).sort_by_file_name() {
        let entry = entry.map_err(|e| {
            let p = e.path().map(Path::to_path_buf).unwrap_or_else(|| root.to_path_buf());
            Error::io(p, e.into())
        })?;
        if !entry.file_type().is_file() {
            continue;
        }
        let path = entry.path();
        let file_name = entry.file_name().to_string_lossy().into_owned();
        let is_audio = path
            .extension()
            .map(|e| e.to_string_lossy().to_ascii_lowercase() == ext)
            .unwrap_or(false);
        if !is_audio || file_name.starts_with('.') {
            continue;
        }
        seen_audio = true;
        let rel = path.strip_prefix(root).expect("walk stays under root");
        let dirs: Vec<String> = rel
            .parent()
            .map(|p| {
                p.components()
                    .map(|c| c.as_os_str().to_string_lossy().into_owned())
                    .collect()
            })
            .unwrap_or_default();
        let dir_split = dirs.last().and_then(|d| naming.split_tokens.get(d)).copied();
        let machine = match (dirs.len(), dir_split) {
            (0, _) => root_name.clone(),
            (1, Some(_)) => root_name.clone(),
            (n, Some(_)) => dirs[n - 2].clone(),
            (n, None) => dirs[n - 1].clone(),
        };
        match naming.parse(&file_name, dir_split) {
            Ok(parsed) => {
                let rec = ClipRecord {
                    path: rel_string(rel),
                    machine_type: machine,
                    section: parsed.section,
                    domain: parsed.domain,
                    split: parsed.split,
                    condition: parsed.condition,
                    attributes: parsed.attributes,
                };
                match rec.validate() {
                    Ok(()) => records.push(rec),
                    Err(e) => skipped.push(SkippedFile {
                        path: rel.to_path_buf(),
                        reason: e.to_string(),
                    }),
                }
            }
            Err(reason) => skipped.push(SkippedFile {
                path: rel.to_path_buf(),
                reason,
            }),
        }
    }
    if !seen_audio {
        return Err(Error::EmptyManifest(root.to_path_buf()));
    }
    Ok(ScanOutcome {
        manifest: DatasetManifest::new(role, records)?,
        skipped,
    })
}
