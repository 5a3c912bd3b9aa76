//! Dataset directories: one window file per window plus `manifest.csv`
//! listing `file,adl,env,standing` (empty cells for missing labels).

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::labels::Labels;

use super::{parse_window, serialize_window, SensorWindow};

pub const MANIFEST_FILE: &str = "manifest.csv";
const MANIFEST_HEADER: &str = "file,adl,env,standing";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub file: String,
    pub labels: Labels,
}

fn cell<T: ToString>(v: Option<T>) -> String {
    v.map(|l| l.to_string()).unwrap_or_default()
}

/// Writes every window as `<window_id>.csv` and a manifest. Returns the
/// manifest entries in window order.
pub fn write_dataset(dir: &Path, windows: &[SensorWindow]) -> Result<Vec<ManifestEntry>> {
    fs::create_dir_all(dir)?;
    let mut manifest = String::from(MANIFEST_HEADER);
    manifest.push('\n');
    let mut entries = Vec::with_capacity(windows.len());
    for w in windows {
        if w.window_id.contains(['/', '\\', ',', '=']) {
            return Err(Error::Validation(format!("window id `{}` cannot be used as a file name", w.window_id)));
        }
        let file = format!("{}.csv", w.window_id);
        fs::write(dir.join(&file), serialize_window(w))?;
        let l = &w.labels;
        manifest.push_str(&format!("{file},{},{},{}\n", cell(l.adl), cell(l.env), cell(l.standing)));
        entries.push(ManifestEntry { file, labels: w.labels });
    }
    fs::write(dir.join(MANIFEST_FILE), manifest)?;
    Ok(entries)
}

fn parse_manifest(text: &str) -> Result<Vec<ManifestEntry>> {
    let mut entries = Vec::new();
    for (i, row) in text.lines().enumerate() {
        let line = i + 1;
        let row = row.trim();
        if row.is_empty() || row == MANIFEST_HEADER {
            continue;
        }
        let cols: Vec<&str> = row.split(',').map(str::trim).collect();
        if cols.len() != 4 {
            return Err(Error::Parse { line, msg: format!("manifest row needs 4 columns, found {}", cols.len()) });
        }
        let wrap = |e: Error| Error::Parse { line, msg: e.to_string() };
        let labels = Labels {
            adl: (!cols[1].is_empty()).then(|| cols[1].parse()).transpose().map_err(wrap)?,
            env: (!cols[2].is_empty()).then(|| cols[2].parse()).transpose().map_err(wrap)?,
            standing: (!cols[3].is_empty()).then(|| cols[3].parse()).transpose().map_err(wrap)?,
        };
        entries.push(ManifestEntry { file: cols[0].to_string(), labels });
    }
    Ok(entries)
}

/// Loads every window listed in the manifest. Labels in a window header
/// must agree with its manifest row.
pub fn load_dataset(dir: &Path) -> Result<Vec<SensorWindow>> {
    let manifest = fs::read_to_string(dir.join(MANIFEST_FILE))?;
    parse_manifest(&manifest)?
        .into_iter()
        .map(|entry| {
            let text = fs::read_to_string(dir.join(&entry.file))?;
            let mut window = parse_window(&text).map_err(|e| match e {
                Error::Parse { line, msg } => Error::Parse { line, msg: format!("{}: {msg}", entry.file) },
                Error::Validation(msg) => Error::Validation(format!("{}: {msg}", entry.file)),
                other => other,
            })?;
            let header = window.labels;
            let merged = Labels {
                adl: entry.labels.adl.or(header.adl),
                env: entry.labels.env.or(header.env),
                standing: entry.labels.standing.or(header.standing),
            };
            let conflict = [
                header.adl.is_some() && header.adl != merged.adl,
                header.env.is_some() && header.env != merged.env,
                header.standing.is_some() && header.standing != merged.standing,
            ];
            if conflict.iter().any(|&c| c) {
                return Err(Error::Validation(format!("{}: header labels disagree with the manifest", entry.file)));
            }
            window.labels = merged;
            Ok(window)
        })
        .collect()
}
