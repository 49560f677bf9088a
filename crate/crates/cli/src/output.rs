//! Output directories that appear all at once, with a digest manifest.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use greenbtc_core::crypto::hash;
use serde::Serialize;
use serde_json::{json, Value};

pub const SUMMARY: &str = "summary.json";

#[derive(Debug, Serialize)]
struct FileEntry {
    name: String,
    sha256: String,
    bytes: u64,
}

/// Files are written to a hidden sibling directory and renamed into place
/// by [`OutputDir::commit`]; a failure before then leaves nothing behind.
pub struct OutputDir {
    target: PathBuf,
    staging: PathBuf,
    files: Vec<FileEntry>,
    committed: bool,
}

impl OutputDir {
    pub fn create(target: &Path) -> Result<Self> {
        if target.exists() {
            let ours = target.join(SUMMARY).is_file();
            let empty = target.is_dir() && fs::read_dir(target)?.next().is_none();
            if !ours && !empty {
                bail!(
                    "output path {} exists and is not a previous output directory",
                    target.display()
                );
            }
        }
        let name = target
            .file_name()
            .with_context(|| format!("output path {} has no final component", target.display()))?
            .to_string_lossy()
            .into_owned();
        let parent = target
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .unwrap_or(Path::new("."));
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
        let staging = parent.join(format!(".{name}.partial"));
        if staging.exists() {
            fs::remove_dir_all(&staging)?;
        }
        fs::create_dir(&staging).with_context(|| format!("creating {}", staging.display()))?;
        Ok(OutputDir {
            target: target.to_path_buf(),
            staging,
            files: Vec::new(),
            committed: false,
        })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        fs::write(self.staging.join(name), bytes).with_context(|| format!("writing {name}"))?;
        self.files.push(FileEntry {
            name: name.to_string(),
            sha256: hash(bytes).to_hex(),
            bytes: bytes.len() as u64,
        });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    /// Writes `summary.json` (the given object plus the file manifest) and
    /// moves the directory into place.
    pub fn commit(mut self, mut summary: Value) -> Result<PathBuf> {
        let files = serde_json::to_value(&self.files)?;
        match summary.as_object_mut() {
            Some(obj) => {
                obj.insert("files".into(), files);
            }
            None => summary = json!({ "result": summary, "files": files }),
        }
        let mut text = serde_json::to_string_pretty(&summary)?;
        text.push('\n');
        fs::write(self.staging.join(SUMMARY), text)?;
        if self.target.exists() {
            fs::remove_dir_all(&self.target).with_context(|| format!("replacing {}", self.target.display()))?;
        }
        fs::rename(&self.staging, &self.target)
            .with_context(|| format!("moving output into {}", self.target.display()))?;
        self.committed = true;
        Ok(self.target.clone())
    }
}

impl Drop for OutputDir {
    fn drop(&mut self) {
        if !self.committed {
            let _ = fs::remove_dir_all(&self.staging);
        }
    }
}

/// CSV text from a header and rows.
pub fn csv_bytes<I, R>(header: &[&str], rows: I) -> Result<Vec<u8>>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator,
    R::Item: AsRef<[u8]>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    Ok(w.into_inner().map_err(|e| e.into_error())?)
}
