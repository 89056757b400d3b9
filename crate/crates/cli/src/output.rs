//! Staged output directories and run manifests.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use fiberleak::fsio::{atomic_write_text, file_digest};
use fiberleak::{Error, Result};
use serde::Serialize;

pub const RUN_MANIFEST: &str = "run.json";

/// Collects outputs in a sibling directory that replaces `target` only once
/// the command has succeeded.
pub struct Staging {
    target: PathBuf,
    dir: PathBuf,
    done: bool,
}

impl Staging {
    /// Fails if `target` exists and is not empty, unless `force` is set.
    pub fn new(target: &Path, force: bool) -> Result<Self> {
        if let Ok(mut entries) = fs::read_dir(target) {
            if entries.next().is_some() && !force {
                return Err(Error::Config(format!(
                    "output directory {} is not empty; pass --force to replace it",
                    target.display()
                )));
            }
        } else if target.exists() {
            return Err(Error::Config(format!("{} exists and is not a directory", target.display())));
        }
        let name = target.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| "out".into());
        let parent = target.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        let dir = parent.join(format!(".{name}.staging-{}", std::process::id()));
        if dir.exists() {
            fs::remove_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        }
        fs::create_dir(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(Staging { target: target.to_path_buf(), dir, done: false })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn commit(mut self) -> Result<()> {
        if self.target.exists() {
            fs::remove_dir_all(&self.target).map_err(|e| Error::io(&self.target, e))?;
        }
        fs::rename(&self.dir, &self.target).map_err(|e| Error::io(&self.target, e))?;
        self.done = true;
        Ok(())
    }
}

impl Drop for Staging {
    fn drop(&mut self) {
        if !self.done {
            let _ = fs::remove_dir_all(&self.dir);
        }
    }
}

#[derive(Debug, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

/// Provenance of one command run. Timings vary between runs; every other
/// field is reproducible.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config_sha256: String,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub timings_s: BTreeMap<String, f64>,
}

pub struct Recorder {
    manifest: RunManifest,
    started: Instant,
    stage: Option<(String, Instant)>,
}

impl Recorder {
    pub fn new(command: &str, config_sha256: String) -> Self {
        Recorder {
            manifest: RunManifest {
                tool: "fiberleak",
                version: env!("CARGO_PKG_VERSION"),
                command: command.to_string(),
                config_sha256,
                inputs: Vec::new(),
                outputs: Vec::new(),
                timings_s: BTreeMap::new(),
            },
            started: Instant::now(),
            stage: None,
        }
    }

    pub fn stage(&mut self, name: &str) {
        self.end_stage();
        self.stage = Some((name.to_string(), Instant::now()));
    }

    fn end_stage(&mut self) {
        if let Some((name, t)) = self.stage.take() {
            self.manifest.timings_s.insert(name, t.elapsed().as_secs_f64());
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        self.manifest.inputs.push(FileDigest { path: path.display().to_string(), sha256: file_digest(path)? });
        Ok(())
    }

    /// Digests every file in the staging directory, writes the manifest
    /// and commits the directory.
    pub fn finish(mut self, staging: Staging) -> Result<()> {
        self.end_stage();
        self.manifest.timings_s.insert("total".into(), self.started.elapsed().as_secs_f64());
        let mut names: Vec<String> = fs::read_dir(&staging.dir)
            .map_err(|e| Error::io(&staging.dir, e))?
            .filter_map(|e| e.ok().map(|e| e.file_name().to_string_lossy().into_owned()))
            .collect();
        names.sort();
        for name in names {
            let sha256 = file_digest(&staging.path(&name))?;
            self.manifest.outputs.push(FileDigest { path: name, sha256 });
        }
        let text = serde_json::to_string_pretty(&self.manifest).expect("manifest serialises") + "\n";
        atomic_write_text(&staging.path(RUN_MANIFEST), &text)?;
        staging.commit()
    }
}
