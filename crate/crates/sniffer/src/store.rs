//! File-backed configuration store: one JSON document, rewritten atomically
//! (temporary file in the same directory, fsync, rename) on every change.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::{CaptureConfig, CaptureSettings, RunStatus};
use crate::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoreDocument {
    pub schema_version: u32,
    pub configs: Vec<CaptureConfig>,
}

impl Default for StoreDocument {
    fn default() -> Self {
        Self { schema_version: SCHEMA_VERSION, configs: Vec::new() }
    }
}

#[derive(Debug)]
pub struct ConfigStore {
    path: PathBuf,
    doc: StoreDocument,
}

impl ConfigStore {
    /// Opens the store, starting empty when the file does not exist yet.
    pub fn open(path: impl Into<PathBuf>) -> Result<Self> {
        let path = path.into();
        let doc = match std::fs::read(&path) {
            Ok(bytes) => {
                let doc: StoreDocument = serde_json::from_slice(&bytes)?;
                if doc.schema_version != SCHEMA_VERSION {
                    return Err(Error::InvalidConfig(format!(
                        "store schema version {} not supported",
                        doc.schema_version
                    )));
                }
                doc
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => StoreDocument::default(),
            Err(e) => return Err(Error::file(&path, e)),
        };
        Ok(Self { path, doc })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn document(&self) -> &StoreDocument {
        &self.doc
    }

    pub fn list(&self) -> &[CaptureConfig] {
        &self.doc.configs
    }

    pub fn get(&self, name: &str) -> Result<&CaptureConfig> {
        self.doc
            .configs
            .iter()
            .find(|c| c.name() == name)
            .ok_or_else(|| Error::NotFound(name.to_string()))
    }

    fn get_mut(&mut self, name: &str) -> Result<&mut CaptureConfig> {
        self.doc
            .configs
            .iter_mut()
            .find(|c| c.name() == name)
            .ok_or_else(|| Error::NotFound(name.to_string()))
    }

    /// Applies `change` to a copy of the document and persists it; the
    /// in-memory state only changes when the write succeeded.
    fn commit(&mut self, change: impl FnOnce(&mut StoreDocument) -> Result<()>) -> Result<()> {
        let mut next = self.doc.clone();
        change(&mut next)?;
        save_atomic(&self.path, &next)?;
        self.doc = next;
        Ok(())
    }

    pub fn create(&mut self, settings: CaptureSettings) -> Result<CaptureConfig> {
        settings.validate()?;
        if self.get(&settings.name).is_ok() {
            return Err(Error::Conflict(format!("configuration {:?} already exists", settings.name)));
        }
        let config = CaptureConfig { settings, status: RunStatus::Stopped };
        let stored = config.clone();
        self.commit(|doc| {
            doc.configs.push(stored);
            Ok(())
        })?;
        Ok(config)
    }

    /// Full replacement of a stopped configuration. Renaming is allowed when
    /// the new name is free.
    pub fn update(&mut self, name: &str, settings: CaptureSettings) -> Result<CaptureConfig> {
        settings.validate()?;
        self.require_stopped(name)?;
        if settings.name != name && self.get(&settings.name).is_ok() {
            return Err(Error::Conflict(format!("configuration {:?} already exists", settings.name)));
        }
        let config = CaptureConfig { settings, status: RunStatus::Stopped };
        let stored = config.clone();
        self.commit(|doc| {
            let slot = doc.configs.iter_mut().find(|c| c.name() == name).expect("checked above");
            *slot = stored;
            Ok(())
        })?;
        Ok(config)
    }

    pub fn delete(&mut self, name: &str) -> Result<()> {
        self.require_stopped(name)?;
        self.commit(|doc| {
            doc.configs.retain(|c| c.name() != name);
            Ok(())
        })
    }

    pub fn set_status(&mut self, name: &str, status: RunStatus) -> Result<()> {
        if self.get_mut(name)?.status == status {
            return Ok(());
        }
        self.commit(|doc| {
            let slot = doc.configs.iter_mut().find(|c| c.name() == name).expect("checked above");
            slot.status = status;
            Ok(())
        })
    }

    fn require_stopped(&self, name: &str) -> Result<()> {
        match self.get(name)?.status {
            RunStatus::Stopped => Ok(()),
            RunStatus::Running => Err(Error::Conflict(format!("configuration {name:?} is running"))),
        }
    }
}

pub fn save_atomic(path: &Path, doc: &StoreDocument) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::file(dir, e))?;
    serde_json::to_writer_pretty(&mut tmp, doc)?;
    tmp.write_all(b"\n")?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::file(path, e.error))?;
    Ok(())
}
