use std::collections::HashMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use thiserror::Error;
use tokio::sync::{Mutex as AsyncMutex, OwnedMutexGuard};

use crate::pipeline::Session;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("session {0} not found")]
    NotFound(String),
    #[error("storage failure for {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("stored session {id} is unreadable: {source}")]
    Corrupt {
        id: String,
        #[source]
        source: serde_json::Error,
    },
}

/// One JSON document per session under a root directory.
///
/// Documents are written to a temporary file, synced and renamed over the
/// old one, so a crash never leaves a half-written session. Writers to one
/// session take its lock; readers never block.
#[derive(Debug)]
pub struct SessionStore {
    root: PathBuf,
    locks: Mutex<HashMap<String, Arc<AsyncMutex<()>>>>,
}

impl SessionStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        std::fs::create_dir_all(&root).map_err(|source| io(&root, source))?;
        Ok(Self { root, locks: Mutex::new(HashMap::new()) })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Ids are UUIDs; anything else cannot name a stored session.
    fn document(&self, id: &str) -> Result<PathBuf, StoreError> {
        uuid::Uuid::parse_str(id).map_err(|_| StoreError::NotFound(id.to_string()))?;
        Ok(self.root.join(format!("{id}.json")))
    }

    pub fn load(&self, id: &str) -> Result<Session, StoreError> {
        let path = self.document(id)?;
        let bytes = match std::fs::read(&path) {
            Ok(bytes) => bytes,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(StoreError::NotFound(id.to_string())),
            Err(source) => return Err(io(&path, source)),
        };
        serde_json::from_slice(&bytes).map_err(|source| StoreError::Corrupt { id: id.to_string(), source })
    }

    pub fn save(&self, session: &Session) -> Result<(), StoreError> {
        let path = self.document(session.id())?;
        let json = serde_json::to_vec(session).expect("sessions serialise");
        let mut tmp = tempfile::NamedTempFile::new_in(&self.root).map_err(|source| io(&self.root, source))?;
        tmp.write_all(&json).map_err(|source| io(tmp.path(), source))?;
        tmp.as_file().sync_all().map_err(|source| io(tmp.path(), source))?;
        tmp.persist(&path).map_err(|e| io(&path, e.error))?;
        Ok(())
    }

    /// Exclusive write access to one session; a second writer waits.
    pub async fn lock(&self, id: &str) -> OwnedMutexGuard<()> {
        let lock = {
            let mut locks = self.locks.lock().expect("lock table poisoned");
            locks.entry(id.to_string()).or_default().clone()
        };
        lock.lock_owned().await
    }
}

fn io(path: &Path, source: std::io::Error) -> StoreError {
    StoreError::Io { path: path.display().to_string(), source }
}
