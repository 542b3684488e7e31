use std::fs;
use std::io::{ErrorKind, Write};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::AugmentError;

/// Raw provider responses on disk, one file per
/// `(provider_id, model, prompt_fingerprint)` key. Writes go through a
/// temporary file and a rename, so readers never observe partial content.
#[derive(Debug, Clone)]
pub struct ResponseCache {
    dir: PathBuf,
}

impl ResponseCache {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, AugmentError> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| AugmentError::CacheIo(format!("{}: {e}", dir.display())))?;
        Ok(Self { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn key(provider_id: &str, model: &str, prompt_fingerprint: &str) -> String {
        let mut h = Sha256::new();
        for part in [provider_id, model, prompt_fingerprint] {
            h.update(part.as_bytes());
            h.update([0u8]);
        }
        hex::encode(h.finalize())
    }

    pub fn path_for(&self, key: &str) -> PathBuf {
        self.dir.join(key)
    }

    pub fn get(&self, key: &str) -> Result<Option<String>, AugmentError> {
        let path = self.path_for(key);
        match fs::read(&path) {
            Ok(bytes) => String::from_utf8(bytes).map(Some).map_err(|_| AugmentError::CacheCorrupt {
                path: path.display().to_string(),
                reason: "entry is not valid UTF-8".into(),
            }),
            Err(e) if e.kind() == ErrorKind::NotFound => Ok(None),
            Err(e) => Err(AugmentError::CacheCorrupt {
                path: path.display().to_string(),
                reason: e.to_string(),
            }),
        }
    }

    pub fn put(&self, key: &str, response: &str) -> Result<(), AugmentError> {
        let io = |e: std::io::Error| AugmentError::CacheIo(e.to_string());
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir).map_err(io)?;
        tmp.write_all(response.as_bytes()).map_err(io)?;
        tmp.persist(self.path_for(key)).map_err(|e| io(e.error))?;
        Ok(())
    }
}
