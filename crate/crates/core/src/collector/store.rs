use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

/// Content-addressed payload store: `<root>/<hash[0..2]>/<hash>`.
#[derive(Debug, Clone)]
pub struct ContentStore {
    root: PathBuf,
}

impl ContentStore {
    pub fn open(root: &Path) -> io::Result<Self> {
        fs::create_dir_all(root)?;
        Ok(ContentStore { root: root.to_path_buf() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn hash_bytes(bytes: &[u8]) -> String {
        hex::encode(Sha256::digest(bytes))
    }

    pub fn path_for(&self, hash: &str) -> PathBuf {
        let prefix = hash.get(..2).unwrap_or("xx");
        self.root.join(prefix).join(hash)
    }

    /// Stores `bytes` and returns their hash; existing content is not rewritten.
    pub fn put(&self, bytes: &[u8]) -> io::Result<String> {
        let hash = Self::hash_bytes(bytes);
        let path = self.path_for(&hash);
        if !path.exists() {
            fs::create_dir_all(path.parent().expect("content path has a parent"))?;
            crate::lineio::write_atomic(&path, bytes)?;
        }
        Ok(hash)
    }

    pub fn get(&self, hash: &str) -> io::Result<Vec<u8>> {
        fs::read(self.path_for(hash))
    }

    pub fn contains(&self, hash: &str) -> bool {
        self.path_for(hash).exists()
    }
}
