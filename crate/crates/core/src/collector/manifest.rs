//! The sample manifest: one JSON object per line.
//!
//! Line 1 is a header (`format`, `version`, `taxonomy_version`, `seed`).
//! Every following line is a [`SampleRecord`] with fields in this fixed order:
//! `sample_id`, `subclass_key`, `webly_label`, `query`, `uri`, `content_hash`,
//! `byte_size`, `status`, `split`, `clean_candidate`.

use std::collections::HashMap;
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::lineio;
use crate::taxonomy::SubclassKey;

pub const MANIFEST_FORMAT: &str = "adc-manifest";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FetchStatus {
    Pending,
    Fetched,
    Broken,
    Malformed,
    Duplicate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Eval,
    Test,
    None,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub sample_id: String,
    pub subclass_key: SubclassKey,
    /// Class implied by the query that retrieved the sample.
    pub webly_label: usize,
    pub query: String,
    pub uri: String,
    pub content_hash: Option<String>,
    pub byte_size: u64,
    pub status: FetchStatus,
    pub split: Split,
    #[serde(default)]
    pub clean_candidate: bool,
}

/// Stable id for a (query, uri) pair, so a re-crawl maps to the same ids.
pub fn sample_id(query: &str, uri: &str) -> String {
    let mut h = Sha256::new();
    h.update(query.as_bytes());
    h.update([0u8]);
    h.update(uri.as_bytes());
    hex::encode(&h.finalize()[..16])
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    taxonomy_version: String,
    seed: Option<u64>,
}

#[derive(Debug, thiserror::Error)]
pub enum ManifestError {
    #[error("manifest i/o: {0}")]
    Io(#[from] io::Error),
    #[error("manifest is empty (no header line)")]
    MissingHeader,
    #[error("not a manifest: format {0:?}")]
    WrongFormat(String),
    #[error("unsupported manifest version {0}")]
    Version(u32),
    #[error("manifest parse error: {0}")]
    Parse(#[from] lineio::LineError),
    #[error("duplicate sample_id {0}")]
    DuplicateId(String),
    #[error("record {0}: fetched without content hash")]
    MissingHash(String),
    #[error("record {id}: webly_label {label} differs from subclass class {class}")]
    LabelMismatch { id: String, label: usize, class: usize },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct StatusCounts {
    pub pending: usize,
    pub fetched: usize,
    pub broken: usize,
    pub malformed: usize,
    pub duplicate: usize,
}

impl StatusCounts {
    pub fn total(&self) -> usize {
        self.pending + self.fetched + self.broken + self.malformed + self.duplicate
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    pub taxonomy_version: String,
    pub seed: Option<u64>,
    records: Vec<SampleRecord>,
    index: HashMap<String, usize>,
}

impl Manifest {
    pub fn new(taxonomy_version: impl Into<String>, seed: Option<u64>) -> Self {
        Manifest { taxonomy_version: taxonomy_version.into(), seed, records: Vec::new(), index: HashMap::new() }
    }

    /// Same header, no records.
    pub fn empty_like(&self) -> Self {
        Manifest::new(self.taxonomy_version.clone(), self.seed)
    }

    pub fn push(&mut self, rec: SampleRecord) -> Result<(), ManifestError> {
        if self.index.contains_key(&rec.sample_id) {
            return Err(ManifestError::DuplicateId(rec.sample_id));
        }
        if rec.status == FetchStatus::Fetched && rec.content_hash.is_none() {
            return Err(ManifestError::MissingHash(rec.sample_id));
        }
        if rec.webly_label != rec.subclass_key.class_index {
            return Err(ManifestError::LabelMismatch {
                id: rec.sample_id,
                label: rec.webly_label,
                class: rec.subclass_key.class_index,
            });
        }
        self.index.insert(rec.sample_id.clone(), self.records.len());
        self.records.push(rec);
        Ok(())
    }

    pub fn records(&self) -> &[SampleRecord] {
        &self.records
    }

    /// Mutable access for status/split updates. Ids must not be changed.
    pub fn records_mut(&mut self) -> &mut [SampleRecord] {
        &mut self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn get(&self, id: &str) -> Option<&SampleRecord> {
        self.position(id).map(|i| &self.records[i])
    }

    pub fn get_mut(&mut self, id: &str) -> Option<&mut SampleRecord> {
        self.position(id).map(move |i| &mut self.records[i])
    }

    pub fn counts(&self) -> StatusCounts {
        let mut c = StatusCounts::default();
        for r in &self.records {
            match r.status {
                FetchStatus::Pending => c.pending += 1,
                FetchStatus::Fetched => c.fetched += 1,
                FetchStatus::Broken => c.broken += 1,
                FetchStatus::Malformed => c.malformed += 1,
                FetchStatus::Duplicate => c.duplicate += 1,
            }
        }
        c
    }

    /// Keeps only records for which `keep` returns true, preserving order.
    pub fn filtered(&self, mut keep: impl FnMut(&SampleRecord) -> bool) -> Manifest {
        let mut out = self.empty_like();
        for r in &self.records {
            if keep(r) {
                out.push(r.clone()).expect("subset of a valid manifest is valid");
            }
        }
        out
    }

    fn header_line(&self) -> String {
        lineio::to_line(&Header {
            format: MANIFEST_FORMAT.into(),
            version: MANIFEST_VERSION,
            taxonomy_version: self.taxonomy_version.clone(),
            seed: self.seed,
        })
        .expect("header serializes")
    }

    pub fn to_text(&self) -> String {
        let mut out = self.header_line();
        for r in &self.records {
            out.push_str(&lineio::to_line(r).expect("record serializes"));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, ManifestError> {
        let mut lines = lineio::numbered_lines(text);
        let (lineno, first) = lines.next().ok_or(ManifestError::MissingHeader)?;
        let header: Header = lineio::from_line(first, lineno)?;
        if header.format != MANIFEST_FORMAT {
            return Err(ManifestError::WrongFormat(header.format));
        }
        if header.version != MANIFEST_VERSION {
            return Err(ManifestError::Version(header.version));
        }
        let mut m = Manifest::new(header.taxonomy_version, header.seed);
        for (lineno, line) in lines {
            m.push(lineio::from_line(line, lineno)?)?;
        }
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self, ManifestError> {
        Self::parse(&fs::read_to_string(path)?)
    }

    /// Rewrites the whole file atomically (compaction).
    pub fn save(&self, path: &Path) -> Result<(), ManifestError> {
        lineio::write_atomic(path, self.to_text().as_bytes())?;
        Ok(())
    }
}

/// Append-only manifest writer used while a fetch run is in progress.
pub struct ManifestLog {
    file: fs::File,
}

impl ManifestLog {
    /// Opens `path` for appending; writes the header of `manifest` if the
    /// file does not exist yet or is empty.
    pub fn open(path: &Path, manifest: &Manifest) -> io::Result<Self> {
        let exists = path.metadata().map(|m| m.len() > 0).unwrap_or(false);
        if !exists {
            manifest.save(path).map_err(|e| match e {
                ManifestError::Io(e) => e,
                other => io::Error::other(other.to_string()),
            })?;
        }
        let file = fs::OpenOptions::new().append(true).open(path)?;
        Ok(ManifestLog { file })
    }

    pub fn append(&mut self, rec: &SampleRecord) -> io::Result<()> {
        let line = lineio::to_line(rec).map_err(io::Error::other)?;
        self.file.write_all(line.as_bytes())
    }

    pub fn flush(&mut self) -> io::Result<()> {
        self.file.sync_data()
    }
}
