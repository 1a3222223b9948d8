//! Sample collection: turns search queries into a deduplicated, validated
//! corpus on disk plus a line-delimited manifest.
//!
//! Flow: [`plan_fetch`] builds one [`FetchTask`] per query, [`run_fetch`]
//! queries a [`SearchBackend`] with a bounded worker pool and downloads each
//! candidate into a content-addressed [`ContentStore`], then
//! [`dedup_and_validate`] marks malformed payloads and repeated content.

mod backend;
mod fetch;
mod manifest;
mod sniff;
mod store;

pub use backend::{
    query_slug, BackendError, BackendInfo, HttpBackend, LocalCorpusBackend, MockBackend, SearchBackend,
};
pub use fetch::{run_fetch, FetchConfig, FetchReport};
pub use manifest::{
    sample_id, FetchStatus, Manifest, ManifestError, ManifestLog, SampleRecord, Split, StatusCounts, MANIFEST_FORMAT,
};
pub use sniff::{sniff, synthetic_png, ImageKind, Malformed};
pub use store::ContentStore;

use serde::Serialize;

use crate::taxonomy::SubclassKey;

/// Default per-query cutoff on retrieved candidates.
pub const DEFAULT_LIMIT: usize = 100;
/// Default fetch pool size.
pub const DEFAULT_WORKERS: usize = 30;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FetchTask {
    pub subclass_key: SubclassKey,
    pub query: String,
    pub limit: usize,
}

#[derive(Debug, thiserror::Error)]
pub enum CollectError {
    #[error("fetch limit must be at least 1")]
    ZeroLimit,
    #[error("no queries to plan")]
    NoQueries,
    #[error("workers must be at least 1")]
    ZeroWorkers,
    #[error("manifest write failed: {0}")]
    ManifestWrite(#[source] std::io::Error),
    #[error("content store: {0}")]
    Store(#[source] std::io::Error),
    #[error(transparent)]
    Manifest(#[from] ManifestError),
}

/// One task per query, in query order. With `require_nonempty` an empty
/// query list is an error instead of an empty plan.
pub fn plan_fetch(
    queries: &[(SubclassKey, String)],
    limit: usize,
    require_nonempty: bool,
) -> Result<Vec<FetchTask>, CollectError> {
    if limit == 0 {
        return Err(CollectError::ZeroLimit);
    }
    if queries.is_empty() && require_nonempty {
        return Err(CollectError::NoQueries);
    }
    Ok(queries
        .iter()
        .map(|(key, q)| FetchTask { subclass_key: key.clone(), query: q.clone(), limit })
        .collect())
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct DedupReport {
    pub checked: usize,
    pub malformed: usize,
    pub duplicate: usize,
    pub retained: usize,
    pub integrity_errors: Vec<(String, String)>,
}

/// Marks fetched records whose payload fails the format sniff as malformed,
/// and later records repeating an already-retained content hash as duplicate.
pub fn dedup_and_validate(manifest: &mut Manifest, store: &ContentStore) -> DedupReport {
    let mut report = DedupReport::default();
    let mut seen = std::collections::HashSet::new();
    for rec in manifest.records_mut() {
        if rec.status != FetchStatus::Fetched {
            continue;
        }
        report.checked += 1;
        let Some(hash) = rec.content_hash.clone() else {
            report.integrity_errors.push((rec.sample_id.clone(), "fetched record without content hash".into()));
            continue;
        };
        let bytes = match store.get(&hash) {
            Ok(b) => b,
            Err(e) => {
                report.integrity_errors.push((rec.sample_id.clone(), format!("missing content {hash}: {e}")));
                continue;
            }
        };
        if ContentStore::hash_bytes(&bytes) != hash {
            report.integrity_errors.push((rec.sample_id.clone(), format!("content {hash} does not match its hash")));
            continue;
        }
        if sniff(&bytes).is_err() {
            rec.status = FetchStatus::Malformed;
            report.malformed += 1;
        } else if !seen.insert(hash) {
            rec.status = FetchStatus::Duplicate;
            report.duplicate += 1;
        } else {
            report.retained += 1;
        }
    }
    report
}
