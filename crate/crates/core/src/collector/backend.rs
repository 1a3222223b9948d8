use std::collections::HashSet;
use std::fs;
use std::path::PathBuf;
use std::sync::Mutex;
use std::time::Duration;

use serde_json::Value;
use sha2::{Digest, Sha256};

use super::sniff::synthetic_png;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BackendInfo {
    pub name: String,
    pub max_results_per_query: usize,
    /// Minimum spacing between calls, shared by all workers.
    pub min_interval: Duration,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BackendError {
    /// Worth retrying: timeouts, 5xx, rate limiting.
    #[error("transient: {0}")]
    Transient(String),
    /// The resource is gone or refused; retrying will not help.
    #[error("permanent: {0}")]
    Permanent(String),
}

impl BackendError {
    pub fn is_transient(&self) -> bool {
        matches!(self, BackendError::Transient(_))
    }
}

/// A search engine plus the means to download what it returns.
///
/// Implementations must be callable from many workers at once. `search`
/// returns at most `limit` candidate URIs, most relevant first.
pub trait SearchBackend: Send + Sync {
    fn info(&self) -> BackendInfo;
    fn search(&self, query: &str, limit: usize) -> Result<Vec<String>, BackendError>;
    fn fetch(&self, uri: &str) -> Result<Vec<u8>, BackendError>;
}

/// Lowercase, alphanumerics kept, every other run of characters becomes `-`.
pub fn query_slug(query: &str) -> String {
    let mut out = String::with_capacity(query.len());
    let mut dash = false;
    for ch in query.chars().flat_map(char::to_lowercase) {
        if ch.is_alphanumeric() {
            out.push(ch);
            dash = false;
        } else if !dash && !out.is_empty() {
            out.push('-');
            dash = true;
        }
    }
    while out.ends_with('-') {
        out.pop();
    }
    out
}

fn unit_hash(seed: u64, salt: &str, uri: &str) -> f64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(salt.as_bytes());
    h.update([0]);
    h.update(uri.as_bytes());
    let d = h.finalize();
    let v = u64::from_le_bytes(d[..8].try_into().unwrap());
    (v >> 11) as f64 / (1u64 << 53) as f64
}

/// Deterministic in-memory backend.
///
/// Query `q` yields `mock://<slug(q)>/<i>` for `i < results_per_query`.
/// Per URI, seeded hashes decide whether the link is broken, whether the
/// payload is truncated, and whether the first download attempt fails
/// transiently.
#[derive(Debug)]
pub struct MockBackend {
    pub seed: u64,
    pub results_per_query: usize,
    pub broken_rate: f64,
    pub truncated_rate: f64,
    pub transient_rate: f64,
    /// Ignores the requested limit, to exercise the caller's cutoff.
    pub overfill: bool,
    failed_once: Mutex<HashSet<String>>,
}

impl MockBackend {
    pub fn new(seed: u64, results_per_query: usize) -> Self {
        MockBackend {
            seed,
            results_per_query,
            broken_rate: 0.0,
            truncated_rate: 0.0,
            transient_rate: 0.0,
            overfill: false,
            failed_once: Mutex::new(HashSet::new()),
        }
    }

    pub fn with_broken_rate(mut self, rate: f64) -> Self {
        self.broken_rate = rate;
        self
    }

    pub fn with_truncated_rate(mut self, rate: f64) -> Self {
        self.truncated_rate = rate;
        self
    }

    pub fn with_transient_rate(mut self, rate: f64) -> Self {
        self.transient_rate = rate;
        self
    }

    pub fn overfilling(mut self) -> Self {
        self.overfill = true;
        self
    }

    pub fn is_broken(&self, uri: &str) -> bool {
        unit_hash(self.seed, "broken", uri) < self.broken_rate
    }

    pub fn is_truncated(&self, uri: &str) -> bool {
        unit_hash(self.seed, "truncated", uri) < self.truncated_rate
    }

    /// Payload served for `uri` when it is not broken.
    pub fn payload(&self, uri: &str) -> Vec<u8> {
        let mut salt = Sha256::new();
        salt.update(self.seed.to_le_bytes());
        salt.update(uri.as_bytes());
        let png = synthetic_png(&salt.finalize());
        if self.is_truncated(uri) {
            png[..png.len() / 2].to_vec()
        } else {
            png
        }
    }
}

impl SearchBackend for MockBackend {
    fn info(&self) -> BackendInfo {
        BackendInfo { name: "mock".into(), max_results_per_query: self.results_per_query, min_interval: Duration::ZERO }
    }

    fn search(&self, query: &str, limit: usize) -> Result<Vec<String>, BackendError> {
        let n = if self.overfill { self.results_per_query } else { self.results_per_query.min(limit) };
        let slug = query_slug(query);
        Ok((0..n).map(|i| format!("mock://{slug}/{i}")).collect())
    }

    fn fetch(&self, uri: &str) -> Result<Vec<u8>, BackendError> {
        if unit_hash(self.seed, "transient", uri) < self.transient_rate {
            let mut failed = self.failed_once.lock().expect("mock state lock");
            if failed.insert(uri.to_string()) {
                return Err(BackendError::Transient(format!("{uri}: simulated timeout")));
            }
        }
        if self.is_broken(uri) {
            return Err(BackendError::Permanent(format!("{uri}: 404")));
        }
        Ok(self.payload(uri))
    }
}

/// Serves `corpus/<query-slug>/*` from a directory, files in name order.
#[derive(Debug, Clone)]
pub struct LocalCorpusBackend {
    root: PathBuf,
}

impl LocalCorpusBackend {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        LocalCorpusBackend { root: root.into() }
    }

    fn resolve(&self, uri: &str) -> Result<PathBuf, BackendError> {
        let rel = uri
            .strip_prefix("corpus://")
            .ok_or_else(|| BackendError::Permanent(format!("not a corpus uri: {uri}")))?;
        if rel.split('/').any(|part| part == ".." || part.is_empty()) {
            return Err(BackendError::Permanent(format!("bad corpus path: {uri}")));
        }
        Ok(self.root.join(rel))
    }
}

impl SearchBackend for LocalCorpusBackend {
    fn info(&self) -> BackendInfo {
        BackendInfo { name: "local-corpus".into(), max_results_per_query: usize::MAX, min_interval: Duration::ZERO }
    }

    fn search(&self, query: &str, limit: usize) -> Result<Vec<String>, BackendError> {
        let slug = query_slug(query);
        let dir = self.root.join(&slug);
        let entries = match fs::read_dir(&dir) {
            Ok(e) => e,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(BackendError::Transient(format!("{}: {e}", dir.display()))),
        };
        let mut names: Vec<String> = entries
            .filter_map(|e| e.ok())
            .filter(|e| e.file_type().map(|t| t.is_file()).unwrap_or(false))
            .map(|e| e.file_name().to_string_lossy().into_owned())
            .collect();
        names.sort();
        names.truncate(limit);
        Ok(names.into_iter().map(|n| format!("corpus://{slug}/{n}")).collect())
    }

    fn fetch(&self, uri: &str) -> Result<Vec<u8>, BackendError> {
        let path = self.resolve(uri)?;
        fs::read(&path).map_err(|e| BackendError::Permanent(format!("{}: {e}", path.display())))
    }
}

/// JSON search API backend.
///
/// `ADC_SEARCH_ENDPOINT` is called as `GET <endpoint>?q=<query>&num=<limit>&key=<ADC_SEARCH_KEY>`.
/// Result links are read from `items[].link` (Google custom search shape)
/// or `value[].contentUrl` (Bing image search shape).
#[derive(Debug, Clone)]
pub struct HttpBackend {
    endpoint: String,
    key: String,
    max_results: usize,
    min_interval: Duration,
    max_body: u64,
}

impl HttpBackend {
    pub fn new(endpoint: impl Into<String>, key: impl Into<String>) -> Self {
        HttpBackend {
            endpoint: endpoint.into(),
            key: key.into(),
            max_results: 100,
            min_interval: Duration::from_millis(100),
            max_body: 32 << 20,
        }
    }

    pub fn from_env() -> Result<Self, BackendError> {
        let endpoint = std::env::var("ADC_SEARCH_ENDPOINT")
            .map_err(|_| BackendError::Permanent("ADC_SEARCH_ENDPOINT is not set".into()))?;
        let key = std::env::var("ADC_SEARCH_KEY").unwrap_or_default();
        Ok(Self::new(endpoint, key))
    }

    fn classify(err: ureq::Error) -> BackendError {
        match err {
            ureq::Error::StatusCode(code) if code == 429 || code >= 500 => {
                BackendError::Transient(format!("http {code}"))
            }
            ureq::Error::StatusCode(code) => BackendError::Permanent(format!("http {code}")),
            other => BackendError::Transient(other.to_string()),
        }
    }
}

pub(crate) fn links_from_response(body: &Value) -> Vec<String> {
    let from = |arr: &str, field: &str| -> Vec<String> {
        body.get(arr)
            .and_then(Value::as_array)
            .map(|items| {
                items.iter().filter_map(|it| it.get(field).and_then(Value::as_str).map(str::to_string)).collect()
            })
            .unwrap_or_default()
    };
    let google = from("items", "link");
    if !google.is_empty() {
        return google;
    }
    from("value", "contentUrl")
}

impl SearchBackend for HttpBackend {
    fn info(&self) -> BackendInfo {
        BackendInfo { name: "http".into(), max_results_per_query: self.max_results, min_interval: self.min_interval }
    }

    fn search(&self, query: &str, limit: usize) -> Result<Vec<String>, BackendError> {
        let mut resp = ureq::get(&self.endpoint)
            .query("q", query)
            .query("num", limit.to_string())
            .query("key", &self.key)
            .call()
            .map_err(Self::classify)?;
        let body: Value = resp.body_mut().read_json().map_err(|e| BackendError::Transient(e.to_string()))?;
        let mut links = links_from_response(&body);
        links.truncate(limit);
        Ok(links)
    }

    fn fetch(&self, uri: &str) -> Result<Vec<u8>, BackendError> {
        let mut resp = ureq::get(uri).call().map_err(Self::classify)?;
        resp.body_mut()
            .with_config()
            .limit(self.max_body)
            .read_to_vec()
            .map_err(|e| BackendError::Transient(e.to_string()))
    }
}
