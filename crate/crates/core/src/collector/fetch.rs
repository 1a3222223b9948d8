//! Bounded concurrent fetch pool.
//!
//! Workers pull tasks from a shared counter, query the backend and download
//! candidates. Results go through a channel to a single writer that commits
//! them in task order, so the manifest never depends on the worker count.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{mpsc, Arc, Mutex, OnceLock};
use std::thread;
use std::time::{Duration, Instant};

use rand::Rng;
use serde::Serialize;

use super::backend::{BackendError, SearchBackend};
use super::manifest::{sample_id, FetchStatus, Manifest, ManifestLog, SampleRecord, Split};
use super::store::ContentStore;
use super::{CollectError, FetchTask, DEFAULT_WORKERS};

#[derive(Debug, Clone)]
pub struct FetchConfig {
    pub workers: usize,
    /// Total attempts per call, including the first.
    pub attempts: u32,
    pub backoff_base: Duration,
    pub backoff_max: Duration,
}

impl Default for FetchConfig {
    fn default() -> Self {
        FetchConfig {
            workers: DEFAULT_WORKERS,
            attempts: 3,
            backoff_base: Duration::from_millis(200),
            backoff_max: Duration::from_secs(10),
        }
    }
}

impl FetchConfig {
    /// No sleeping between retries; for tests and local fixtures.
    pub fn immediate(workers: usize) -> Self {
        FetchConfig { workers, backoff_base: Duration::ZERO, backoff_max: Duration::ZERO, ..Self::default() }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct FetchReport {
    pub tasks: usize,
    pub search_failures: Vec<(String, String)>,
    pub candidates: usize,
    pub skipped_existing: usize,
    pub downloads: usize,
    pub retries: usize,
    pub fetched: usize,
    pub broken: usize,
    pub duplicate: usize,
    pub new_records: usize,
}

struct RateLimiter {
    interval: Duration,
    next: Mutex<Instant>,
}

impl RateLimiter {
    fn new(interval: Duration) -> Self {
        RateLimiter { interval, next: Mutex::new(Instant::now()) }
    }

    fn acquire(&self) {
        if self.interval.is_zero() {
            return;
        }
        let wait = {
            let mut next = self.next.lock().expect("rate limiter lock");
            let now = Instant::now();
            let slot = (*next).max(now);
            *next = slot + self.interval;
            slot - now
        };
        if !wait.is_zero() {
            thread::sleep(wait);
        }
    }
}

fn backoff(cfg: &FetchConfig, attempt: u32) -> Duration {
    if cfg.backoff_base.is_zero() {
        return Duration::ZERO;
    }
    let exp = cfg.backoff_base.saturating_mul(1u32 << attempt.min(16));
    let capped = exp.min(cfg.backoff_max);
    let jitter = rand::rng().random_range(0.5..1.0);
    capped.mul_f64(jitter)
}

/// Runs `call` up to `cfg.attempts` times while it fails transiently.
fn with_retries<T>(
    cfg: &FetchConfig,
    limiter: &RateLimiter,
    retries: &AtomicUsize,
    mut call: impl FnMut() -> Result<T, BackendError>,
) -> Result<T, BackendError> {
    let attempts = cfg.attempts.max(1);
    let mut attempt = 0;
    loop {
        limiter.acquire();
        match call() {
            Ok(v) => return Ok(v),
            Err(e) if e.is_transient() && attempt + 1 < attempts => {
                retries.fetch_add(1, Ordering::Relaxed);
                thread::sleep(backoff(cfg, attempt));
                attempt += 1;
            }
            Err(e) => return Err(e),
        }
    }
}

#[derive(Debug, Clone)]
enum Download {
    Stored { hash: String, size: u64 },
    Failed(String),
}

struct TaskOutcome {
    records: Vec<SampleRecord>,
    search_error: Option<String>,
    candidates: usize,
    skipped: usize,
}

/// One download per content URI, shared by every task that hits it.
type DownloadSlot = Arc<OnceLock<Result<Download, String>>>;

struct Shared<'a> {
    backend: &'a dyn SearchBackend,
    store: &'a ContentStore,
    cfg: &'a FetchConfig,
    limiter: RateLimiter,
    known_ids: HashSet<String>,
    downloads: Mutex<HashMap<String, DownloadSlot>>,
    download_count: AtomicUsize,
    retries: AtomicUsize,
    abort: AtomicBool,
}

impl Shared<'_> {
    /// Downloads `uri` at most once per run; concurrent callers wait for the first.
    fn download(&self, uri: &str) -> Result<Download, String> {
        let cell = {
            let mut map = self.downloads.lock().expect("download map lock");
            map.entry(uri.to_string()).or_default().clone()
        };
        cell.get_or_init(|| {
            self.download_count.fetch_add(1, Ordering::Relaxed);
            match with_retries(self.cfg, &self.limiter, &self.retries, || self.backend.fetch(uri)) {
                Ok(bytes) => {
                    let size = bytes.len() as u64;
                    self.store.put(&bytes).map(|hash| Download::Stored { hash, size }).map_err(|e| e.to_string())
                }
                Err(e) => Ok(Download::Failed(e.to_string())),
            }
        })
        .clone()
    }

    fn run_task(&self, task: &FetchTask) -> Result<TaskOutcome, String> {
        let mut out = TaskOutcome { records: Vec::new(), search_error: None, candidates: 0, skipped: 0 };
        let limit = task.limit.min(self.backend.info().max_results_per_query.max(1));
        let mut uris = match with_retries(self.cfg, &self.limiter, &self.retries, || {
            self.backend.search(&task.query, limit)
        }) {
            Ok(u) => u,
            Err(e) => {
                out.search_error = Some(e.to_string());
                return Ok(out);
            }
        };
        uris.truncate(task.limit);
        let mut seen_uris = HashSet::new();
        for uri in uris {
            if !seen_uris.insert(uri.clone()) {
                continue;
            }
            out.candidates += 1;
            let id = sample_id(&task.query, &uri);
            if self.known_ids.contains(&id) {
                out.skipped += 1;
                continue;
            }
            let (status, content_hash, byte_size) = match self.download(&uri)? {
                Download::Stored { hash, size } => (FetchStatus::Fetched, Some(hash), size),
                Download::Failed(reason) => {
                    log::debug!("broken {uri}: {reason}");
                    (FetchStatus::Broken, None, 0)
                }
            };
            out.records.push(SampleRecord {
                sample_id: id,
                subclass_key: task.subclass_key.clone(),
                webly_label: task.subclass_key.class_index,
                query: task.query.clone(),
                uri,
                content_hash,
                byte_size,
                status,
                split: Split::None,
                clean_candidate: false,
            });
        }
        Ok(out)
    }
}

/// Executes `tasks` against `backend` and appends new records to `manifest`
/// (and to `log`, if given). Already-known sample ids are skipped, so a rerun
/// over the same inputs downloads nothing.
///
/// Backend failures are recorded per task/record; only content-store and
/// manifest write failures abort the run.
pub fn run_fetch(
    tasks: &[FetchTask],
    backend: &dyn SearchBackend,
    cfg: &FetchConfig,
    manifest: &mut Manifest,
    store: &ContentStore,
    mut log: Option<&mut ManifestLog>,
) -> Result<FetchReport, CollectError> {
    if cfg.workers == 0 {
        return Err(CollectError::ZeroWorkers);
    }
    for t in tasks {
        if t.limit == 0 {
            return Err(CollectError::ZeroLimit);
        }
    }
    let shared = Shared {
        backend,
        store,
        cfg,
        limiter: RateLimiter::new(backend.info().min_interval),
        known_ids: manifest.records().iter().map(|r| r.sample_id.clone()).collect(),
        downloads: Mutex::new(HashMap::new()),
        download_count: AtomicUsize::new(0),
        retries: AtomicUsize::new(0),
        abort: AtomicBool::new(false),
    };
    let mut seen_hashes: HashSet<String> = manifest
        .records()
        .iter()
        .filter(|r| r.status == FetchStatus::Fetched)
        .filter_map(|r| r.content_hash.clone())
        .collect();

    let mut report = FetchReport { tasks: tasks.len(), ..Default::default() };
    let next_task = AtomicUsize::new(0);
    let workers = cfg.workers.min(tasks.len()).max(1);

    let result: Result<(), CollectError> = thread::scope(|scope| {
        let (tx, rx) = mpsc::channel::<(usize, Result<TaskOutcome, String>)>();
        for _ in 0..workers {
            let tx = tx.clone();
            let shared = &shared;
            let next_task = &next_task;
            scope.spawn(move || loop {
                if shared.abort.load(Ordering::Relaxed) {
                    break;
                }
                let i = next_task.fetch_add(1, Ordering::Relaxed);
                if i >= tasks.len() {
                    break;
                }
                let outcome = shared.run_task(&tasks[i]);
                if tx.send((i, outcome)).is_err() {
                    break;
                }
            });
        }
        drop(tx);

        // single writer: commit in task order
        let mut pending: BTreeMap<usize, TaskOutcome> = BTreeMap::new();
        let mut next_commit = 0usize;
        for (i, outcome) in rx {
            let outcome = match outcome {
                Ok(o) => o,
                Err(e) => {
                    shared.abort.store(true, Ordering::Relaxed);
                    return Err(CollectError::Store(std::io::Error::other(e)));
                }
            };
            pending.insert(i, outcome);
            while let Some(o) = pending.remove(&next_commit) {
                if let Some(err) = o.search_error {
                    report.search_failures.push((tasks[next_commit].query.clone(), err));
                }
                report.candidates += o.candidates;
                report.skipped_existing += o.skipped;
                for mut rec in o.records {
                    if rec.status == FetchStatus::Fetched {
                        let hash = rec.content_hash.clone().expect("fetched records carry a hash");
                        if !seen_hashes.insert(hash) {
                            rec.status = FetchStatus::Duplicate;
                        }
                    }
                    match rec.status {
                        FetchStatus::Fetched => report.fetched += 1,
                        FetchStatus::Broken => report.broken += 1,
                        FetchStatus::Duplicate => report.duplicate += 1,
                        _ => {}
                    }
                    if let Some(log) = log.as_deref_mut() {
                        if let Err(e) = log.append(&rec) {
                            shared.abort.store(true, Ordering::Relaxed);
                            return Err(CollectError::ManifestWrite(e));
                        }
                    }
                    manifest.push(rec)?;
                    report.new_records += 1;
                }
                next_commit += 1;
            }
        }
        Ok(())
    });
    result?;
    if let Some(log) = log {
        log.flush().map_err(CollectError::ManifestWrite)?;
    }
    report.downloads = shared.download_count.load(Ordering::Relaxed);
    report.retries = shared.retries.load(Ordering::Relaxed);
    Ok(report)
}
