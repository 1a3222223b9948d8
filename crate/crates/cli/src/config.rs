//! Project configuration: a TOML file, optionally layered on a parent file
//! named by `inherit_from`.
//!
//! Tables merge key by key, child over parent. Relative paths are resolved
//! against the directory of the file that sets them.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid config {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("inherit_from cycle through {0}")]
    Cycle(PathBuf),
    #[error("{0}")]
    Invalid(String),
}

/// Keys holding paths, as `(table, key)`; an empty table means top level.
const PATH_KEYS: &[(&str, &str)] = &[
    ("", "spec"),
    ("", "out_dir"),
    ("design", "replay"),
    ("design", "record"),
    ("collect", "corpus"),
    ("curate", "embeddings"),
    ("curate", "probs"),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProjectConfig {
    /// Root seed; every stage derives its own seed from it.
    pub seed: u64,
    /// `error`, `warn`, `info`, `debug` or `trace`.
    pub log_level: String,
    pub spec: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub design: DesignConfig,
    pub collect: CollectConfig,
    pub curate: CurateConfig,
    pub subset: SubsetConfig,
}

impl Default for ProjectConfig {
    fn default() -> Self {
        ProjectConfig {
            seed: 0,
            log_level: "info".into(),
            spec: None,
            out_dir: PathBuf::from("out"),
            design: DesignConfig::default(),
            collect: CollectConfig::default(),
            curate: CurateConfig::default(),
            subset: SubsetConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpandRequest {
    pub class: String,
    pub attribute: String,
    pub min: usize,
    pub max: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DesignConfig {
    pub expand: Vec<ExpandRequest>,
    /// Replay prompt exchanges from this log instead of calling a live client.
    pub replay: Option<PathBuf>,
    /// Append live exchanges to this log.
    pub record: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CollectConfig {
    /// `mock`, `local` or `http`.
    pub backend: String,
    /// Corpus root for the `local` backend.
    pub corpus: Option<PathBuf>,
    pub limit: usize,
    pub workers: usize,
    /// Results per query served by the `mock` backend.
    pub mock_results: usize,
}

impl Default for CollectConfig {
    fn default() -> Self {
        CollectConfig {
            backend: "mock".into(),
            corpus: None,
            limit: adc_core::collector::DEFAULT_LIMIT,
            workers: adc_core::collector::DEFAULT_WORKERS,
            mock_results: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurateConfig {
    pub embeddings: Option<PathBuf>,
    pub probs: Option<PathBuf>,
    /// Any of `simifeat`, `knn`, `cl`, `cores`, `conf`.
    pub methods: Vec<String>,
    /// `union` or `intersection`.
    pub merge: String,
    pub simifeat_k: usize,
    pub knn_k: usize,
    pub conf_percent: f64,
}

impl Default for CurateConfig {
    fn default() -> Self {
        CurateConfig {
            embeddings: None,
            probs: None,
            methods: Vec::new(),
            merge: "union".into(),
            simifeat_k: 10,
            knn_k: 100,
            conf_percent: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SubsetConfig {
    pub clean: bool,
    pub longtail_rho: Option<f64>,
    pub split: Option<SplitSection>,
}

impl Default for SubsetConfig {
    fn default() -> Self {
        SubsetConfig { clean: true, longtail_rho: None, split: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSection {
    pub eval: usize,
    pub test: usize,
    pub tiny: Option<usize>,
    pub stratify: bool,
}

impl Default for SplitSection {
    fn default() -> Self {
        SplitSection { eval: 20_000, test: 20_000, tiny: None, stratify: true }
    }
}

fn read_table(path: &Path) -> Result<Table, ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
    let mut table: Table =
        toml::from_str(&text).map_err(|e| ConfigError::Parse { path: path.to_path_buf(), message: e.to_string() })?;
    let base = path.parent().unwrap_or(Path::new("."));
    rebase_paths(&mut table, base);
    Ok(table)
}

fn rebase_paths(table: &mut Table, base: &Path) {
    for (section, key) in PATH_KEYS {
        let target = if section.is_empty() {
            Some(&mut *table)
        } else {
            table.get_mut(*section).and_then(Value::as_table_mut)
        };
        if let Some(Value::String(s)) = target.and_then(|t| t.get_mut(*key)) {
            if Path::new(s.as_str()).is_relative() {
                *s = base.join(s.as_str()).to_string_lossy().into_owned();
            }
        }
    }
}

fn merge(parent: &mut Table, child: Table) {
    for (k, v) in child {
        match (parent.get_mut(&k), v) {
            (Some(Value::Table(p)), Value::Table(c)) => merge(p, c),
            (_, v) => {
                parent.insert(k, v);
            }
        }
    }
}

fn load_layered(path: &Path, seen: &mut HashSet<PathBuf>) -> Result<Table, ConfigError> {
    let canonical = path.canonicalize().map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
    if !seen.insert(canonical.clone()) {
        return Err(ConfigError::Cycle(canonical));
    }
    let mut table = read_table(path)?;
    match table.remove("inherit_from") {
        None => Ok(table),
        Some(Value::String(parent)) => {
            let parent_path = path.parent().unwrap_or(Path::new(".")).join(parent);
            let mut base = load_layered(&parent_path, seen)?;
            merge(&mut base, table);
            Ok(base)
        }
        Some(_) => Err(ConfigError::Parse { path: path.to_path_buf(), message: "inherit_from must be a string".into() }),
    }
}

impl ProjectConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let table = load_layered(path, &mut HashSet::new())?;
        let cfg: ProjectConfig = Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| ConfigError::Parse { path: path.to_path_buf(), message: e.to_string() })?;
        Ok(cfg)
    }

    /// Checks values and that every referenced input path exists.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let must_exist = |what: &str, p: &Option<PathBuf>| -> Result<(), ConfigError> {
            match p {
                Some(p) if !p.exists() => Err(ConfigError::Invalid(format!("{what} not found: {}", p.display()))),
                _ => Ok(()),
            }
        };
        match &self.spec {
            None => return Err(ConfigError::Invalid("no taxonomy spec configured (key `spec`)".into())),
            Some(_) => must_exist("taxonomy spec", &self.spec)?,
        }
        must_exist("prompt replay log", &self.design.replay)?;
        match self.collect.backend.as_str() {
            "mock" | "http" => {}
            "local" => {
                if self.collect.corpus.is_none() {
                    return Err(ConfigError::Invalid("the local backend needs `collect.corpus`".into()));
                }
                must_exist("corpus directory", &self.collect.corpus)?;
            }
            other => return Err(ConfigError::Invalid(format!("unknown backend {other:?} (mock, local, http)"))),
        }
        if self.collect.workers == 0 || self.collect.limit == 0 {
            return Err(ConfigError::Invalid("collect.workers and collect.limit must be at least 1".into()));
        }
        for m in &self.curate.methods {
            let needs = match m.as_str() {
                "simifeat" | "knn" => ("embeddings", &self.curate.embeddings),
                "cl" | "cores" | "conf" => ("probs", &self.curate.probs),
                other => return Err(ConfigError::Invalid(format!("unknown curation method {other:?}"))),
            };
            if needs.1.is_none() {
                return Err(ConfigError::Invalid(format!("method {m} needs `curate.{}`", needs.0)));
            }
            must_exist(needs.0, needs.1)?;
        }
        if !matches!(self.curate.merge.as_str(), "union" | "intersection") {
            return Err(ConfigError::Invalid(format!("unknown merge mode {:?}", self.curate.merge)));
        }
        Ok(())
    }
}
