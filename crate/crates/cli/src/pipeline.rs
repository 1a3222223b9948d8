//! The design, collect, curate and subset stages, run in order from one
//! project config.
//!
//! Every stage rewrites its outputs only when their bytes change, so a rerun
//! over finished work reports every stage as `unchanged`.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::json;

use adc_core::collector::{
    dedup_and_validate, plan_fetch, run_fetch, ContentStore, DedupReport, FetchConfig, FetchReport, HttpBackend,
    LocalCorpusBackend, Manifest, ManifestLog, MockBackend, SearchBackend,
};
use adc_core::curator::{merge_filters, CurationReport};
use adc_core::prompt::{HttpPromptClient, PromptClient, RecordingClient, ReplayClient};
use adc_core::seed;
use adc_core::subsetter::{build_clean_subset, build_longtail_subset, longtail_counts, split_dataset, SplitConfig};
use adc_core::taxonomy::{expand_attributes, generate_queries, AttributeSet, TaxonomySpec};

use crate::config::{ConfigError, ProjectConfig};
use crate::curation::{merge_mode, run_method, MethodParams};

pub const RUN_REPORT_FORMAT: &str = "adc-run-report";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StageStatus {
    Ok,
    Unchanged,
    Skipped,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub stage: String,
    pub status: StageStatus,
    pub seconds: f64,
    pub counts: serde_json::Value,
    pub outputs: Vec<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub format: String,
    pub version: u32,
    pub seed: u64,
    pub stages: Vec<StageReport>,
}

impl RunReport {
    pub fn stage(&self, name: &str) -> Option<&StageReport> {
        self.stages.iter().find(|s| s.stage == name)
    }

    /// True when no stage wrote anything.
    pub fn is_noop(&self) -> bool {
        self.stages.iter().all(|s| matches!(s.status, StageStatus::Unchanged | StageStatus::Skipped))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error("stage {stage} failed: {source:#}")]
    Stage { stage: String, source: anyhow::Error, report: Box<RunReport> },
}

/// Output locations under the configured output directory.
#[derive(Debug, Clone)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn spec(&self) -> PathBuf {
        self.root.join("taxonomy.toml")
    }
    pub fn manifest(&self) -> PathBuf {
        self.root.join("manifest.jsonl")
    }
    pub fn store(&self) -> PathBuf {
        self.root.join("store")
    }
    pub fn report(&self, method: &str) -> PathBuf {
        self.root.join("reports").join(format!("{method}.rep"))
    }
    pub fn clean_manifest(&self) -> PathBuf {
        self.root.join("clean_manifest.jsonl")
    }
    pub fn longtail_manifest(&self) -> PathBuf {
        self.root.join("longtail_manifest.jsonl")
    }
    pub fn split_manifest(&self) -> PathBuf {
        self.root.join("split_manifest.jsonl")
    }
    pub fn run_report(&self) -> PathBuf {
        self.root.join("run_report.json")
    }
}

/// Writes `bytes` to `path` unless the file already holds exactly them.
/// Returns whether the file changed.
pub fn write_if_changed(path: &Path, bytes: &[u8]) -> Result<bool> {
    if fs::read(path).map(|old| old == bytes).unwrap_or(false) {
        return Ok(false);
    }
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    adc_core::lineio::write_atomic(path, bytes).with_context(|| format!("writing {}", path.display()))?;
    Ok(true)
}

struct StageOutput {
    changed: bool,
    counts: serde_json::Value,
    outputs: Vec<PathBuf>,
}

struct State {
    spec: Option<TaxonomySpec>,
    manifest: Option<Manifest>,
    reports: Vec<CurationReport>,
}

pub fn make_backend(cfg: &ProjectConfig) -> Result<Box<dyn SearchBackend>> {
    Ok(match cfg.collect.backend.as_str() {
        "mock" => Box::new(MockBackend::new(seed::derive(cfg.seed, "collect.mock"), cfg.collect.mock_results)),
        "local" => Box::new(LocalCorpusBackend::new(cfg.collect.corpus.clone().context("collect.corpus is not set")?)),
        "http" => Box::new(HttpBackend::from_env()?),
        other => anyhow::bail!("unknown backend {other:?}"),
    })
}

fn prompt_client(cfg: &ProjectConfig) -> Result<Box<dyn PromptClient>> {
    if let Some(replay) = &cfg.design.replay {
        return Ok(Box::new(ReplayClient::load(replay)?));
    }
    let live = HttpPromptClient::from_env()?;
    Ok(match &cfg.design.record {
        Some(log) => Box::new(RecordingClient::new(live, log.clone())),
        None => Box::new(live),
    })
}

/// Replaces (or adds) the options of each requested attribute.
pub fn apply_expansions(spec: &mut TaxonomySpec, cfg: &ProjectConfig, client: &dyn PromptClient) -> Result<usize> {
    let mut total = 0;
    for req in &cfg.design.expand {
        let exp = expand_attributes(spec, &req.class, &req.attribute, (req.min, req.max), client)
            .with_context(|| format!("expanding {}/{}", req.class, req.attribute))?;
        let class_idx = spec.class_index(&req.class).expect("checked by expand_attributes");
        let class = &mut spec.classes[class_idx];
        total += exp.options.len();
        match class.attributes.iter_mut().find(|a| a.name == req.attribute) {
            Some(attr) => attr.options = exp.options,
            None => class.attributes.push(AttributeSet { name: req.attribute.clone(), options: exp.options }),
        }
    }
    spec.ensure_valid()?;
    Ok(total)
}

fn design_stage(cfg: &ProjectConfig, layout: &Layout, state: &mut State) -> Result<StageOutput> {
    let source = cfg.spec.as_deref().expect("validated config has a spec");
    let mut spec = TaxonomySpec::load_valid(source)?;
    let mut changed = false;
    let mut expanded = 0;
    let mut outputs = Vec::new();
    if !cfg.design.expand.is_empty() {
        let out = layout.spec();
        if out.exists() {
            log::info!("reusing expanded taxonomy {}", out.display());
            spec = TaxonomySpec::load_valid(&out)?;
        } else {
            let client = prompt_client(cfg)?;
            expanded = apply_expansions(&mut spec, cfg, client.as_ref())?;
            changed = write_if_changed(&out, spec.to_toml_string().as_bytes())?;
        }
        outputs.push(out);
    }
    let counts = json!({
        "classes": spec.classes.len(),
        "subclasses": spec.subclass_count(),
        "expanded_options": expanded,
    });
    state.spec = Some(spec);
    Ok(StageOutput { changed, counts, outputs })
}

/// Outcome of one collection pass over a taxonomy.
pub struct Collected {
    pub manifest: Manifest,
    pub queries: usize,
    pub fetch: FetchReport,
    pub dedup: DedupReport,
    pub changed: bool,
}

/// Fetches every query of `spec` into `<out_dir>/manifest.jsonl` and the
/// content store, resuming from an existing manifest, then dedups.
pub fn collect_into(cfg: &ProjectConfig, spec: &TaxonomySpec, layout: &Layout) -> Result<Collected> {
    let tasks = plan_fetch(&generate_queries(spec)?, cfg.collect.limit, true)?;
    let path = layout.manifest();
    fs::create_dir_all(&layout.root).with_context(|| format!("creating {}", layout.root.display()))?;
    let mut manifest = if path.exists() {
        Manifest::load(&path).with_context(|| format!("loading {}", path.display()))?
    } else {
        Manifest::new(spec.version.clone(), Some(cfg.seed))
    };
    let before = fs::read(&path).ok();
    let store = ContentStore::open(&layout.store()).context("opening content store")?;
    let backend = make_backend(cfg)?;
    let fetch_cfg = FetchConfig { workers: cfg.collect.workers, ..FetchConfig::default() };
    let fetch = {
        let mut log = ManifestLog::open(&path, &manifest).context("opening manifest log")?;
        run_fetch(&tasks, backend.as_ref(), &fetch_cfg, &mut manifest, &store, Some(&mut log))?
    };
    let dedup = dedup_and_validate(&mut manifest, &store);
    let text = manifest.to_text();
    let changed = before.as_deref() != Some(text.as_bytes());
    write_if_changed(&path, text.as_bytes())?;
    Ok(Collected { manifest, queries: tasks.len(), fetch, dedup, changed })
}

fn collect_stage(cfg: &ProjectConfig, layout: &Layout, state: &mut State) -> Result<StageOutput> {
    let spec = state.spec.as_ref().expect("design stage ran");
    let c = collect_into(cfg, spec, layout)?;
    let out = StageOutput {
        changed: c.changed,
        counts: json!({ "queries": c.queries, "fetch": c.fetch, "dedup": c.dedup, "manifest": c.manifest.counts() }),
        outputs: vec![layout.manifest()],
    };
    state.manifest = Some(c.manifest);
    Ok(out)
}

fn curate_stage(cfg: &ProjectConfig, layout: &Layout, state: &mut State) -> Result<StageOutput> {
    let manifest = state.manifest.as_ref().expect("collect stage ran");
    let classes = state.spec.as_ref().expect("design stage ran").classes.len();
    let params = MethodParams {
        simifeat_k: cfg.curate.simifeat_k,
        knn_k: cfg.curate.knn_k,
        conf_percent: cfg.curate.conf_percent,
        ..MethodParams::default()
    };
    let mut changed = false;
    let mut outputs = Vec::new();
    let mut counts = serde_json::Map::new();
    for method in &cfg.curate.methods {
        let report = run_method(
            method,
            manifest,
            classes,
            cfg.curate.embeddings.as_deref(),
            cfg.curate.probs.as_deref(),
            &params,
            cfg.seed,
        )
        .with_context(|| format!("method {method}"))?;
        let path = layout.report(method);
        changed |= write_if_changed(&path, report.to_text().as_bytes())?;
        counts.insert(method.clone(), json!(report.summary()));
        outputs.push(path);
        state.reports.push(report);
    }
    if state.reports.len() > 1 {
        let (merged, stats) = merge_filters(&state.reports, merge_mode(&cfg.curate.merge)?)?;
        let path = layout.report("merged");
        changed |= write_if_changed(&path, merged.to_text().as_bytes())?;
        counts.insert("merged".into(), json!(stats));
        outputs.push(path);
    }
    Ok(StageOutput { changed, counts: counts.into(), outputs })
}

fn subset_stage(cfg: &ProjectConfig, layout: &Layout, state: &mut State) -> Result<StageOutput> {
    let manifest = state.manifest.as_ref().expect("collect stage ran");
    let mut current = manifest.clone();
    let mut changed = false;
    let mut outputs = Vec::new();
    let mut counts = serde_json::Map::new();
    if cfg.subset.clean && !state.reports.is_empty() {
        let (clean, stats) = build_clean_subset(manifest, &state.reports, merge_mode(&cfg.curate.merge)?)?;
        let path = layout.clean_manifest();
        changed |= write_if_changed(&path, clean.to_text().as_bytes())?;
        counts.insert("clean".into(), json!(stats));
        outputs.push(path);
        current = clean;
    }
    if let Some(rho) = cfg.subset.longtail_rho {
        let mut per_class = std::collections::BTreeMap::<usize, usize>::new();
        for r in current.records().iter().filter(|r| r.status == adc_core::FetchStatus::Fetched) {
            *per_class.entry(r.webly_label).or_default() += 1;
        }
        let n_max = per_class.values().copied().max().unwrap_or(0);
        let dist = longtail_counts(n_max, per_class.len(), rho)?;
        let lt = build_longtail_subset(&current, &dist, seed::derive(cfg.seed, "subset.longtail"))?;
        let path = layout.longtail_manifest();
        changed |= write_if_changed(&path, lt.to_text().as_bytes())?;
        counts.insert("longtail".into(), json!({ "counts": dist.counts, "total": dist.total() }));
        outputs.push(path);
        current = lt;
    }
    if let Some(split) = &cfg.subset.split {
        let sc = SplitConfig {
            eval_size: split.eval,
            test_size: split.test,
            seed: seed::derive(cfg.seed, "subset.split"),
            stratify: split.stratify,
            tiny: split.tiny,
        };
        let out = split_dataset(&current, &sc)?;
        let path = layout.split_manifest();
        changed |= write_if_changed(&path, out.to_text().as_bytes())?;
        counts.insert("split".into(), json!({ "eval": split.eval, "test": split.test, "tiny": split.tiny }));
        outputs.push(path);
    }
    Ok(StageOutput { changed, counts: counts.into(), outputs })
}

type Stage = fn(&ProjectConfig, &Layout, &mut State) -> Result<StageOutput>;

/// Validates the config, then runs every stage in order. The run report is
/// written to `<out_dir>/run_report.json` whether or not a stage fails.
pub fn run_pipeline(cfg: &ProjectConfig) -> Result<RunReport, PipelineError> {
    cfg.validate()?;
    let layout = Layout { root: cfg.out_dir.clone() };
    let mut state = State { spec: None, manifest: None, reports: Vec::new() };
    let mut report = RunReport { format: RUN_REPORT_FORMAT.into(), version: 1, seed: cfg.seed, stages: Vec::new() };
    let stages: [(&str, Stage, bool); 4] = [
        ("design", design_stage, true),
        ("collect", collect_stage, true),
        ("curate", curate_stage, !cfg.curate.methods.is_empty()),
        ("subset", subset_stage, true),
    ];
    for (name, run, enabled) in stages {
        if !enabled {
            report.stages.push(StageReport {
                stage: name.into(),
                status: StageStatus::Skipped,
                seconds: 0.0,
                counts: json!({}),
                outputs: Vec::new(),
                error: None,
            });
            continue;
        }
        log::info!("stage {name}");
        let start = Instant::now();
        match run(cfg, &layout, &mut state) {
            Ok(out) => report.stages.push(StageReport {
                stage: name.into(),
                status: if out.changed { StageStatus::Ok } else { StageStatus::Unchanged },
                seconds: start.elapsed().as_secs_f64(),
                counts: out.counts,
                outputs: out.outputs,
                error: None,
            }),
            Err(e) => {
                report.stages.push(StageReport {
                    stage: name.into(),
                    status: StageStatus::Failed,
                    seconds: start.elapsed().as_secs_f64(),
                    counts: json!({}),
                    outputs: Vec::new(),
                    error: Some(format!("{e:#}")),
                });
                if let Err(w) = save_run_report(&layout, &report) {
                    log::error!("could not write run report: {w:#}");
                }
                return Err(PipelineError::Stage { stage: name.into(), source: e, report: Box::new(report) });
            }
        }
    }
    save_run_report(&layout, &report).map_err(|e| PipelineError::Stage {
        stage: "report".into(),
        source: e,
        report: Box::new(report.clone()),
    })?;
    Ok(report)
}

fn save_run_report(layout: &Layout, report: &RunReport) -> Result<()> {
    let mut text = serde_json::to_string_pretty(report)?;
    text.push('\n');
    write_if_changed(&layout.run_report(), text.as_bytes())?;
    Ok(())
}
