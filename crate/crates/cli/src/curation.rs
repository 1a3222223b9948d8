//! Runs a named detector over a manifest plus feature or probability files.

use std::path::Path;

use anyhow::{bail, Context, Result};

use adc_core::collector::{FetchStatus, Manifest};
use adc_core::curator::{
    confidence_percentile_filter, confident_learning_detect, cores_score_detect, estimate_transition,
    knn_vote_detect, simifeat_detect, CoresSign, CurationReport, MergeMode, TransitionConfig,
};
use adc_core::embedstore::{EmbeddingMatrix, ProbMatrix};
use adc_core::seed;

pub const METHODS: &[&str] = &["simifeat", "knn", "cl", "cores", "conf"];

#[derive(Debug, Clone)]
pub struct MethodParams {
    pub simifeat_k: usize,
    pub knn_k: usize,
    pub conf_percent: f64,
    pub cores_sign: CoresSign,
}

impl Default for MethodParams {
    fn default() -> Self {
        MethodParams { simifeat_k: 10, knn_k: 100, conf_percent: 10.0, cores_sign: CoresSign::default() }
    }
}

pub fn merge_mode(name: &str) -> Result<MergeMode> {
    match name {
        "union" => Ok(MergeMode::Union),
        "intersection" => Ok(MergeMode::Intersection),
        other => bail!("unknown merge mode {other:?} (union, intersection)"),
    }
}

/// Rows of `ids` that are fetched samples in `manifest`, with their labels.
/// Ids missing from the manifest are an error; rows of records in any other
/// state are skipped.
pub fn align_rows(manifest: &Manifest, ids: &[String]) -> Result<(Vec<usize>, Vec<usize>)> {
    let mut rows = Vec::with_capacity(ids.len());
    let mut labels = Vec::with_capacity(ids.len());
    let mut skipped = 0;
    for (i, id) in ids.iter().enumerate() {
        let rec = manifest.get(id).with_context(|| format!("row {i}: sample {id:?} is not in the manifest"))?;
        if rec.status == FetchStatus::Fetched {
            rows.push(i);
            labels.push(rec.webly_label);
        } else {
            skipped += 1;
        }
    }
    if skipped > 0 {
        log::warn!("skipped {skipped} rows whose samples are not in fetched state");
    }
    Ok((rows, labels))
}

/// Number of classes implied by the manifest labels.
pub fn manifest_classes(manifest: &Manifest) -> usize {
    manifest.records().iter().map(|r| r.webly_label + 1).max().unwrap_or(0)
}

fn load_embeddings(manifest: &Manifest, path: Option<&Path>) -> Result<(EmbeddingMatrix, Vec<usize>)> {
    let path = path.context("this method needs an embeddings file")?;
    let m = EmbeddingMatrix::read(path).with_context(|| format!("reading {}", path.display()))?;
    let (rows, labels) = align_rows(manifest, m.row_ids())?;
    let m = if rows.len() == m.n_rows() { m } else { m.select(&rows) };
    Ok((m, labels))
}

fn load_probs(manifest: &Manifest, path: Option<&Path>) -> Result<(ProbMatrix, Vec<usize>)> {
    let path = path.context("this method needs a probability file")?;
    let p = ProbMatrix::read(path).with_context(|| format!("reading {}", path.display()))?;
    let (rows, labels) = align_rows(manifest, p.row_ids())?;
    let p = if rows.len() == p.n_rows() { p } else { p.select(&rows) };
    Ok((p, labels))
}

#[allow(clippy::too_many_arguments)]
pub fn run_method(
    method: &str,
    manifest: &Manifest,
    classes: usize,
    embeddings: Option<&Path>,
    probs: Option<&Path>,
    params: &MethodParams,
    root_seed: u64,
) -> Result<CurationReport> {
    let mut report = match method {
        "simifeat" => {
            let (m, labels) = load_embeddings(manifest, embeddings)?;
            let cfg = TransitionConfig { seed: seed::derive(root_seed, "curate.transition"), ..TransitionConfig::default() };
            let t = estimate_transition(&m, &labels, classes, &cfg)?;
            if !t.converged {
                log::warn!("transition estimate stopped after {} iterations without converging", t.iterations);
            }
            simifeat_detect(&m, &labels, &t, params.simifeat_k)?
        }
        "knn" => {
            let (m, labels) = load_embeddings(manifest, embeddings)?;
            knn_vote_detect(&m, &labels, params.knn_k.min(m.n_rows().saturating_sub(1)).max(1))?
        }
        "cl" => {
            let (p, labels) = load_probs(manifest, probs)?;
            confident_learning_detect(&p, &labels)?
        }
        "cores" => {
            let (p, labels) = load_probs(manifest, probs)?;
            cores_score_detect(&p, &labels, params.cores_sign)?
        }
        "conf" => {
            let (p, labels) = load_probs(manifest, probs)?;
            confidence_percentile_filter(&p, &labels, params.conf_percent)?
        }
        other => bail!("unknown curation method {other:?} (one of {})", METHODS.join(", ")),
    };
    report.seed = Some(root_seed);
    Ok(report)
}
