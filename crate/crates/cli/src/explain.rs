//! Human-readable summaries of artifact files, with integrity checks.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};

use adc_core::collector::{Manifest, MANIFEST_FORMAT};
use adc_core::curator::{CurationReport, REPORT_FORMAT};
use adc_core::embedstore::{read_header, EmbeddingMatrix, ProbMatrix, EMBEDDING_MAGIC, PROB_MAGIC};
use adc_core::votes::{aggregate_votes, parse_votes, AggregationPolicy, BundleFile, Pattern, DEFAULT_MAX_VOTES};

use crate::pipeline::{RunReport, RUN_REPORT_FORMAT};

fn explain_embeddings(path: &Path) -> Result<String> {
    let header = read_header(path, EMBEDDING_MAGIC)?;
    let m = EmbeddingMatrix::read(path).context("integrity check failed")?;
    Ok(format!(
        "ADCE v{}, N={}, d={}\nrow ids: {} (sidecar ok)\nintegrity: ok",
        header.version,
        m.n_rows(),
        m.dim(),
        m.row_ids().len()
    ))
}

fn explain_probs(path: &Path) -> Result<String> {
    let header = read_header(path, PROB_MAGIC)?;
    let p = ProbMatrix::read(path).context("integrity check failed")?;
    Ok(format!(
        "ADCP v{}, N={}, K={}\nrow ids: {} (sidecar ok)\nintegrity: ok (rows are distributions)",
        header.version,
        p.n_rows(),
        p.n_classes(),
        p.row_ids().len()
    ))
}

fn explain_manifest(text: &str) -> Result<String> {
    let m = Manifest::parse(text).context("integrity check failed")?;
    let c = m.counts();
    let mut out = format!("manifest v1, taxonomy {:?}, seed {:?}\nrecords: {}\n", m.taxonomy_version, m.seed, m.len());
    for (name, n) in [
        ("pending", c.pending),
        ("fetched", c.fetched),
        ("broken", c.broken),
        ("malformed", c.malformed),
        ("duplicate", c.duplicate),
    ] {
        writeln!(out, "  {name}: {n}")?;
    }
    write!(out, "integrity: ok")?;
    Ok(out)
}

fn explain_report(text: &str) -> Result<String> {
    let r = CurationReport::parse(text).context("integrity check failed")?;
    let s = r.summary();
    let mut out = format!(
        "curation report, method {}, K={}, seed {:?}\nsamples: {}, flagged: {} ({:.2}%)\n",
        r.method,
        r.n_classes,
        r.seed,
        s.total,
        s.flagged,
        100.0 * s.flagged_fraction
    );
    for (c, f) in s.per_class.iter().enumerate() {
        match f {
            Some(f) => writeln!(out, "  class {c}: {:.2}% flagged", 100.0 * f)?,
            None => writeln!(out, "  class {c}: no samples")?,
        }
    }
    write!(out, "integrity: ok")?;
    Ok(out)
}

fn explain_run_report(text: &str) -> Result<String> {
    let r: RunReport = serde_json::from_str(text).context("integrity check failed")?;
    let mut out = format!("run report v{}, seed {}\n", r.version, r.seed);
    for s in &r.stages {
        write!(out, "  {}: {:?} in {:.2}s", s.stage, s.status, s.seconds)?;
        if let Some(e) = &s.error {
            write!(out, " ({e})")?;
        }
        out.push('\n');
    }
    Ok(out.trim_end().to_string())
}

fn explain_bundles(text: &str) -> Result<String> {
    let b = BundleFile::parse(text).context("integrity check failed")?;
    let samples: usize = b.groups.iter().map(|g| g.sample_ids.len()).sum();
    let bundles = b.groups.iter().map(|g| g.bundle + 1).max().unwrap_or(0);
    Ok(format!(
        "filter bundles, seed {}, group size {}, min select {}\ngroups: {}, bundles: {}, samples: {}\nintegrity: ok",
        b.seed,
        b.group_size,
        b.min_select,
        b.groups.len(),
        bundles,
        samples
    ))
}

fn explain_votes(text: &str) -> Result<String> {
    let records = parse_votes(text, DEFAULT_MAX_VOTES).context("not a recognized artifact format")?;
    let agg = aggregate_votes(&records, AggregationPolicy::Majority, DEFAULT_MAX_VOTES)?;
    let mut out = format!("votes, {} records\n", records.len());
    for p in Pattern::ALL {
        writeln!(out, "  {}: {}", p.name(), agg.table.count(p))?;
    }
    write!(out, "integrity: ok")?;
    Ok(out)
}

/// Detects the format of `path` and describes it. Errors name the integrity
/// check that failed, or report an unknown format.
pub fn explain(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    if bytes.starts_with(&EMBEDDING_MAGIC) {
        return explain_embeddings(path);
    }
    if bytes.starts_with(&PROB_MAGIC) {
        return explain_probs(path);
    }
    let Ok(text) = std::str::from_utf8(&bytes) else {
        bail!("unknown format: {} is neither a container nor UTF-8 text", path.display());
    };
    if text.starts_with("#adc-bundles") {
        return explain_bundles(text);
    }
    if text.trim_start().starts_with('{') {
        let first_line = text.lines().next().unwrap_or_default();
        let format = serde_json::from_str::<serde_json::Value>(first_line)
            .ok()
            .or_else(|| serde_json::from_str::<serde_json::Value>(text).ok())
            .and_then(|v| v.get("format").and_then(|f| f.as_str()).map(String::from));
        return match format.as_deref() {
            Some(f) if f == MANIFEST_FORMAT => explain_manifest(text),
            Some(f) if f == REPORT_FORMAT => explain_report(text),
            Some(f) if f == RUN_REPORT_FORMAT => explain_run_report(text),
            Some(f) => bail!("unknown format {f:?}"),
            None => bail!("unknown format: JSON without a format header"),
        };
    }
    explain_votes(text)
}
