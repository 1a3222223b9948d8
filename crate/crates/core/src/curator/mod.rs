//! Label-noise curation: transition estimation, per-sample detectors,
//! neighbor relabeling and filter merging.
//!
//! Every detector returns a [`CurationReport`] row-aligned with its input.
//! Reports are stored as line-delimited JSON: a header line followed by one
//! record per sample with fields `sample_id`, `label`, `method`, `score`,
//! `flag`, `suggested_label`.

mod detect;
pub mod synthetic;
mod transition;

pub use detect::{
    confidence_percentile_filter, confident_learning_detect, cores_score_detect, knn_relabel, knn_vote_detect,
    percentile_count, simifeat_detect, CoresSign,
};
pub use transition::{
    estimate_transition, fit_consensus, project_simplex, Consensus, PriorInit, TransitionConfig, TransitionEstimate,
    TupleSampling,
};

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::embedstore::EmbedError;
use crate::lineio;

pub const REPORT_FORMAT: &str = "adc-report";
pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CurateError {
    #[error("class {0} has no samples")]
    MissingClass(usize),
    #[error("sample {index} has label {label}, but there are only {classes} classes")]
    LabelOutOfRange { index: usize, label: usize, classes: usize },
    #[error("need at least 2 classes, got {0}")]
    TooFewClasses(usize),
    #[error("need at least {min} rows, got {rows}")]
    TooFewSamples { rows: usize, min: usize },
    #[error("{what}: expected {expected} entries, found {found}")]
    LengthMismatch { what: &'static str, expected: usize, found: usize },
    #[error("invalid transition estimate: {0}")]
    InvalidEstimate(String),
    #[error("percentage must lie strictly between 0 and 100, got {0}")]
    Percent(f64),
    #[error("reports are not aligned: row {row} is {left:?} in one and {right:?} in another")]
    Misaligned { row: usize, left: String, right: String },
    #[error("no reports to merge")]
    NoReports,
    #[error("report file: {0}")]
    Format(String),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Parse(#[from] lineio::LineError),
}

/// Outcome for one sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleFlag {
    pub sample_id: String,
    /// Noisy label the detector saw.
    pub label: usize,
    pub score: f64,
    pub flag: bool,
    pub suggested_label: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurationReport {
    pub method: String,
    pub n_classes: usize,
    pub seed: Option<u64>,
    pub entries: Vec<SampleFlag>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub total: usize,
    pub flagged: usize,
    pub flagged_fraction: f64,
    /// Flagged fraction among samples carrying each label; `None` when the
    /// class has no samples.
    pub per_class: Vec<Option<f64>>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    method: String,
    n_classes: usize,
    seed: Option<u64>,
    summary: ReportSummary,
}

#[derive(Serialize, Deserialize)]
struct Line {
    sample_id: String,
    label: usize,
    method: String,
    score: f64,
    flag: bool,
    suggested_label: Option<usize>,
}

impl CurationReport {
    pub fn new(method: impl Into<String>, n_classes: usize, entries: Vec<SampleFlag>) -> Self {
        CurationReport { method: method.into(), n_classes, seed: None, entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn flags(&self) -> Vec<bool> {
        self.entries.iter().map(|e| e.flag).collect()
    }

    pub fn flagged_count(&self) -> usize {
        self.entries.iter().filter(|e| e.flag).count()
    }

    pub fn flagged_indices(&self) -> Vec<usize> {
        self.entries.iter().enumerate().filter(|(_, e)| e.flag).map(|(i, _)| i).collect()
    }

    /// Flagged samples left without a suggestion after relabeling.
    pub fn unresolved(&self) -> usize {
        self.entries.iter().filter(|e| e.flag && e.suggested_label.is_none()).count()
    }

    pub fn summary(&self) -> ReportSummary {
        let mut members = vec![0usize; self.n_classes];
        let mut flagged = vec![0usize; self.n_classes];
        for e in &self.entries {
            if e.label < self.n_classes {
                members[e.label] += 1;
                flagged[e.label] += e.flag as usize;
            }
        }
        let total = self.entries.len();
        let flagged_total = self.flagged_count();
        ReportSummary {
            total,
            flagged: flagged_total,
            flagged_fraction: if total == 0 { 0.0 } else { flagged_total as f64 / total as f64 },
            per_class: members.iter().zip(&flagged).map(|(&m, &f)| (m > 0).then(|| f as f64 / m as f64)).collect(),
        }
    }

    pub fn to_text(&self) -> String {
        let header = Header {
            format: REPORT_FORMAT.into(),
            version: REPORT_VERSION,
            method: self.method.clone(),
            n_classes: self.n_classes,
            seed: self.seed,
            summary: self.summary(),
        };
        let mut out = lineio::to_line(&header).expect("header serializes");
        for e in &self.entries {
            let line = Line {
                sample_id: e.sample_id.clone(),
                label: e.label,
                method: self.method.clone(),
                score: e.score,
                flag: e.flag,
                suggested_label: e.suggested_label,
            };
            out.push_str(&lineio::to_line(&line).expect("finite scores serialize"));
        }
        out
    }

    /// Parses a report file. The header summary is recomputed, not trusted.
    pub fn parse(text: &str) -> Result<Self, CurateError> {
        let mut lines = lineio::numbered_lines(text);
        let (lineno, first) = lines.next().ok_or_else(|| CurateError::Format("missing header".into()))?;
        let header: Header = lineio::from_line(first, lineno)?;
        if header.format != REPORT_FORMAT {
            return Err(CurateError::Format(format!("expected format {REPORT_FORMAT:?}, found {:?}", header.format)));
        }
        if header.version != REPORT_VERSION {
            return Err(CurateError::Format(format!("unsupported version {}", header.version)));
        }
        let mut entries = Vec::new();
        for (lineno, line) in lines {
            let l: Line = lineio::from_line(line, lineno)?;
            if l.label >= header.n_classes {
                return Err(CurateError::Format(format!("line {lineno}: label {} out of range", l.label)));
            }
            entries.push(SampleFlag {
                sample_id: l.sample_id,
                label: l.label,
                score: l.score,
                flag: l.flag,
                suggested_label: l.suggested_label,
            });
        }
        Ok(CurationReport { method: header.method, n_classes: header.n_classes, seed: header.seed, entries })
    }

    pub fn load(path: &Path) -> Result<Self, CurateError> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), CurateError> {
        lineio::write_atomic(path, self.to_text().as_bytes())?;
        Ok(())
    }

    /// Errors unless `other` covers the same samples in the same order.
    pub fn check_aligned(&self, other: &CurationReport) -> Result<(), CurateError> {
        if self.len() != other.len() {
            return Err(CurateError::LengthMismatch { what: "report rows", expected: self.len(), found: other.len() });
        }
        for (row, (a, b)) in self.entries.iter().zip(&other.entries).enumerate() {
            if a.sample_id != b.sample_id {
                return Err(CurateError::Misaligned { row, left: a.sample_id.clone(), right: b.sample_id.clone() });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MergeMode {
    Union,
    Intersection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodShare {
    pub method: String,
    pub flagged: usize,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeStats {
    pub mode: MergeMode,
    pub total: usize,
    pub methods: Vec<MethodShare>,
    /// Samples flagged by every report.
    pub overlap: usize,
    pub overlap_fraction: f64,
    /// Samples flagged by the merged report.
    pub combined: usize,
    pub combined_fraction: f64,
}

fn fraction(count: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        count as f64 / total as f64
    }
}

/// Combines aligned reports. The merged score is the number of reports
/// flagging each sample.
pub fn merge_filters(reports: &[CurationReport], mode: MergeMode) -> Result<(CurationReport, MergeStats), CurateError> {
    let first = reports.first().ok_or(CurateError::NoReports)?;
    for r in &reports[1..] {
        first.check_aligned(r)?;
    }
    let total = first.len();
    let mut entries = Vec::with_capacity(total);
    let mut overlap = 0;
    for (i, base) in first.entries.iter().enumerate() {
        let votes = reports.iter().filter(|r| r.entries[i].flag).count();
        let all = votes == reports.len();
        overlap += all as usize;
        let flag = match mode {
            MergeMode::Union => votes > 0,
            MergeMode::Intersection => all,
        };
        entries.push(SampleFlag {
            sample_id: base.sample_id.clone(),
            label: base.label,
            score: votes as f64,
            flag,
            suggested_label: None,
        });
    }
    let names: Vec<&str> = reports.iter().map(|r| r.method.as_str()).collect();
    let mode_name = match mode {
        MergeMode::Union => "union",
        MergeMode::Intersection => "intersection",
    };
    let merged = CurationReport {
        method: format!("{mode_name}({})", names.join(",")),
        n_classes: reports.iter().map(|r| r.n_classes).max().unwrap_or(0),
        seed: first.seed,
        entries,
    };
    let methods: Vec<MethodShare> = reports
        .iter()
        .map(|r| {
            let flagged = r.flagged_count();
            MethodShare { method: r.method.clone(), flagged, fraction: fraction(flagged, total) }
        })
        .collect();
    let combined = merged.flagged_count();
    if reports.len() == 2 && mode == MergeMode::Union {
        assert_eq!(combined, methods[0].flagged + methods[1].flagged - overlap, "inclusion-exclusion must hold");
    }
    let stats = MergeStats {
        mode,
        total,
        methods,
        overlap,
        overlap_fraction: fraction(overlap, total),
        combined,
        combined_fraction: fraction(combined, total),
    };
    Ok((merged, stats))
}
