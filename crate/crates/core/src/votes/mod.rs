//! Crowdsourced label checks: filter bundles for building clean sets, and
//! yes/unsure/no votes for estimating the label-noise rate.
//!
//! Votes file: one record per line, comma separated,
//! `sample_id,vote1,vote2,vote3[,annotator1,annotator2,annotator3]`.
//! Votes are `yes`, `unsure` or `no`. Blank lines and lines starting with
//! `#` are ignored.

mod bundles;

pub use bundles::{
    export_filter_bundles, import_filter_selections, BundleFile, FilterGroup, ImportReport, DEFAULT_GROUP_SIZE,
    DEFAULT_MIN_SELECT, DEFAULT_TASKS_PER_BUNDLE,
};

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::lineio;

/// Upper bound on votes per record accepted by default.
pub const DEFAULT_MAX_VOTES: usize = 3;

#[derive(Debug, thiserror::Error)]
pub enum VoteError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("unknown vote value {0:?}")]
    BadVote(String),
    #[error("sample {sample_id}: {count} votes, expected 1..={max}")]
    VoteCount { sample_id: String, count: usize, max: usize },
    #[error("no vote records")]
    Empty,
    #[error("unknown group {0:?}")]
    UnknownGroup(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Vote {
    Yes,
    Unsure,
    No,
}

impl Vote {
    pub fn as_str(self) -> &'static str {
        match self {
            Vote::Yes => "yes",
            Vote::Unsure => "unsure",
            Vote::No => "no",
        }
    }
}

impl fmt::Display for Vote {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Vote {
    type Err = VoteError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "yes" | "y" => Ok(Vote::Yes),
            "unsure" | "u" => Ok(Vote::Unsure),
            "no" | "n" => Ok(Vote::No),
            other => Err(VoteError::BadVote(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoteRecord {
    pub sample_id: String,
    pub votes: Vec<Vote>,
    pub annotator_ids: Option<Vec<String>>,
}

impl VoteRecord {
    pub fn new(sample_id: impl Into<String>, votes: Vec<Vote>) -> Self {
        VoteRecord { sample_id: sample_id.into(), votes, annotator_ids: None }
    }

    pub fn pattern(&self) -> Pattern {
        Pattern::of(&self.votes)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AggregationPolicy {
    /// Clean when more than half of the votes are yes (2 of 3).
    #[default]
    Majority,
    /// Clean only when every vote is yes.
    Strict,
}

impl AggregationPolicy {
    pub fn is_clean(self, votes: &[Vote]) -> bool {
        let yes = votes.iter().filter(|&&v| v == Vote::Yes).count();
        match self {
            AggregationPolicy::Majority => 2 * yes > votes.len(),
            AggregationPolicy::Strict => !votes.is_empty() && yes == votes.len(),
        }
    }
}

/// Order-insensitive vote pattern. With three votes: all yes, two yes and
/// an unsure, two yes and a no, anything else. Other vote counts map the same
/// way by the number of non-yes votes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pattern {
    #[serde(rename = "YYY")]
    AllYes,
    #[serde(rename = "YYU")]
    OneUnsure,
    #[serde(rename = "YYN")]
    OneNo,
    #[serde(rename = "else")]
    Other,
}

impl Pattern {
    pub const ALL: [Pattern; 4] = [Pattern::AllYes, Pattern::OneUnsure, Pattern::OneNo, Pattern::Other];

    pub fn of(votes: &[Vote]) -> Pattern {
        let non_yes: Vec<Vote> = votes.iter().copied().filter(|&v| v != Vote::Yes).collect();
        let majority = AggregationPolicy::Majority.is_clean(votes);
        match non_yes.as_slice() {
            [] if !votes.is_empty() => Pattern::AllYes,
            [Vote::Unsure] if majority => Pattern::OneUnsure,
            [Vote::No] if majority => Pattern::OneNo,
            _ => Pattern::Other,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Pattern::AllYes => "YYY",
            Pattern::OneUnsure => "YYU",
            Pattern::OneNo => "YYN",
            Pattern::Other => "else",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DistributionTable {
    pub all_yes: usize,
    pub one_unsure: usize,
    pub one_no: usize,
    pub other: usize,
}

impl DistributionTable {
    pub fn total(&self) -> usize {
        self.all_yes + self.one_unsure + self.one_no + self.other
    }

    pub fn count(&self, p: Pattern) -> usize {
        match p {
            Pattern::AllYes => self.all_yes,
            Pattern::OneUnsure => self.one_unsure,
            Pattern::OneNo => self.one_no,
            Pattern::Other => self.other,
        }
    }

    fn add(&mut self, p: Pattern) {
        match p {
            Pattern::AllYes => self.all_yes += 1,
            Pattern::OneUnsure => self.one_unsure += 1,
            Pattern::OneNo => self.one_no += 1,
            Pattern::Other => self.other += 1,
        }
    }

    pub fn fraction(&self, p: Pattern) -> f64 {
        let t = self.total();
        if t == 0 {
            0.0
        } else {
            self.count(p) as f64 / t as f64
        }
    }

    pub fn fractions(&self) -> [f64; 4] {
        Pattern::ALL.map(|p| self.fraction(p))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Clean,
    Noisy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregation {
    pub policy: AggregationPolicy,
    pub verdicts: Vec<(String, Verdict)>,
    pub table: DistributionTable,
}

impl Aggregation {
    pub fn clean_count(&self) -> usize {
        self.verdicts.iter().filter(|(_, v)| *v == Verdict::Clean).count()
    }

    pub fn clean_fraction(&self) -> f64 {
        if self.verdicts.is_empty() {
            0.0
        } else {
            self.clean_count() as f64 / self.verdicts.len() as f64
        }
    }
}

/// Per-sample verdicts under `policy` plus the pattern distribution.
pub fn aggregate_votes(
    records: &[VoteRecord],
    policy: AggregationPolicy,
    max_votes: usize,
) -> Result<Aggregation, VoteError> {
    let mut table = DistributionTable::default();
    let mut verdicts = Vec::with_capacity(records.len());
    for r in records {
        if r.votes.is_empty() || r.votes.len() > max_votes {
            return Err(VoteError::VoteCount { sample_id: r.sample_id.clone(), count: r.votes.len(), max: max_votes });
        }
        table.add(r.pattern());
        let v = if policy.is_clean(&r.votes) { Verdict::Clean } else { Verdict::Noisy };
        verdicts.push((r.sample_id.clone(), v));
    }
    Ok(Aggregation { policy, verdicts, table })
}

/// Noise-rate bounds from a pattern table. The lower bound counts samples
/// that fail the majority rule, the ambiguity counts majority-clean samples
/// with a `no` vote, and the upper bound adds the two.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseInterval {
    pub lower: f64,
    pub upper: f64,
    pub ambiguity: f64,
    pub lower_count: usize,
    pub ambiguity_count: usize,
    pub total: usize,
}

pub fn estimate_noise_interval(table: &DistributionTable) -> Result<NoiseInterval, VoteError> {
    let total = table.total();
    if total == 0 {
        return Err(VoteError::Empty);
    }
    let t = total as f64;
    Ok(NoiseInterval {
        lower: table.other as f64 / t,
        upper: (table.other + table.one_no) as f64 / t,
        ambiguity: table.one_no as f64 / t,
        lower_count: table.other,
        ambiguity_count: table.one_no,
        total,
    })
}

/// How many records each annotator contributed to.
pub fn annotator_counts(records: &[VoteRecord]) -> BTreeMap<String, usize> {
    let mut out = BTreeMap::new();
    for id in records.iter().filter_map(|r| r.annotator_ids.as_ref()).flatten() {
        *out.entry(id.clone()).or_insert(0) += 1;
    }
    out
}

/// Parses a votes file. A record's votes are the longest run of vote tokens
/// after the sample id; any remaining fields are annotator ids, one per vote.
pub fn parse_votes(text: &str, max_votes: usize) -> Result<Vec<VoteRecord>, VoteError> {
    let mut out = Vec::new();
    for (line, raw) in lineio::numbered_lines(text) {
        if raw.trim_start().starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = raw.split(',').map(str::trim).collect();
        let syntax = |message: String| VoteError::Syntax { line, message };
        let sample_id = fields[0];
        if sample_id.is_empty() {
            return Err(syntax("empty sample id".into()));
        }
        let rest = &fields[1..];
        let n_votes = rest.iter().take_while(|f| f.parse::<Vote>().is_ok()).count();
        if n_votes == 0 {
            return Err(syntax(match rest.first() {
                Some(f) => format!("unknown vote value {f:?}"),
                None => "no votes".into(),
            }));
        }
        if n_votes > max_votes {
            return Err(syntax(format!("{n_votes} votes, at most {max_votes} allowed")));
        }
        let votes: Vec<Vote> = rest[..n_votes].iter().map(|f| f.parse().expect("checked above")).collect();
        let annotators = &rest[n_votes..];
        let annotator_ids = match annotators.len() {
            0 => None,
            n if n == n_votes => Some(annotators.iter().map(|s| s.to_string()).collect()),
            n => return Err(syntax(format!("{n} annotator ids for {n_votes} votes"))),
        };
        out.push(VoteRecord { sample_id: sample_id.to_string(), votes, annotator_ids });
    }
    Ok(out)
}

pub fn votes_to_text(records: &[VoteRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&r.sample_id);
        for v in &r.votes {
            out.push(',');
            out.push_str(v.as_str());
        }
        for a in r.annotator_ids.iter().flatten() {
            out.push(',');
            out.push_str(a);
        }
        out.push('\n');
    }
    out
}

pub fn read_votes(path: &Path, max_votes: usize) -> Result<Vec<VoteRecord>, VoteError> {
    parse_votes(&fs::read_to_string(path)?, max_votes)
}

pub fn write_votes(path: &Path, records: &[VoteRecord]) -> Result<(), VoteError> {
    lineio::write_atomic(path, votes_to_text(records).as_bytes())?;
    Ok(())
}
