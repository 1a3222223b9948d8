//! Filter bundles: groups of same-label samples from which annotators pick
//! the correctly labeled ones.
//!
//! Bundle file layout:
//!
//! ```text
//! #adc-bundles version=1 seed=7 group_size=20 min_select=4 tasks_per_bundle=10
//! #group c0-g0 label=0 bundle=0 min_select=4
//! <sample id>
//! ...
//! ```
//!
//! Selections file: one line per group, `group_id,sample_id,sample_id,...`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::VoteError;
use crate::collector::{FetchStatus, Manifest};
use crate::{lineio, seed};

pub const DEFAULT_GROUP_SIZE: usize = 20;
pub const DEFAULT_MIN_SELECT: usize = 4;
pub const DEFAULT_TASKS_PER_BUNDLE: usize = 10;

const BUNDLE_MAGIC: &str = "#adc-bundles";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterGroup {
    pub group_id: String,
    pub machine_label: usize,
    /// Index of the work unit (HIT) this group belongs to.
    pub bundle: usize,
    pub min_select: usize,
    pub sample_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BundleFile {
    pub seed: u64,
    pub group_size: usize,
    pub min_select: usize,
    pub tasks_per_bundle: usize,
    pub groups: Vec<FilterGroup>,
}

/// Groups fetched samples by webly label into seeded, disjoint groups of
/// `group_size`. A class with fewer than `group_size` samples is skipped;
/// leftovers smaller than a full group are not exported.
pub fn export_filter_bundles(
    manifest: &Manifest,
    group_size: usize,
    min_select: usize,
    tasks_per_bundle: usize,
    root_seed: u64,
) -> BundleFile {
    assert!(group_size >= 1 && min_select <= group_size && tasks_per_bundle >= 1, "invalid bundle parameters");
    let mut by_class: BTreeMap<usize, Vec<String>> = BTreeMap::new();
    for r in manifest.records().iter().filter(|r| r.status == FetchStatus::Fetched) {
        by_class.entry(r.webly_label).or_default().push(r.sample_id.clone());
    }
    let mut rng = seed::rng_for(root_seed, "votes.filter_bundles");
    let mut groups = Vec::new();
    for (label, mut ids) in by_class {
        if ids.len() < group_size {
            log::warn!("class {label}: {} samples, fewer than one group of {group_size}; skipped", ids.len());
            continue;
        }
        ids.shuffle(&mut rng);
        for (g, chunk) in ids.chunks_exact(group_size).enumerate() {
            let bundle = groups.len() / tasks_per_bundle;
            groups.push(FilterGroup {
                group_id: format!("c{label}-g{g}"),
                machine_label: label,
                bundle,
                min_select,
                sample_ids: chunk.to_vec(),
            });
        }
    }
    BundleFile { seed: root_seed, group_size, min_select, tasks_per_bundle, groups }
}

fn key_values(line: &str, lineno: usize) -> Result<HashMap<&str, &str>, VoteError> {
    line.split_whitespace()
        .map(|kv| {
            kv.split_once('=').ok_or_else(|| VoteError::Syntax { line: lineno, message: format!("expected key=value, found {kv:?}") })
        })
        .collect()
}

fn number(map: &HashMap<&str, &str>, key: &str, line: usize) -> Result<u64, VoteError> {
    map.get(key)
        .ok_or_else(|| VoteError::Syntax { line, message: format!("missing {key}") })?
        .parse()
        .map_err(|_| VoteError::Syntax { line, message: format!("{key} is not a number") })
}

impl BundleFile {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(
            out,
            "{BUNDLE_MAGIC} version=1 seed={} group_size={} min_select={} tasks_per_bundle={}",
            self.seed, self.group_size, self.min_select, self.tasks_per_bundle
        )
        .unwrap();
        for g in &self.groups {
            writeln!(out, "#group {} label={} bundle={} min_select={}", g.group_id, g.machine_label, g.bundle, g.min_select)
                .unwrap();
            for id in &g.sample_ids {
                writeln!(out, "{id}").unwrap();
            }
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, VoteError> {
        let mut lines = lineio::numbered_lines(text);
        let (l0, first) = lines.next().ok_or(VoteError::Syntax { line: 1, message: "empty bundle file".into() })?;
        let rest = first
            .strip_prefix(BUNDLE_MAGIC)
            .ok_or_else(|| VoteError::Syntax { line: l0, message: "not a bundle file".into() })?;
        let h = key_values(rest, l0)?;
        if number(&h, "version", l0)? != 1 {
            return Err(VoteError::Syntax { line: l0, message: "unsupported version".into() });
        }
        let mut file = BundleFile {
            seed: number(&h, "seed", l0)?,
            group_size: number(&h, "group_size", l0)? as usize,
            min_select: number(&h, "min_select", l0)? as usize,
            tasks_per_bundle: number(&h, "tasks_per_bundle", l0)? as usize,
            groups: Vec::new(),
        };
        for (lineno, line) in lines {
            if let Some(rest) = line.strip_prefix("#group ") {
                let mut parts = rest.splitn(2, ' ');
                let id = parts.next().unwrap_or_default().to_string();
                let kv = key_values(parts.next().unwrap_or_default(), lineno)?;
                file.groups.push(FilterGroup {
                    group_id: id,
                    machine_label: number(&kv, "label", lineno)? as usize,
                    bundle: number(&kv, "bundle", lineno)? as usize,
                    min_select: number(&kv, "min_select", lineno)? as usize,
                    sample_ids: Vec::new(),
                });
            } else if line.starts_with('#') {
                continue;
            } else {
                let g = file
                    .groups
                    .last_mut()
                    .ok_or_else(|| VoteError::Syntax { line: lineno, message: "sample before any group".into() })?;
                g.sample_ids.push(line.trim().to_string());
            }
        }
        Ok(file)
    }

    pub fn group(&self, id: &str) -> Option<&FilterGroup> {
        self.groups.iter().find(|g| g.group_id == id)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImportReport {
    pub accepted_groups: usize,
    /// `(group_id, reason)` for every rejected group.
    pub rejected: Vec<(String, String)>,
    pub marked: usize,
}

/// Marks the samples selected in accepted groups as clean candidates. A group
/// is rejected when it has fewer than `min_select` selections or selects a
/// sample that is not part of it.
pub fn import_filter_selections(
    bundles: &BundleFile,
    selections: &str,
    manifest: &mut Manifest,
) -> Result<ImportReport, VoteError> {
    let mut chosen: BTreeMap<&str, BTreeSet<String>> = BTreeMap::new();
    for (_, line) in lineio::numbered_lines(selections) {
        if line.trim_start().starts_with('#') {
            continue;
        }
        let mut fields = line.split(',').map(str::trim);
        let gid = fields.next().unwrap_or_default();
        let group = bundles.group(gid).ok_or_else(|| VoteError::UnknownGroup(gid.to_string()))?;
        chosen.entry(group.group_id.as_str()).or_default().extend(fields.filter(|f| !f.is_empty()).map(String::from));
    }
    let mut report = ImportReport::default();
    for (gid, picks) in chosen {
        let group = bundles.group(gid).expect("looked up above");
        if let Some(stray) = picks.iter().find(|p| !group.sample_ids.contains(p)) {
            report.rejected.push((gid.to_string(), format!("sample {stray} is not in the group")));
            continue;
        }
        if picks.len() < group.min_select {
            report.rejected.push((gid.to_string(), format!("{} selections, at least {} required", picks.len(), group.min_select)));
            continue;
        }
        for id in &picks {
            match manifest.get_mut(id) {
                Some(rec) => {
                    if !rec.clean_candidate {
                        rec.clean_candidate = true;
                        report.marked += 1;
                    }
                }
                None => log::warn!("group {gid}: sample {id} is not in the manifest"),
            }
        }
        report.accepted_groups += 1;
    }
    Ok(report)
}
