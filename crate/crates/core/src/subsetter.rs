//! Derived datasets: train/eval/test splits, cleaned subsets and long-tail
//! subsets.

use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::collector::{FetchStatus, Manifest, Split};
use crate::curator::{merge_filters, CurateError, CurationReport, MergeMode, MergeStats};
use crate::seed;

#[derive(Debug, thiserror::Error)]
pub enum SubsetError {
    #[error("invalid long-tail parameters: {0}")]
    Parameters(String),
    #[error("class {class} has {have} samples, {need} required")]
    Insufficient { class: usize, need: usize, have: usize },
    #[error("distribution has {dist} classes, manifest has {manifest}")]
    ClassCount { dist: usize, manifest: usize },
    #[error("infeasible split: {0}")]
    Infeasible(String),
    #[error("report sample {0:?} is not in the manifest")]
    UnknownSample(String),
    #[error(transparent)]
    Curate(#[from] CurateError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassDistribution {
    /// Non-increasing per-rank counts; rank 0 is the head class.
    pub counts: Vec<usize>,
    pub rho: f64,
    pub n_max: usize,
}

impl ClassDistribution {
    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

fn floor_nudged(v: f64) -> usize {
    let f = v.floor();
    if v - f > 1.0 - 1e-9 {
        f as usize + 1
    } else {
        f as usize
    }
}

/// Exponential profile `floor(n_max * rho^(-i / (K - 1)))` for `i = 0..K`.
pub fn longtail_counts(n_max: usize, k: usize, rho: f64) -> Result<ClassDistribution, SubsetError> {
    if k < 2 {
        return Err(SubsetError::Parameters(format!("need at least 2 classes, got {k}")));
    }
    if !rho.is_finite() || rho < 1.0 {
        return Err(SubsetError::Parameters(format!("rho must be a finite value >= 1, got {rho}")));
    }
    if (n_max as f64) < rho {
        return Err(SubsetError::Parameters(format!("n_max {n_max} is smaller than rho {rho}")));
    }
    let counts = (0..k)
        .map(|i| match i {
            0 => n_max,
            i if i == k - 1 => floor_nudged(n_max as f64 / rho),
            i => floor_nudged(n_max as f64 * rho.powf(-(i as f64) / (k - 1) as f64)),
        })
        .collect();
    Ok(ClassDistribution { counts, rho, n_max })
}

fn fetched_by_class(manifest: &Manifest) -> BTreeMap<usize, Vec<usize>> {
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, r) in manifest.records().iter().enumerate() {
        if r.status == FetchStatus::Fetched {
            by_class.entry(r.webly_label).or_default().push(i);
        }
    }
    by_class
}

/// Draws `dist.counts[r]` fetched samples from the class ranked `r` by
/// available count (largest first, ties to the lower class index). Sampling
/// is seeded, uniform and without replacement; record order is preserved.
pub fn build_longtail_subset(
    manifest: &Manifest,
    dist: &ClassDistribution,
    root_seed: u64,
) -> Result<Manifest, SubsetError> {
    let by_class = fetched_by_class(manifest);
    if by_class.len() != dist.counts.len() {
        return Err(SubsetError::ClassCount { dist: dist.counts.len(), manifest: by_class.len() });
    }
    let mut ranked: Vec<(usize, Vec<usize>)> = by_class.into_iter().collect();
    ranked.sort_by(|a, b| b.1.len().cmp(&a.1.len()).then(a.0.cmp(&b.0)));
    let mut keep = HashSet::new();
    for ((class, mut rows), &need) in ranked.into_iter().zip(&dist.counts) {
        if rows.len() < need {
            return Err(SubsetError::Insufficient { class, need, have: rows.len() });
        }
        let mut rng = seed::rng_for(root_seed, &format!("subset.longtail.{class}"));
        rows.shuffle(&mut rng);
        keep.extend(rows[..need].iter().copied());
    }
    let mut i = 0;
    Ok(manifest.filtered(|_| {
        let k = keep.contains(&i);
        i += 1;
        k
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CleanStats {
    pub input: usize,
    pub removed: usize,
    pub retained: usize,
    pub retained_fraction: f64,
    pub merge: Option<MergeStats>,
}

/// Removes every sample flagged by any of the reports (or by all of them, in
/// intersection mode). Samples absent from the reports are kept.
pub fn build_clean_subset(
    manifest: &Manifest,
    reports: &[CurationReport],
    mode: MergeMode,
) -> Result<(Manifest, CleanStats), SubsetError> {
    let (removed_ids, merge) = if reports.is_empty() {
        (HashSet::new(), None)
    } else {
        let (merged, stats) = merge_filters(reports, mode)?;
        let mut ids = HashSet::new();
        for e in &merged.entries {
            if !manifest.contains(&e.sample_id) {
                return Err(SubsetError::UnknownSample(e.sample_id.clone()));
            }
            if e.flag {
                ids.insert(e.sample_id.clone());
            }
        }
        (ids, Some(stats))
    };
    let out = manifest.filtered(|r| !removed_ids.contains(&r.sample_id));
    if out.is_empty() && !manifest.is_empty() {
        log::warn!("every sample was removed; the clean subset is empty");
    }
    let stats = CleanStats {
        input: manifest.len(),
        removed: manifest.len() - out.len(),
        retained: out.len(),
        retained_fraction: if manifest.is_empty() { 1.0 } else { out.len() as f64 / manifest.len() as f64 },
        merge,
    };
    Ok((out, stats))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitConfig {
    pub eval_size: usize,
    pub test_size: usize,
    pub seed: u64,
    pub stratify: bool,
    /// Keep only this many (stratified) train rows; the rest get no split.
    pub tiny: Option<usize>,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig { eval_size: 20_000, test_size: 20_000, seed: 0, stratify: true, tiny: None }
    }
}

/// Largest-remainder apportionment of `total` over `sizes`, capped by size.
/// Ties in the remainder go to the lower index.
pub fn apportion(sizes: &[usize], total: usize) -> Vec<usize> {
    let n: u128 = sizes.iter().map(|&s| s as u128).sum();
    if n == 0 {
        return vec![0; sizes.len()];
    }
    let mut quota: Vec<usize> = sizes.iter().map(|&s| (total as u128 * s as u128 / n) as usize).collect();
    let mut rems: Vec<(u128, usize)> =
        sizes.iter().enumerate().map(|(i, &s)| (total as u128 * s as u128 % n, i)).collect();
    rems.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut left = total - quota.iter().sum::<usize>();
    for &(r, i) in &rems {
        if left == 0 {
            break;
        }
        if r > 0 && quota[i] < sizes[i] {
            quota[i] += 1;
            left -= 1;
        }
    }
    quota
}

/// Assigns a split to each label in `labels`; the label-level core of
/// [`split_dataset`].
pub fn plan_split(labels: &[usize], cfg: &SplitConfig) -> Result<Vec<Split>, SubsetError> {
    let n = labels.len();
    let held = cfg.eval_size + cfg.test_size;
    if held > n {
        return Err(SubsetError::Infeasible(format!("eval {} + test {} exceeds {n} samples", cfg.eval_size, cfg.test_size)));
    }
    if let Some(t) = cfg.tiny {
        if t > n - held {
            return Err(SubsetError::Infeasible(format!("tiny train size {t} exceeds {} train samples", n - held)));
        }
    }
    let groups: Vec<Vec<usize>> = if cfg.stratify {
        let k = labels.iter().max().map_or(0, |m| m + 1);
        let mut g = vec![Vec::new(); k];
        for (i, &l) in labels.iter().enumerate() {
            g[l].push(i);
        }
        g
    } else {
        vec![(0..n).collect()]
    };
    let mut groups = groups;
    for (c, rows) in groups.iter_mut().enumerate() {
        let mut rng = seed::rng_for(cfg.seed, &format!("subset.split.{c}"));
        rows.shuffle(&mut rng);
    }
    let sizes: Vec<usize> = groups.iter().map(Vec::len).collect();
    let eval = apportion(&sizes, cfg.eval_size);
    let after_eval: Vec<usize> = sizes.iter().zip(&eval).map(|(s, e)| s - e).collect();
    let test = apportion(&after_eval, cfg.test_size);
    let train_sizes: Vec<usize> = after_eval.iter().zip(&test).map(|(s, t)| s - t).collect();
    let train = match cfg.tiny {
        Some(t) => apportion(&train_sizes, t),
        None => train_sizes.clone(),
    };

    let mut out = vec![Split::None; n];
    for (c, rows) in groups.iter().enumerate() {
        let (e, t, tr) = (eval[c], test[c], train[c]);
        for (pos, &i) in rows.iter().enumerate() {
            out[i] = if pos < e {
                Split::Eval
            } else if pos < e + t {
                Split::Test
            } else if pos < e + t + tr {
                Split::Train
            } else {
                Split::None
            };
        }
    }
    Ok(out)
}

/// Splits the fetched records of a manifest; other records get no split.
pub fn split_dataset(manifest: &Manifest, cfg: &SplitConfig) -> Result<Manifest, SubsetError> {
    let rows: Vec<usize> = manifest
        .records()
        .iter()
        .enumerate()
        .filter(|(_, r)| r.status == FetchStatus::Fetched)
        .map(|(i, _)| i)
        .collect();
    let labels: Vec<usize> = rows.iter().map(|&i| manifest.records()[i].webly_label).collect();
    let plan = plan_split(&labels, cfg)?;
    let mut out = manifest.clone();
    for r in out.records_mut() {
        r.split = Split::None;
    }
    for (&i, s) in rows.iter().zip(plan) {
        out.records_mut()[i].split = s;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collector::SampleRecord;
    use crate::curator::SampleFlag;
    use crate::taxonomy::SubclassKey;
    use proptest::prelude::*;

    fn manifest(per_class: &[usize]) -> Manifest {
        let mut m = Manifest::new("v", Some(0));
        for (c, &n) in per_class.iter().enumerate() {
            for i in 0..n {
                m.push(SampleRecord {
                    sample_id: format!("c{c}-{i}"),
                    subclass_key: SubclassKey { class_index: c, option_indices: vec![] },
                    webly_label: c,
                    query: String::new(),
                    uri: format!("mock://{c}/{i}"),
                    content_hash: Some(format!("{c}-{i}")),
                    byte_size: 1,
                    status: FetchStatus::Fetched,
                    split: Split::None,
                    clean_candidate: false,
                })
                .unwrap();
            }
        }
        m
    }

    #[test]
    fn profile_rho_10() {
        let d = longtail_counts(39297, 12, 10.0).unwrap();
        assert_eq!(d.counts, vec![39297, 31875, 25854, 20971, 17010, 13797, 11191, 9078, 7363, 5972, 4844, 3929]);
        assert_eq!(d.total(), 191181);
    }

    #[test]
    fn rho_one_is_flat_and_bad_params_rejected() {
        assert_eq!(longtail_counts(50, 4, 1.0).unwrap().counts, vec![50; 4]);
        assert!(longtail_counts(50, 1, 2.0).is_err());
        assert!(longtail_counts(50, 4, 0.5).is_err());
        assert!(longtail_counts(5, 4, 10.0).is_err());
        assert!(longtail_counts(50, 4, f64::NAN).is_err());
    }

    #[test]
    fn longtail_subset_counts() {
        let m = manifest(&[4, 4]);
        let d = ClassDistribution { counts: vec![2, 1], rho: 2.0, n_max: 2 };
        let s = build_longtail_subset(&m, &d, 5).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s.to_text(), build_longtail_subset(&m, &d, 5).unwrap().to_text());
        let d = ClassDistribution { counts: vec![5, 1], rho: 5.0, n_max: 5 };
        assert!(matches!(build_longtail_subset(&m, &d, 5), Err(SubsetError::Insufficient { .. })));
        let d = ClassDistribution { counts: vec![1, 1, 1], rho: 1.0, n_max: 1 };
        assert!(matches!(build_longtail_subset(&m, &d, 5), Err(SubsetError::ClassCount { .. })));
    }

    #[test]
    fn head_class_is_the_largest() {
        let m = manifest(&[3, 9, 5]);
        let d = ClassDistribution { counts: vec![6, 3, 1], rho: 6.0, n_max: 6 };
        let s = build_longtail_subset(&m, &d, 1).unwrap();
        let count = |c| s.records().iter().filter(|r| r.webly_label == c).count();
        assert_eq!((count(0), count(1), count(2)), (1, 6, 3));
    }

    fn report(m: &Manifest, flagged: impl Fn(usize) -> bool) -> CurationReport {
        CurationReport::new(
            "t",
            2,
            m.records()
                .iter()
                .enumerate()
                .map(|(i, r)| SampleFlag {
                    sample_id: r.sample_id.clone(),
                    label: r.webly_label,
                    score: 0.0,
                    flag: flagged(i),
                    suggested_label: None,
                })
                .collect(),
        )
    }

    #[test]
    fn clean_subset_edges() {
        let m = manifest(&[10, 10]);
        let (same, st) = build_clean_subset(&m, &[], MergeMode::Union).unwrap();
        assert_eq!(same, m);
        assert_eq!(st.retained_fraction, 1.0);
        let (none, st) = build_clean_subset(&m, &[report(&m, |_| true)], MergeMode::Union).unwrap();
        assert!(none.is_empty());
        assert_eq!(st.removed, 20);
        let (half, _) =
            build_clean_subset(&m, &[report(&m, |i| i < 5), report(&m, |i| i >= 15)], MergeMode::Union).unwrap();
        assert_eq!(half.len(), 10);
    }

    #[test]
    fn split_sizes_and_tiny() {
        let m = manifest(&[300, 500, 200]);
        let cfg = SplitConfig { eval_size: 100, test_size: 50, seed: 3, stratify: true, tiny: None };
        let s = split_dataset(&m, &cfg).unwrap();
        let count = |sp| s.records().iter().filter(|r| r.split == sp).count();
        assert_eq!((count(Split::Eval), count(Split::Test), count(Split::Train)), (100, 50, 850));
        let eval_c0 = s.records().iter().filter(|r| r.split == Split::Eval && r.webly_label == 0).count();
        assert_eq!(eval_c0, 30);
        assert_eq!(split_dataset(&m, &cfg).unwrap(), s);

        let tiny = split_dataset(&m, &SplitConfig { tiny: Some(85), ..cfg.clone() }).unwrap();
        let count = |sp| tiny.records().iter().filter(|r| r.split == sp).count();
        assert_eq!((count(Split::Train), count(Split::None)), (85, 765));

        assert!(split_dataset(&m, &SplitConfig { eval_size: 900, test_size: 200, ..cfg.clone() }).is_err());
        assert!(split_dataset(&m, &SplitConfig { tiny: Some(851), ..cfg }).is_err());
    }

    #[test]
    fn apportion_largest_remainder() {
        assert_eq!(apportion(&[1, 1, 1], 2), vec![1, 1, 0]);
        assert_eq!(apportion(&[10, 20, 70], 10), vec![1, 2, 7]);
        assert_eq!(apportion(&[0, 5], 3), vec![0, 3]);
    }

    proptest! {
        #[test]
        fn splits_partition(
            labels in proptest::collection::vec(0usize..5, 1..300),
            e in 0usize..100, t in 0usize..100, seed in any::<u64>(), stratify in any::<bool>(),
        ) {
            prop_assume!(e + t <= labels.len());
            let plan = plan_split(&labels, &SplitConfig { eval_size: e, test_size: t, seed, stratify, tiny: None }).unwrap();
            prop_assert_eq!(plan.iter().filter(|s| **s == Split::Eval).count(), e);
            prop_assert_eq!(plan.iter().filter(|s| **s == Split::Test).count(), t);
            prop_assert_eq!(plan.iter().filter(|s| **s == Split::Train).count(), labels.len() - e - t);
        }

        #[test]
        fn longtail_monotone_with_ratio_near_rho(n_max in 100usize..100_000, k in 2usize..20, rho in 1.0f64..90.0) {
            prop_assume!(n_max as f64 >= rho);
            let d = longtail_counts(n_max, k, rho).unwrap();
            prop_assert!(d.counts.windows(2).all(|w| w[0] >= w[1]));
            prop_assert_eq!(d.counts[0], n_max);
            let last = *d.counts.last().unwrap() as f64;
            // floor rounding moves the tail by less than one sample
            prop_assert!(n_max as f64 / (last + 1.0) <= rho + 1e-9);
            prop_assert!(n_max as f64 / last >= rho - 1e-9);
        }
    }
}
