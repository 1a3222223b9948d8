//! Per-sample noise detectors and neighbor relabeling.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::transition::class_counts;
use super::{CurateError, CurationReport, SampleFlag, TransitionEstimate};
use crate::embedstore::{knn_all, knn_query, EmbeddingMatrix, ProbMatrix};

fn check_len(what: &'static str, expected: usize, found: usize) -> Result<(), CurateError> {
    if expected != found {
        return Err(CurateError::LengthMismatch { what, expected, found });
    }
    Ok(())
}

fn n_classes_of(labels: &[usize]) -> usize {
    labels.iter().max().map_or(0, |m| m + 1)
}

fn entries(ids: &[String], labels: &[usize], scores: &[f64], flags: &[bool]) -> Vec<SampleFlag> {
    (0..ids.len())
        .map(|i| SampleFlag {
            sample_id: ids[i].clone(),
            label: labels[i],
            score: scores[i],
            flag: flags[i],
            suggested_label: None,
        })
        .collect()
}

/// Indices sorted by ascending score, ties by ascending index.
fn ascending(indices: &mut [usize], scores: &[f64]) {
    indices.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap_or(Ordering::Equal).then(a.cmp(&b)));
}

/// Ranks samples by similarity-weighted agreement with their `k` nearest
/// neighbors and flags, per noisy class `j`, the
/// `round(N_j * (1 - P(Y=j | observed j)))` least-agreeing samples.
///
/// Neighbor weights are `(1 + cos) / 2`, which keeps them in `[0, 1]`.
pub fn simifeat_detect(
    matrix: &EmbeddingMatrix,
    labels: &[usize],
    t_est: &TransitionEstimate,
    k: usize,
) -> Result<CurationReport, CurateError> {
    check_len("labels", matrix.n_rows(), labels.len())?;
    t_est.validate()?;
    let classes = t_est.n_classes();
    let counts = class_counts(labels, classes)?;
    let neighbors = knn_all(matrix, k)?;

    let scores: Vec<f64> = neighbors
        .iter()
        .enumerate()
        .map(|(i, nl)| {
            let (mut agree, mut total) = (0.0, 0.0);
            for nb in nl {
                let w = (1.0 + nb.similarity) / 2.0;
                total += w;
                if labels[nb.index] == labels[i] {
                    agree += w;
                }
            }
            if total > 0.0 {
                agree / total
            } else {
                nl.iter().filter(|nb| labels[nb.index] == labels[i]).count() as f64 / nl.len() as f64
            }
        })
        .collect();

    let posterior = t_est.label_posterior();
    let global = t_est.noise_rate().clamp(0.0, 1.0);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); classes];
    for (i, &l) in labels.iter().enumerate() {
        by_class[l].push(i);
    }
    let mut flags = vec![false; labels.len()];
    for (j, members) in by_class.iter_mut().enumerate() {
        let wrong_rate = match posterior[j] {
            Some(p) => 1.0 - p,
            None => {
                if counts[j] > 0 {
                    log::warn!("class {j}: transition estimate predicts no samples with this label; using the global noise rate {global:.4}");
                }
                global
            }
        };
        let m = ((counts[j] as f64 * wrong_rate).round() as usize).min(members.len());
        ascending(members, &scores);
        for &i in &members[..m] {
            flags[i] = true;
        }
    }
    Ok(CurationReport::new("simifeat", classes, entries(matrix.row_ids(), labels, &scores, &flags)))
}

/// Flags a sample when more than half of its `k` nearest neighbors carry a
/// different label. The score is the share of the most common neighbor label.
pub fn knn_vote_detect(matrix: &EmbeddingMatrix, labels: &[usize], k: usize) -> Result<CurationReport, CurateError> {
    check_len("labels", matrix.n_rows(), labels.len())?;
    let classes = n_classes_of(labels);
    let neighbors = knn_all(matrix, k)?;
    let mut scores = Vec::with_capacity(labels.len());
    let mut flags = Vec::with_capacity(labels.len());
    let mut tally = vec![0usize; classes];
    for (i, nl) in neighbors.iter().enumerate() {
        tally.iter_mut().for_each(|t| *t = 0);
        for nb in nl {
            tally[labels[nb.index]] += 1;
        }
        let differing = nl.len() - tally[labels[i]];
        flags.push(2 * differing > nl.len());
        scores.push(*tally.iter().max().unwrap_or(&0) as f64 / nl.len() as f64);
    }
    Ok(CurationReport::new("knn", classes, entries(matrix.row_ids(), labels, &scores, &flags)))
}

fn label_confidences(probs: &ProbMatrix, labels: &[usize]) -> Result<Vec<f64>, CurateError> {
    check_len("labels", probs.n_rows(), labels.len())?;
    class_counts(labels, probs.n_classes())?;
    Ok(labels.iter().enumerate().map(|(n, &l)| probs.row(n)[l] as f64).collect())
}

/// Confident-learning screen: per-class thresholds are the mean predicted
/// probability of that class over samples labeled with it. A sample is
/// assigned to the most probable class among those reaching their threshold
/// and flagged when that class differs from its label. The score is the
/// probability given to the label.
pub fn confident_learning_detect(probs: &ProbMatrix, labels: &[usize]) -> Result<CurationReport, CurateError> {
    let conf = label_confidences(probs, labels)?;
    let k = probs.n_classes();
    let mut sums = vec![0.0f64; k];
    let mut counts = vec![0usize; k];
    for (n, &l) in labels.iter().enumerate() {
        sums[l] += probs.row(n)[l] as f64;
        counts[l] += 1;
    }
    if let Some(class) = counts.iter().position(|&c| c == 0) {
        return Err(CurateError::MissingClass(class));
    }
    let thresholds: Vec<f64> = sums.iter().zip(&counts).map(|(s, &c)| s / c as f64).collect();
    let flags: Vec<bool> = labels
        .iter()
        .enumerate()
        .map(|(n, &l)| {
            let row = probs.row(n);
            let mut best: Option<usize> = None;
            for j in 0..k {
                if row[j] as f64 >= thresholds[j] && best.is_none_or(|b| row[j] > row[b]) {
                    best = Some(j);
                }
            }
            best.is_some_and(|b| b != l)
        })
        .collect();
    Ok(CurationReport::new("cl", k, entries(probs.row_ids(), labels, &conf, &flags)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoresSign {
    /// Flag when the label loss exceeds the row's mean loss (score > 0).
    #[default]
    FlagAbove,
    /// Flag when score < 0.
    FlagBelow,
}

pub const PROB_FLOOR: f64 = 1e-12;

/// Score `-ln p[label] - mean_j(-ln p[j])`, with probabilities clipped
/// below at [`PROB_FLOOR`].
pub fn cores_score_detect(probs: &ProbMatrix, labels: &[usize], sign: CoresSign) -> Result<CurationReport, CurateError> {
    label_confidences(probs, labels)?;
    let k = probs.n_classes();
    let mut clipped = 0usize;
    let mut scores = Vec::with_capacity(labels.len());
    for (n, &l) in labels.iter().enumerate() {
        let row = probs.row(n);
        let nll = |v: f32| {
            let v = v as f64;
            -(if v < PROB_FLOOR { PROB_FLOOR } else { v }).ln()
        };
        if (row[l] as f64) < PROB_FLOOR {
            clipped += 1;
        }
        let mean = row.iter().map(|&v| nll(v)).sum::<f64>() / k as f64;
        scores.push(nll(row[l]) - mean);
    }
    if clipped > 0 {
        log::warn!("{clipped} samples give (near) zero probability to their label; clipped at {PROB_FLOOR:e}");
    }
    let flags: Vec<bool> = scores
        .iter()
        .map(|&s| match sign {
            CoresSign::FlagAbove => s > 0.0,
            CoresSign::FlagBelow => s < 0.0,
        })
        .collect();
    Ok(CurationReport::new("cores", k, entries(probs.row_ids(), labels, &scores, &flags)))
}

/// `floor(x * n / 100)`, nudged up when the product lands within 1e-9 below
/// an integer through floating-point error.
pub fn percentile_count(n: usize, x_percent: f64) -> usize {
    let raw = x_percent * n as f64 / 100.0;
    let mut count = raw.floor();
    if raw - count > 1.0 - 1e-9 {
        count += 1.0;
    }
    (count.max(0.0) as usize).min(n)
}

/// Flags exactly `floor(x * N / 100)` samples with the lowest probability on
/// their label; ties go to the lower index.
pub fn confidence_percentile_filter(
    probs: &ProbMatrix,
    labels: &[usize],
    x_percent: f64,
) -> Result<CurationReport, CurateError> {
    if !(x_percent > 0.0 && x_percent < 100.0) {
        return Err(CurateError::Percent(x_percent));
    }
    let conf = label_confidences(probs, labels)?;
    let count = percentile_count(labels.len(), x_percent);
    let mut order: Vec<usize> = (0..labels.len()).collect();
    ascending(&mut order, &conf);
    let mut flags = vec![false; labels.len()];
    for &i in &order[..count] {
        flags[i] = true;
    }
    Ok(CurationReport::new("conf", probs.n_classes(), entries(probs.row_ids(), labels, &conf, &flags)))
}

/// Suggests a label for every flagged sample: the most common label among
/// its `k` nearest neighbors that are not flagged themselves. Ties go to the
/// larger summed similarity, then the lower class. Samples whose neighbors
/// are all flagged stay unresolved.
pub fn knn_relabel(
    matrix: &EmbeddingMatrix,
    labels: &[usize],
    report: &CurationReport,
    k: usize,
) -> Result<CurationReport, CurateError> {
    check_len("labels", matrix.n_rows(), labels.len())?;
    check_len("report rows", matrix.n_rows(), report.len())?;
    for (row, (id, e)) in matrix.row_ids().iter().zip(&report.entries).enumerate() {
        if *id != e.sample_id {
            return Err(CurateError::Misaligned { row, left: id.clone(), right: e.sample_id.clone() });
        }
    }
    let classes = report.n_classes.max(n_classes_of(labels));
    let flagged = report.flagged_indices();
    let mut out = report.clone();
    out.n_classes = classes;
    if flagged.is_empty() {
        return Ok(out);
    }
    let neighbors = knn_query(matrix, &flagged, k)?;
    let mut votes = vec![0usize; classes];
    let mut weight = vec![0.0f64; classes];
    for (&i, nl) in flagged.iter().zip(&neighbors) {
        votes.iter_mut().for_each(|v| *v = 0);
        weight.iter_mut().for_each(|w| *w = 0.0);
        for nb in nl.iter().filter(|nb| !report.entries[nb.index].flag) {
            votes[labels[nb.index]] += 1;
            weight[labels[nb.index]] += nb.similarity;
        }
        let mut best: Option<usize> = None;
        for c in 0..classes {
            if votes[c] == 0 {
                continue;
            }
            let better = match best {
                None => true,
                Some(b) => votes[c] > votes[b] || (votes[c] == votes[b] && weight[c] > weight[b]),
            };
            if better {
                best = Some(c);
            }
        }
        out.entries[i].suggested_label = best;
    }
    Ok(out)
}
