//! Noise transition estimation from nearest-neighbor label consensus.
//!
//! For each anchor we take pairs of its cosine nearest neighbors, forming
//! tuples `(anchor, nn1, nn2)`, `(anchor, nn3, nn4)` and so on, and assume
//! every member of a tuple shares one true class. The empirical frequencies of
//! their noisy labels (first, second and third order) are then matched
//! against the frequencies implied by a prior `p` and a transition matrix
//! `T`:
//!
//! ```text
//! nu1[j]     = sum_i p_i T[i][j]
//! nu2[j,k]   = sum_i p_i T[i][j] T[i][k]
//! nu3[j,k,l] = sum_i p_i T[i][j] T[i][k] T[i][l]
//! ```
//!
//! The squared residual is minimized by projected gradient descent, with
//! `p` kept on the simplex and every row of `T` kept row-stochastic.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::CurateError;
use crate::embedstore::{knn_query, EmbeddingMatrix};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionEstimate {
    /// `t[i][j]` = P(observed label j | true label i).
    pub t: Vec<Vec<f64>>,
    /// P(true label i).
    pub prior: Vec<f64>,
    /// Final squared consensus residual.
    pub residual: f64,
    pub iterations: usize,
    /// False when the optimizer hit its iteration cap; the estimate is then
    /// the best iterate seen.
    pub converged: bool,
    pub tuples: usize,
}

pub const STOCHASTIC_TOLERANCE: f64 = 1e-6;

impl TransitionEstimate {
    /// A known matrix and prior, checked for row-stochasticity.
    pub fn from_parts(t: Vec<Vec<f64>>, prior: Vec<f64>) -> Result<Self, CurateError> {
        let est = TransitionEstimate { t, prior, residual: 0.0, iterations: 0, converged: true, tuples: 0 };
        est.validate()?;
        Ok(est)
    }

    pub fn identity(k: usize) -> Self {
        let t = (0..k).map(|i| (0..k).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
        TransitionEstimate { t, prior: vec![1.0 / k as f64; k], residual: 0.0, iterations: 0, converged: true, tuples: 0 }
    }

    /// Symmetric flipping: `1 - rate` on the diagonal, the rest spread evenly.
    pub fn symmetric(k: usize, rate: f64) -> Self {
        let off = if k > 1 { rate / (k - 1) as f64 } else { 0.0 };
        let t = (0..k).map(|i| (0..k).map(|j| if i == j { 1.0 - rate } else { off }).collect()).collect();
        TransitionEstimate { t, prior: vec![1.0 / k as f64; k], residual: 0.0, iterations: 0, converged: true, tuples: 0 }
    }

    pub fn n_classes(&self) -> usize {
        self.prior.len()
    }

    pub fn validate(&self) -> Result<(), CurateError> {
        let k = self.prior.len();
        let bad = |msg: String| Err(CurateError::InvalidEstimate(msg));
        if k == 0 {
            return bad("empty prior".into());
        }
        if self.t.len() != k || self.t.iter().any(|r| r.len() != k) {
            return bad(format!("transition matrix must be {k}x{k}"));
        }
        let in_unit = |v: f64| v.is_finite() && (0.0..=1.0).contains(&v);
        for (i, row) in self.t.iter().enumerate() {
            if !row.iter().all(|&v| in_unit(v)) {
                return bad(format!("row {i} has entries outside [0, 1]"));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > STOCHASTIC_TOLERANCE {
                return bad(format!("row {i} sums to {s}"));
            }
        }
        if !self.prior.iter().all(|&v| in_unit(v)) {
            return bad("prior has entries outside [0, 1]".into());
        }
        let s: f64 = self.prior.iter().sum();
        if (s - 1.0).abs() > STOCHASTIC_TOLERANCE {
            return bad(format!("prior sums to {s}"));
        }
        Ok(())
    }

    /// P(Y = j | observed j) for each class, or `None` where no sample is
    /// expected to carry label `j`.
    pub fn label_posterior(&self) -> Vec<Option<f64>> {
        let k = self.n_classes();
        (0..k)
            .map(|j| {
                let denom: f64 = (0..k).map(|i| self.prior[i] * self.t[i][j]).sum();
                (denom > 0.0).then(|| (self.prior[j] * self.t[j][j] / denom).clamp(0.0, 1.0))
            })
            .collect()
    }

    /// Expected fraction of wrong labels: `1 - sum_j p_j T[j][j]`.
    pub fn noise_rate(&self) -> f64 {
        1.0 - (0..self.n_classes()).map(|j| self.prior[j] * self.t[j][j]).sum::<f64>()
    }

    /// Largest per-row L1 distance to another matrix of the same size.
    pub fn max_row_l1(&self, other: &[Vec<f64>]) -> f64 {
        self.t
            .iter()
            .zip(other)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorInit {
    Uniform,
    /// Start from the observed label frequencies.
    Observed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "count")]
pub enum TupleSampling {
    /// `min(N, 50 K^2)` anchors drawn with replacement.
    Default,
    /// A fixed number of anchors drawn with replacement.
    Sampled(usize),
    /// Every row is an anchor exactly once.
    AllRows,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TransitionConfig {
    pub tuples: TupleSampling,
    pub max_iters: usize,
    pub step: f64,
    /// Stop once the projected-gradient step (unit step, max norm) is below this.
    pub tolerance: f64,
    /// Diagonal of the initial transition matrix.
    pub init_diagonal: f64,
    pub init_prior: PriorInit,
    /// Minimum rows per class; `None` means `30 K` rows in total.
    pub min_samples: Option<usize>,
    /// Average the tuple statistics over all orderings of each tuple.
    pub symmetrize: bool,
    /// Neighbor pairs per anchor: tuples `(a, nn1, nn2)`, `(a, nn3, nn4)`, ...
    pub pairs_per_anchor: usize,
    pub seed: u64,
}

impl Default for TransitionConfig {
    fn default() -> Self {
        TransitionConfig {
            tuples: TupleSampling::AllRows,
            max_iters: 1500,
            step: 0.1,
            tolerance: 1e-6,
            init_diagonal: 0.8,
            init_prior: PriorInit::Uniform,
            min_samples: None,
            symmetrize: false,
            pairs_per_anchor: 5,
            seed: 0,
        }
    }
}

/// Empirical consensus frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct Consensus {
    pub k: usize,
    pub nu1: Vec<f64>,
    pub nu2: Vec<f64>,
    pub nu3: Vec<f64>,
    pub tuples: usize,
}

impl Consensus {
    /// Accumulates label statistics from `(anchor, nn1, nn2)` label triples.
    pub fn from_triples(k: usize, triples: &[[usize; 3]]) -> Self {
        let mut c = Consensus { k, nu1: vec![0.0; k], nu2: vec![0.0; k * k], nu3: vec![0.0; k * k * k], tuples: 0 };
        for &[a, b, d] in triples {
            c.nu1[a] += 1.0;
            c.nu2[a * k + b] += 1.0;
            c.nu3[(a * k + b) * k + d] += 1.0;
        }
        let n = triples.len().max(1) as f64;
        for v in c.nu1.iter_mut().chain(&mut c.nu2).chain(&mut c.nu3) {
            *v /= n;
        }
        c.tuples = triples.len();
        c
    }

    /// Like [`Consensus::from_triples`], but averages every statistic over
    /// all orderings of each triple. The model is symmetric in tuple order,
    /// so this keeps the same expectation with lower variance.
    pub fn from_triples_symmetric(k: usize, triples: &[[usize; 3]]) -> Self {
        const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        let mut c = Consensus { k, nu1: vec![0.0; k], nu2: vec![0.0; k * k], nu3: vec![0.0; k * k * k], tuples: 0 };
        for tr in triples {
            for p in PERMS {
                let (a, b, d) = (tr[p[0]], tr[p[1]], tr[p[2]]);
                c.nu1[a] += 1.0;
                c.nu2[a * k + b] += 1.0;
                c.nu3[(a * k + b) * k + d] += 1.0;
            }
        }
        let n = (6 * triples.len()).max(1) as f64;
        for v in c.nu1.iter_mut().chain(&mut c.nu2).chain(&mut c.nu3) {
            *v /= n;
        }
        c.tuples = triples.len();
        c
    }

    /// Consensus implied by a model `(p, T)`, with `t` row-major.
    pub fn implied(k: usize, p: &[f64], t: &[f64]) -> Self {
        let mut c = Consensus { k, nu1: vec![0.0; k], nu2: vec![0.0; k * k], nu3: vec![0.0; k * k * k], tuples: 0 };
        for (i, row) in t.chunks_exact(k).enumerate() {
            for j in 0..k {
                let a = p[i] * row[j];
                c.nu1[j] += a;
                for l in 0..k {
                    let b = a * row[l];
                    c.nu2[j * k + l] += b;
                    let base = (j * k + l) * k;
                    for (slot, r) in c.nu3[base..base + k].iter_mut().zip(row) {
                        *slot += b * r;
                    }
                }
            }
        }
        c
    }
}

/// Squared residual and its gradient with respect to `p` and row-major `T`.
fn loss_and_grad(emp: &Consensus, p: &[f64], t: &[f64], want_grad: bool) -> (f64, Vec<f64>, Vec<f64>) {
    let k = emp.k;
    let model = Consensus::implied(k, p, t);
    let r1: Vec<f64> = model.nu1.iter().zip(&emp.nu1).map(|(m, e)| m - e).collect();
    let r2: Vec<f64> = model.nu2.iter().zip(&emp.nu2).map(|(m, e)| m - e).collect();
    let r3: Vec<f64> = model.nu3.iter().zip(&emp.nu3).map(|(m, e)| m - e).collect();
    let loss = r1.iter().chain(&r2).chain(&r3).map(|r| r * r).sum();
    if !want_grad {
        return (loss, Vec::new(), Vec::new());
    }
    let mut gp = vec![0.0; k];
    let mut gt = vec![0.0; k * k];
    for i in 0..k {
        let row = &t[i * k..(i + 1) * k];
        let mut dp = 0.0;
        for j in 0..k {
            dp += r1[j] * row[j];
            gt[i * k + j] += r1[j] * p[i];
            for l in 0..k {
                let w2 = r2[j * k + l];
                dp += w2 * row[j] * row[l];
                gt[i * k + j] += p[i] * w2 * row[l];
                gt[i * k + l] += p[i] * w2 * row[j];
                for m in 0..k {
                    let w3 = r3[(j * k + l) * k + m];
                    dp += w3 * row[j] * row[l] * row[m];
                    gt[i * k + j] += p[i] * w3 * row[l] * row[m];
                    gt[i * k + l] += p[i] * w3 * row[j] * row[m];
                    gt[i * k + m] += p[i] * w3 * row[j] * row[l];
                }
            }
        }
        gp[i] = dp;
    }
    for g in gp.iter_mut().chain(&mut gt) {
        *g *= 2.0;
    }
    (loss, gp, gt)
}

/// Euclidean projection onto the probability simplex (sort-based).
pub fn project_simplex(v: &mut [f64]) {
    let mut u: Vec<f64> = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (i, &ui) in u.iter().enumerate() {
        cumsum += ui;
        let t = (cumsum - 1.0) / (i + 1) as f64;
        if ui - t > 0.0 {
            theta = t;
        }
    }
    for x in v.iter_mut() {
        *x = (*x - theta).max(0.0);
    }
}

fn project(k: usize, p: &mut [f64], t: &mut [f64]) {
    project_simplex(p);
    for row in t.chunks_exact_mut(k) {
        project_simplex(row);
    }
}

/// Fits `(p, T)` to empirical consensus frequencies.
pub fn fit_consensus(emp: &Consensus, cfg: &TransitionConfig) -> TransitionEstimate {
    let k = emp.k;
    let mut p = match cfg.init_prior {
        PriorInit::Uniform => vec![1.0 / k as f64; k],
        PriorInit::Observed => emp.nu1.clone(),
    };
    let off = if k > 1 { (1.0 - cfg.init_diagonal) / (k - 1) as f64 } else { 0.0 };
    let mut t: Vec<f64> =
        (0..k * k).map(|x| if x / k == x % k { if k > 1 { cfg.init_diagonal } else { 1.0 } } else { off }).collect();
    project(k, &mut p, &mut t);

    let mut step = cfg.step;
    let (mut loss, mut gp, mut gt) = loss_and_grad(emp, &p, &t, true);
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_iters {
        // stationarity: distance moved by a unit projected-gradient step
        let mut sp: Vec<f64> = p.iter().zip(&gp).map(|(x, g)| x - g).collect();
        let mut st: Vec<f64> = t.iter().zip(&gt).map(|(x, g)| x - g).collect();
        project(k, &mut sp, &mut st);
        let gap = p.iter().chain(&t).zip(sp.iter().chain(&st)).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if gap < cfg.tolerance {
            converged = true;
            break;
        }
        iterations += 1;
        let mut np: Vec<f64> = p.iter().zip(&gp).map(|(x, g)| x - step * g).collect();
        let mut nt: Vec<f64> = t.iter().zip(&gt).map(|(x, g)| x - step * g).collect();
        project(k, &mut np, &mut nt);
        let (nl, _, _) = loss_and_grad(emp, &np, &nt, false);
        if nl < loss {
            p = np;
            t = nt;
            (loss, gp, gt) = loss_and_grad(emp, &p, &t, true);
        } else {
            step *= 0.5;
            if step < f64::EPSILON * cfg.step {
                // no descent direction left at machine precision
                converged = true;
                break;
            }
        }
    }
    TransitionEstimate {
        t: t.chunks_exact(k).map(<[f64]>::to_vec).collect(),
        prior: p,
        residual: loss,
        iterations,
        converged,
        tuples: emp.tuples,
    }
}

/// Checks labels against `k` classes and returns per-class counts.
pub(crate) fn class_counts(labels: &[usize], k: usize) -> Result<Vec<usize>, CurateError> {
    let mut counts = vec![0usize; k];
    for (index, &label) in labels.iter().enumerate() {
        if label >= k {
            return Err(CurateError::LabelOutOfRange { index, label, classes: k });
        }
        counts[label] += 1;
    }
    Ok(counts)
}

/// Anchor rows for the consensus tuples.
fn anchors(n: usize, k: usize, sampling: TupleSampling, seed: u64) -> Vec<usize> {
    let count = match sampling {
        TupleSampling::AllRows => return (0..n).collect(),
        TupleSampling::Default => n.min(50 * k * k),
        TupleSampling::Sampled(c) => c,
    };
    let mut rng = seed::rng_for(seed, "curator.transition.anchors");
    (0..count).map(|_| rng.random_range(0..n)).collect()
}

/// Estimates the class-level noise transition matrix and prior from
/// features and noisy labels.
pub fn estimate_transition(
    matrix: &EmbeddingMatrix,
    labels: &[usize],
    k: usize,
    cfg: &TransitionConfig,
) -> Result<TransitionEstimate, CurateError> {
    let n = matrix.n_rows();
    if labels.len() != n {
        return Err(CurateError::LengthMismatch { what: "labels", expected: n, found: labels.len() });
    }
    if k < 2 {
        return Err(CurateError::TooFewClasses(k));
    }
    let counts = class_counts(labels, k)?;
    if let Some(class) = counts.iter().position(|&c| c == 0) {
        return Err(CurateError::MissingClass(class));
    }
    let min = cfg.min_samples.unwrap_or(30 * k);
    if n < min {
        return Err(CurateError::TooFewSamples { rows: n, min });
    }
    let rows = anchors(n, k, cfg.tuples, cfg.seed);
    let pairs = cfg.pairs_per_anchor.max(1);
    let neighbors = knn_query(matrix, &rows, (2 * pairs).min(n - 1))?;
    let triples: Vec<[usize; 3]> = rows
        .iter()
        .zip(&neighbors)
        .flat_map(|(&a, nl)| nl.chunks_exact(2).map(move |c| [labels[a], labels[c[0].index], labels[c[1].index]]))
        .collect();
    let emp = if cfg.symmetrize {
        Consensus::from_triples_symmetric(k, &triples)
    } else {
        Consensus::from_triples(k, &triples)
    };
    let est = fit_consensus(&emp, cfg);
    if !est.converged {
        log::warn!("transition fit stopped after {} iterations (residual {:.3e})", est.iterations, est.residual);
    }
    Ok(est)
}
