//! Evaluation helpers: detection precision/recall/F1, per-class accuracy,
//! delta-worst accuracy over a KL ball around the uniform class weighting,
//! and post-hoc logit adjustment.

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum EvalError {
    #[error("{what}: lengths differ ({left} vs {right})")]
    Length { what: &'static str, left: usize, right: usize },
    #[error("need at least 2 classes, got {0}")]
    TooFewClasses(usize),
    #[error("accuracy {value} of class {class} is outside [0, 1]")]
    AccuracyRange { class: usize, value: f64 },
    #[error("delta must be non-negative, got {0}")]
    Delta(f64),
    #[error("label {label} at row {row} is outside 0..{classes}")]
    Label { row: usize, label: usize, classes: usize },
    #[error("prior entry {index} is {value}; entries must be positive and sum to 1")]
    Prior { index: usize, value: f64 },
    #[error("bisection bracket failed: KL ranges over [{kl_hi_tau:e}, {kl_lo_tau:e}] on the tau bracket, target {delta:e}")]
    Bracket { delta: f64, kl_lo_tau: f64, kl_hi_tau: f64 },
}

/// A ratio that may have an empty denominator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "state", content = "value")]
pub enum Metric {
    Defined(f64),
    /// Empty denominator. Distinct from zero.
    Undefined,
}

impl Metric {
    pub fn ratio(num: usize, den: usize) -> Metric {
        if den == 0 {
            Metric::Undefined
        } else {
            Metric::Defined(num as f64 / den as f64)
        }
    }

    pub fn value(self) -> Option<f64> {
        match self {
            Metric::Defined(v) => Some(v),
            Metric::Undefined => None,
        }
    }
}

/// Flags from a detector next to the ground truth of which labels are wrong.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DetectionOutcome {
    flags: Vec<bool>,
    corrupted: Vec<bool>,
}

impl DetectionOutcome {
    pub fn new(flags: Vec<bool>, corrupted: Vec<bool>) -> Result<Self, EvalError> {
        if flags.len() != corrupted.len() {
            return Err(EvalError::Length { what: "flags and corruption indicators", left: flags.len(), right: corrupted.len() });
        }
        Ok(DetectionOutcome { flags, corrupted })
    }

    /// Corruption indicators from noisy and true labels.
    pub fn from_labels(flags: Vec<bool>, noisy: &[usize], truth: &[usize]) -> Result<Self, EvalError> {
        if noisy.len() != truth.len() {
            return Err(EvalError::Length { what: "noisy and true labels", left: noisy.len(), right: truth.len() });
        }
        Self::new(flags, noisy.iter().zip(truth).map(|(a, b)| a != b).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: Metric,
    pub recall: Metric,
    pub f1: Metric,
    pub hits: usize,
    pub flagged: usize,
    pub corrupted: usize,
}

pub fn detection_prf(outcome: &DetectionOutcome) -> Prf {
    let flagged = outcome.flags.iter().filter(|&&f| f).count();
    let corrupted = outcome.corrupted.iter().filter(|&&c| c).count();
    let hits = outcome.flags.iter().zip(&outcome.corrupted).filter(|(f, c)| **f && **c).count();
    let precision = Metric::ratio(hits, flagged);
    let recall = Metric::ratio(hits, corrupted);
    let f1 = match (precision, recall) {
        (Metric::Defined(p), Metric::Defined(r)) => Metric::Defined(if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) }),
        _ => Metric::Undefined,
    };
    Prf { precision, recall, f1, hits, flagged, corrupted }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassAccuracies {
    /// `None` for classes with no samples.
    pub per_class: Vec<Option<f64>>,
    /// Mean over non-empty classes.
    pub mean: Option<f64>,
    pub worst: Option<f64>,
    pub empty_classes: Vec<usize>,
}

pub fn class_accuracies(predictions: &[usize], truth: &[usize], k: usize) -> Result<ClassAccuracies, EvalError> {
    if predictions.len() != truth.len() {
        return Err(EvalError::Length { what: "predictions and labels", left: predictions.len(), right: truth.len() });
    }
    let mut total = vec![0usize; k];
    let mut correct = vec![0usize; k];
    for (row, (&p, &t)) in predictions.iter().zip(truth).enumerate() {
        if t >= k {
            return Err(EvalError::Label { row, label: t, classes: k });
        }
        total[t] += 1;
        correct[t] += (p == t) as usize;
    }
    let per_class: Vec<Option<f64>> =
        total.iter().zip(&correct).map(|(&n, &c)| (n > 0).then(|| c as f64 / n as f64)).collect();
    let defined: Vec<f64> = per_class.iter().flatten().copied().collect();
    let empty_classes: Vec<usize> = per_class.iter().enumerate().filter(|(_, a)| a.is_none()).map(|(i, _)| i).collect();
    if !empty_classes.is_empty() {
        log::warn!("classes without samples: {empty_classes:?}");
    }
    Ok(ClassAccuracies {
        mean: (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64),
        worst: defined.iter().copied().reduce(f64::min),
        per_class,
        empty_classes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaWorst {
    pub value: f64,
    /// Minimizing class weights.
    pub weights: Vec<f64>,
    /// Temperature of the dual solution, when one was needed.
    pub tau: Option<f64>,
}

/// KL(g || uniform) for a distribution over `g.len()` classes.
pub fn kl_to_uniform(g: &[f64]) -> f64 {
    let k = g.len() as f64;
    g.iter().filter(|&&x| x > 0.0).map(|&x| x * (x * k).ln()).sum::<f64>().max(0.0)
}

pub const TAU_MIN: f64 = 1e-8;
pub const TAU_MAX: f64 = 1e8;
pub const KL_TOLERANCE: f64 = 1e-10;

fn gibbs(acc: &[f64], min: f64, tau: f64) -> Vec<f64> {
    let w: Vec<f64> = acc.iter().map(|&a| (-(a - min) / tau).exp()).collect();
    let s: f64 = w.iter().sum();
    w.iter().map(|x| x / s).collect()
}

fn dot(g: &[f64], acc: &[f64]) -> f64 {
    g.iter().zip(acc).map(|(a, b)| a * b).sum()
}

/// `min_g sum_i g_i acc_i` subject to `KL(g || u) <= delta` over the simplex.
///
/// The minimizer has the form `g_i ∝ exp(-acc_i / tau)`; `tau` is found by
/// bisection on `ln tau` so the KL constraint is active. `delta = 0` gives the
/// mean and `delta >= ln K` the worst class (point mass on the lowest-index
/// minimizer). When several classes tie for the minimum, any `delta` of at
/// least `ln(K / ties)` already reaches the minimum with weights uniform over
/// the tied classes.
pub fn delta_worst_accuracy(acc: &[f64], delta: f64) -> Result<DeltaWorst, EvalError> {
    let k = acc.len();
    if k < 2 {
        return Err(EvalError::TooFewClasses(k));
    }
    if let Some((class, &value)) = acc.iter().enumerate().find(|(_, a)| !(0.0..=1.0).contains(*a)) {
        return Err(EvalError::AccuracyRange { class, value });
    }
    if delta.is_nan() || delta < 0.0 {
        return Err(EvalError::Delta(delta));
    }
    let uniform = vec![1.0 / k as f64; k];
    let min = acc.iter().copied().fold(f64::INFINITY, f64::min);
    let argmin = acc.iter().position(|&a| a == min).expect("non-empty");
    let ties: Vec<usize> = (0..k).filter(|&i| acc[i] == min).collect();

    if ties.len() == k {
        return Ok(DeltaWorst { value: min, weights: uniform, tau: None });
    }
    if delta == 0.0 {
        return Ok(DeltaWorst { value: acc.iter().sum::<f64>() / k as f64, weights: uniform, tau: None });
    }
    if delta >= (k as f64).ln() {
        let mut g = vec![0.0; k];
        g[argmin] = 1.0;
        return Ok(DeltaWorst { value: min, weights: g, tau: None });
    }
    if delta >= (k as f64 / ties.len() as f64).ln() {
        let mut g = vec![0.0; k];
        for &i in &ties {
            g[i] = 1.0 / ties.len() as f64;
        }
        return Ok(DeltaWorst { value: min, weights: g, tau: None });
    }

    let kl_at = |log_tau: f64| kl_to_uniform(&gibbs(acc, min, log_tau.exp()));
    let (mut lo, mut hi) = (TAU_MIN.ln(), TAU_MAX.ln());
    let (kl_lo, kl_hi) = (kl_at(lo), kl_at(hi));
    // KL falls as tau grows
    if !(kl_lo >= delta && kl_hi <= delta) {
        return Err(EvalError::Bracket { delta, kl_lo_tau: kl_lo, kl_hi_tau: kl_hi });
    }
    let mut mid = 0.5 * (lo + hi);
    for _ in 0..400 {
        mid = 0.5 * (lo + hi);
        let kl = kl_at(mid);
        if (kl - delta).abs() <= KL_TOLERANCE {
            break;
        }
        if kl > delta {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let tau = mid.exp();
    let g = gibbs(acc, min, tau);
    Ok(DeltaWorst { value: dot(&g, acc), weights: g, tau: Some(tau) })
}

/// Argmax of `logits[n][j] - tau * ln(prior[j])`, ties to the lower class.
pub fn posthoc_logit_adjust(logits: &[Vec<f64>], prior: &[f64], tau: f64) -> Result<Vec<usize>, EvalError> {
    if let Some((index, &value)) = prior.iter().enumerate().find(|(_, p)| !p.is_finite() || **p <= 0.0) {
        return Err(EvalError::Prior { index, value });
    }
    if (prior.iter().sum::<f64>() - 1.0).abs() > 1e-6 {
        return Err(EvalError::Prior { index: prior.len(), value: prior.iter().sum() });
    }
    let offsets: Vec<f64> = prior.iter().map(|p| tau * p.ln()).collect();
    logits
        .iter()
        .map(|row| {
            if row.len() != prior.len() {
                return Err(EvalError::Length { what: "logit row and prior", left: row.len(), right: prior.len() });
            }
            let mut best = 0;
            let mut best_v = f64::NEG_INFINITY;
            for (j, (&l, &o)) in row.iter().zip(&offsets).enumerate() {
                let v = l - o;
                if v > best_v {
                    best_v = v;
                    best = j;
                }
            }
            Ok(best)
        })
        .collect()
}
