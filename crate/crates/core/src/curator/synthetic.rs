//! Synthetic labeled clusters with planted label noise.
//!
//! Class `i` is an isotropic Gaussian (unit variance) centered on
//! `separation / sqrt(2) * e_i`, so any two class centers are `separation`
//! standard deviations apart. Labels are then flipped by a symmetric
//! transition matrix with the given rate.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::embedstore::EmbeddingMatrix;
use crate::seed;

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterSpec {
    pub classes: usize,
    pub per_class: usize,
    pub dim: usize,
    /// Distance between class centers in standard deviations.
    pub separation: f64,
    pub noise_rate: f64,
    /// Flip exactly `round(rate * per_class)` labels per class, spread evenly
    /// over the other classes, instead of flipping each label independently.
    pub exact_flips: bool,
    pub seed: u64,
}

impl Default for ClusterSpec {
    fn default() -> Self {
        ClusterSpec { classes: 3, per_class: 1000, dim: 8, separation: 6.0, noise_rate: 0.2, exact_flips: true, seed: 0 }
    }
}

#[derive(Debug, Clone)]
pub struct ClusterData {
    pub matrix: EmbeddingMatrix,
    pub true_labels: Vec<usize>,
    pub noisy_labels: Vec<usize>,
    /// Symmetric transition matrix used to plant the noise.
    pub transition: Vec<Vec<f64>>,
}

impl ClusterData {
    pub fn corrupted(&self) -> Vec<bool> {
        self.true_labels.iter().zip(&self.noisy_labels).map(|(a, b)| a != b).collect()
    }
}

pub fn gaussian_clusters(spec: &ClusterSpec) -> ClusterData {
    assert!(spec.classes >= 2 && spec.dim >= spec.classes, "need at least 2 classes and dim >= classes");
    let k = spec.classes;
    let mut rng = seed::rng_for(spec.seed, "synthetic.points");
    let offset = spec.separation / std::f64::consts::SQRT_2;
    let mut rows = Vec::with_capacity(k * spec.per_class);
    let mut true_labels = Vec::with_capacity(k * spec.per_class);
    for c in 0..k {
        for _ in 0..spec.per_class {
            let row: Vec<f32> = (0..spec.dim)
                .map(|d| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    (z + if d == c { offset } else { 0.0 }) as f32
                })
                .collect();
            rows.push(row);
            true_labels.push(c);
        }
    }

    let mut noisy = true_labels.clone();
    let mut rng = seed::rng_for(spec.seed, "synthetic.flips");
    if spec.exact_flips {
        for c in 0..k {
            let mut members: Vec<usize> = (c * spec.per_class..(c + 1) * spec.per_class).collect();
            members.shuffle(&mut rng);
            let flips = (spec.noise_rate * spec.per_class as f64).round() as usize;
            for (n, &idx) in members[..flips].iter().enumerate() {
                // cycle through the other classes so each gets an equal share
                let shift = 1 + n % (k - 1);
                noisy[idx] = (c + shift) % k;
            }
        }
    } else {
        for label in noisy.iter_mut() {
            if rng.random::<f64>() < spec.noise_rate {
                let shift = rng.random_range(1..k);
                *label = (*label + shift) % k;
            }
        }
    }

    let off = spec.noise_rate / (k - 1) as f64;
    let transition =
        (0..k).map(|i| (0..k).map(|j| if i == j { 1.0 - spec.noise_rate } else { off }).collect()).collect();
    ClusterData {
        matrix: EmbeddingMatrix::from_rows(&rows).expect("gaussian rows are finite and non-zero"),
        true_labels,
        noisy_labels: noisy,
        transition,
    }
}
