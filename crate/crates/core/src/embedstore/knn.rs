//! Exact brute-force cosine k-NN.

use std::cmp::Ordering;

use rayon::prelude::*;

use super::{EmbedError, EmbeddingMatrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub similarity: f64,
}

/// Neighbors of one query row, most similar first, self excluded.
pub type NeighborList = Vec<Neighbor>;

fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum()
}

/// Cosine similarity in f64, clamped to [-1, 1]. Zero vectors give 0.
pub fn cosine(a: &[f32], b: &[f32]) -> f64 {
    let na = dot(a, a).sqrt();
    let nb = dot(b, b).sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot(a, b) / (na * nb)).clamp(-1.0, 1.0)
}

/// Higher similarity first, then lower index.
fn rank(a: &Neighbor, b: &Neighbor) -> Ordering {
    b.similarity.partial_cmp(&a.similarity).unwrap_or(Ordering::Equal).then(a.index.cmp(&b.index))
}

/// Exact top-`k` cosine neighbors for each row in `query_rows`.
///
/// Requires `1 <= k <= n_rows - 1`. Output order follows `query_rows`;
/// queries run in parallel.
pub fn knn_query(matrix: &EmbeddingMatrix, query_rows: &[usize], k: usize) -> Result<Vec<NeighborList>, EmbedError> {
    let n = matrix.n_rows();
    if k == 0 || k >= n {
        return Err(EmbedError::KOutOfRange { k, rows: n });
    }
    if let Some(&bad) = query_rows.iter().find(|&&q| q >= n) {
        return Err(EmbedError::RowOutOfRange { index: bad, rows: n });
    }
    let norms: Vec<f64> = (0..n).map(|i| dot(matrix.row(i), matrix.row(i)).sqrt()).collect();
    Ok(query_rows
        .par_iter()
        .map(|&q| {
            let qrow = matrix.row(q);
            let mut cands: Vec<Neighbor> = (0..n)
                .filter(|&j| j != q)
                .map(|j| Neighbor {
                    index: j,
                    similarity: (dot(qrow, matrix.row(j)) / (norms[q] * norms[j])).clamp(-1.0, 1.0),
                })
                .collect();
            if k < cands.len() {
                cands.select_nth_unstable_by(k - 1, rank);
                cands.truncate(k);
            }
            cands.sort_by(rank);
            cands
        })
        .collect())
}

/// Neighbors of every row.
pub fn knn_all(matrix: &EmbeddingMatrix, k: usize) -> Result<Vec<NeighborList>, EmbedError> {
    let all: Vec<usize> = (0..matrix.n_rows()).collect();
    knn_query(matrix, &all, k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn orthonormal_basis() {
        let m = EmbeddingMatrix::from_rows(&[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]]).unwrap();
        let nl = knn_query(&m, &[0], 2).unwrap();
        let idx: Vec<_> = nl[0].iter().map(|n| n.index).collect();
        assert_eq!(idx, vec![1, 2]);
        assert!(nl[0].iter().all(|n| n.similarity == 0.0));
    }

    #[test]
    fn duplicate_row_is_top1() {
        let m = EmbeddingMatrix::from_rows(&[vec![1.0, 2.0], vec![-1.0, 0.5], vec![1.0, 2.0], vec![3.0, 0.1]]).unwrap();
        let nl = knn_query(&m, &[0], 1).unwrap();
        assert_eq!(nl[0][0].index, 2);
        assert!((nl[0][0].similarity - 1.0).abs() < 1e-12);
    }

    #[test]
    fn k_range() {
        let m = EmbeddingMatrix::from_rows(&[vec![1.0], vec![2.0]]).unwrap();
        assert!(knn_query(&m, &[0], 1).is_ok());
        assert!(matches!(knn_query(&m, &[0], 2), Err(EmbedError::KOutOfRange { .. })));
        assert!(matches!(knn_query(&m, &[0], 0), Err(EmbedError::KOutOfRange { .. })));
        assert!(matches!(knn_query(&m, &[5], 1), Err(EmbedError::RowOutOfRange { .. })));
    }

    #[test]
    fn ties_prefer_lower_index() {
        let m = EmbeddingMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 1.0], vec![0.0, 1.0]]).unwrap();
        let nl = knn_query(&m, &[0], 2).unwrap();
        assert_eq!(nl[0].iter().map(|n| n.index).collect::<Vec<_>>(), vec![1, 2]);
    }

    #[test]
    fn matches_quadratic_oracle() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let rows: Vec<Vec<f32>> = (0..200)
            .map(|_| {
                let v: Vec<f32> = (0..16).map(|_| rng.random_range(-1.0f32..1.0)).collect();
                let n = v.iter().map(|x| x * x).sum::<f32>().sqrt();
                v.iter().map(|x| x / n).collect()
            })
            .collect();
        let m = EmbeddingMatrix::from_rows(&rows).unwrap();
        let got = knn_all(&m, 10).unwrap();
        for (q, nl) in got.iter().enumerate() {
            // oracle: full sort of all pairwise cosines
            let mut all: Vec<(usize, f64)> = (0..rows.len())
                .filter(|&j| j != q)
                .map(|j| {
                    let d: f64 = rows[q].iter().zip(&rows[j]).map(|(a, b)| *a as f64 * *b as f64).sum();
                    let na: f64 = rows[q].iter().map(|a| (*a as f64).powi(2)).sum::<f64>().sqrt();
                    let nb: f64 = rows[j].iter().map(|a| (*a as f64).powi(2)).sum::<f64>().sqrt();
                    (j, d / (na * nb))
                })
                .collect();
            all.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
            let want: Vec<usize> = all[..10].iter().map(|p| p.0).collect();
            let have: Vec<usize> = nl.iter().map(|n| n.index).collect();
            assert_eq!(have, want, "query {q}");
        }
    }

    proptest! {
        #[test]
        fn cosine_symmetric_and_self_one(a in proptest::collection::vec(-10.0f32..10.0, 4),
                                         b in proptest::collection::vec(-10.0f32..10.0, 4)) {
            prop_assume!(a.iter().any(|&x| x.abs() > 1e-3) && b.iter().any(|&x| x.abs() > 1e-3));
            prop_assert!((cosine(&a, &b) - cosine(&b, &a)).abs() <= 1e-6);
            prop_assert!((cosine(&a, &a) - 1.0).abs() <= 1e-6);
        }

        #[test]
        fn neighbor_sets_scale_free(seed in 0u64..1000, scale in 0.1f32..10.0) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let rows: Vec<Vec<f32>> = (0..40).map(|_| (0..6).map(|_| rng.random_range(-1.0f32..1.0)).collect()).collect();
            let m = EmbeddingMatrix::from_rows(&rows).unwrap();
            let s = m.scaled(scale).unwrap();
            let a = knn_all(&m, 5).unwrap();
            let b = knn_all(&s, 5).unwrap();
            for (x, y) in a.iter().zip(&b) {
                let mut xs: Vec<_> = x.iter().map(|n| n.index).collect();
                let mut ys: Vec<_> = y.iter().map(|n| n.index).collect();
                xs.sort();
                ys.sort();
                prop_assert_eq!(xs, ys);
            }
        }
    }
}
