//! Image-to-text retrieval: candidate deduplication and Top-K accuracy by
//! cosine similarity, ties broken toward the lower candidate index.

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum RetrievalError {
    #[error("image dim {images} does not match candidate dim {candidates}")]
    DimensionMismatch { images: usize, candidates: usize },
    #[error("K = {k} outside 1..={n_candidates}")]
    KOutOfRange { k: usize, n_candidates: usize },
    #[error("gold map has {gold} entries for {images} images")]
    GoldLengthMismatch { gold: usize, images: usize },
    #[error("gold index {index} outside candidate range {n_candidates}")]
    GoldIndexOutOfRange { index: usize, n_candidates: usize },
}

/// Top-K accuracies plus the per-image rank of the gold candidate (1-based).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalResult {
    pub top_k_accuracy: BTreeMap<usize, f64>,
    pub n_images: usize,
    pub n_candidates: usize,
    pub ranks: Vec<usize>,
}

/// Deduplicates texts by exact string equality in order of first appearance.
/// Returns the candidate list and, per input, the index of its candidate.
pub fn dedupe_candidates(texts: &[String]) -> (Vec<String>, Vec<usize>) {
    let mut candidates: Vec<String> = Vec::new();
    let mut index: HashMap<&str, usize> = HashMap::new();
    let mut gold = Vec::with_capacity(texts.len());
    for t in texts {
        match index.get(t.as_str()) {
            Some(&i) => gold.push(i),
            None => {
                let i = candidates.len();
                candidates.push(t.clone());
                // Key borrows from `texts`, which outlives this function body.
                index.insert(t.as_str(), i);
                gold.push(i);
            }
        }
    }
    (candidates, gold)
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Ranks candidates per image by cosine similarity (descending, ties to the
/// lower index) and reports the fraction of images whose gold candidate lands
/// in the top K, for each K.
pub fn topk_accuracy(
    images: &Array2<f64>,
    candidates: &Array2<f64>,
    gold: &[usize],
    ks: &[usize],
) -> Result<RetrievalResult, RetrievalError> {
    if images.ncols() != candidates.ncols() {
        return Err(RetrievalError::DimensionMismatch {
            images: images.ncols(),
            candidates: candidates.ncols(),
        });
    }
    let n_images = images.nrows();
    let n_candidates = candidates.nrows();
    if gold.len() != n_images {
        return Err(RetrievalError::GoldLengthMismatch {
            gold: gold.len(),
            images: n_images,
        });
    }
    for &g in gold {
        if g >= n_candidates {
            return Err(RetrievalError::GoldIndexOutOfRange {
                index: g,
                n_candidates,
            });
        }
    }
    for &k in ks {
        if k < 1 || k > n_candidates {
            return Err(RetrievalError::KOutOfRange { k, n_candidates });
        }
    }

    let mut ranks = Vec::with_capacity(n_images);
    for (i, image) in images.rows().into_iter().enumerate() {
        let image: Vec<f64> = image.to_vec();
        let g = gold[i];
        let gold_sim = cosine(&image, &candidates.row(g).to_vec());
        // Rank = 1 + number of candidates strictly ahead under the
        // (similarity desc, index asc) ordering.
        let mut ahead = 0usize;
        for (j, cand) in candidates.rows().into_iter().enumerate() {
            if j == g {
                continue;
            }
            let sim = cosine(&image, &cand.to_vec());
            if sim > gold_sim || (sim == gold_sim && j < g) {
                ahead += 1;
            }
        }
        ranks.push(ahead + 1);
    }

    let mut top_k_accuracy = BTreeMap::new();
    for &k in ks {
        let hits = ranks.iter().filter(|&&r| r <= k).count();
        top_k_accuracy.insert(k, hits as f64 / n_images as f64);
    }
    Ok(RetrievalResult {
        top_k_accuracy,
        n_images,
        n_candidates,
        ranks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn dedupe_keeps_first_appearance_order() {
        let texts: Vec<String> = ["b", "a", "b", "c", "a"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let (candidates, gold) = dedupe_candidates(&texts);
        assert_eq!(candidates, vec!["b", "a", "c"]);
        assert_eq!(gold, vec![0, 1, 0, 2, 1]);
    }

    #[test]
    fn dedupe_counts_match_the_reference_scale() {
        // 3079 texts with 1689 distinct values keep exactly 1689 candidates.
        let mut texts = Vec::new();
        for i in 0..1689 {
            texts.push(format!("text {i}"));
        }
        for i in 0..(3079 - 1689) {
            texts.push(format!("text {}", i % 1689));
        }
        let (candidates, gold) = dedupe_candidates(&texts);
        assert_eq!(texts.len(), 3079);
        assert_eq!(candidates.len(), 1689);
        assert_eq!(gold.len(), 3079);
    }

    #[test]
    fn all_identical_texts_collapse_to_one_candidate() {
        let texts = vec!["same".to_string(); 5];
        let (candidates, gold) = dedupe_candidates(&texts);
        assert_eq!(candidates.len(), 1);
        assert!(gold.iter().all(|&g| g == 0));
    }

    #[test]
    fn nearest_neighbor_gold_gives_perfect_top1() {
        let images = array![[1.0, 0.0], [0.0, 1.0], [0.7, 0.7]];
        let candidates = array![[0.9, 0.1], [0.1, 0.9], [1.0, 1.0]];
        let result = topk_accuracy(&images, &candidates, &[0, 1, 2], &[1]).unwrap();
        assert_eq!(result.top_k_accuracy[&1], 1.0);
    }

    #[test]
    fn matches_exhaustive_sort_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..50 {
            let n = rng.gen_range(2..12);
            let c = rng.gen_range(2..20);
            let d = rng.gen_range(2..6);
            let images = Array2::from_shape_fn((n, d), |_| rng.gen_range(-1.0..1.0));
            let candidates = Array2::from_shape_fn((c, d), |_| rng.gen_range(-1.0..1.0));
            let gold: Vec<usize> = (0..n).map(|_| rng.gen_range(0..c)).collect();
            let ks: Vec<usize> = (1..=c).collect();
            let result = topk_accuracy(&images, &candidates, &gold, &ks).unwrap();

            // Oracle: full sort by (similarity desc, index asc).
            for i in 0..n {
                let img: Vec<f64> = images.row(i).to_vec();
                let mut scored: Vec<(usize, f64)> = (0..c)
                    .map(|j| (j, cosine(&img, &candidates.row(j).to_vec())))
                    .collect();
                scored.sort_by(|a, b| {
                    b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0))
                });
                let oracle_rank =
                    scored.iter().position(|(j, _)| *j == gold[i]).unwrap() + 1;
                assert_eq!(result.ranks[i], oracle_rank);
            }
        }
    }

    #[test]
    fn ties_break_toward_lower_candidate_index() {
        let images = array![[1.0, 0.0]];
        // Candidates 0 and 1 are identical; gold is candidate 1.
        let candidates = array![[2.0, 0.0], [4.0, 0.0], [0.0, 1.0]];
        let result = topk_accuracy(&images, &candidates, &[1], &[1, 2]).unwrap();
        assert_eq!(result.ranks, vec![2]);
        assert_eq!(result.top_k_accuracy[&1], 0.0);
        assert_eq!(result.top_k_accuracy[&2], 1.0);
    }

    #[test]
    fn accuracy_is_nondecreasing_and_saturates() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let images = Array2::from_shape_fn((10, 4), |_| rng.gen_range(-1.0..1.0));
        let candidates = Array2::from_shape_fn((7, 4), |_| rng.gen_range(-1.0..1.0));
        let gold: Vec<usize> = (0..10).map(|_| rng.gen_range(0..7)).collect();
        let ks: Vec<usize> = (1..=7).collect();
        let result = topk_accuracy(&images, &candidates, &gold, &ks).unwrap();
        let mut prev = 0.0;
        for k in 1..=7 {
            let acc = result.top_k_accuracy[&k];
            assert!(acc >= prev);
            prev = acc;
        }
        assert_eq!(result.top_k_accuracy[&7], 1.0);
    }

    #[test]
    fn ranking_is_invariant_under_row_rescaling() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let images = Array2::from_shape_fn((6, 5), |_| rng.gen_range(-1.0..1.0));
        let mut candidates = Array2::from_shape_fn((9, 5), |_| rng.gen_range(-1.0..1.0));
        let gold: Vec<usize> = (0..6).map(|_| rng.gen_range(0..9)).collect();
        let base = topk_accuracy(&images, &candidates, &gold, &[1, 2, 5]).unwrap();
        for (i, mut row) in candidates.rows_mut().into_iter().enumerate() {
            let scale = 0.5 + i as f64;
            for v in row.iter_mut() {
                *v *= scale;
            }
        }
        let scaled = topk_accuracy(&images, &candidates, &gold, &[1, 2, 5]).unwrap();
        assert_eq!(base.ranks, scaled.ranks);
    }

    #[test]
    fn k_out_of_range_is_rejected() {
        let images = array![[1.0, 0.0]];
        let candidates = array![[1.0, 0.0], [0.0, 1.0]];
        assert_eq!(
            topk_accuracy(&images, &candidates, &[0], &[3]).unwrap_err(),
            RetrievalError::KOutOfRange {
                k: 3,
                n_candidates: 2
            }
        );
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let images = array![[1.0, 0.0, 0.0]];
        let candidates = array![[1.0, 0.0]];
        assert!(matches!(
            topk_accuracy(&images, &candidates, &[0], &[1]).unwrap_err(),
            RetrievalError::DimensionMismatch { .. }
        ));
    }
}
