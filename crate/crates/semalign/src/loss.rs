//! The contrastive loss stack: cosine similarity matrix, softmax probability
//! matrices, the InfoNCE pair loss, the KL soft-target loss, and their
//! weighted combination.
//!
//! Every intermediate is recorded in [`LossBreakdown`] so that training logs
//! and the CLI can expose the full computation.

use crate::similarity::SoftTargetMatrix;
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LossError {
    #[error("{side} embedding row {row} has zero norm")]
    ZeroNormRow { side: &'static str, row: usize },
    #[error("embedding shape mismatch: images {images:?} vs texts {texts:?}")]
    ShapeMismatch {
        images: (usize, usize),
        texts: (usize, usize),
    },
    #[error("soft target is {target} x {target} but batch size is {batch}")]
    TargetSizeMismatch { target: usize, batch: usize },
    #[error("soft target required when beta > 0")]
    MissingSoftTarget,
    #[error("invalid loss config: {0}")]
    InvalidConfig(&'static str),
}

/// Paired image/text embedding rows; every row must have a positive norm.
#[derive(Debug, Clone)]
pub struct EmbeddingBatch {
    images: Array2<f64>,
    texts: Array2<f64>,
}

impl EmbeddingBatch {
    pub fn new(images: Array2<f64>, texts: Array2<f64>) -> Result<EmbeddingBatch, LossError> {
        if images.dim() != texts.dim() {
            return Err(LossError::ShapeMismatch {
                images: images.dim(),
                texts: texts.dim(),
            });
        }
        for (side, m) in [("image", &images), ("text", &texts)] {
            for (row, r) in m.rows().into_iter().enumerate() {
                if r.iter().map(|v| v * v).sum::<f64>().sqrt() <= 0.0 {
                    return Err(LossError::ZeroNormRow { side, row });
                }
            }
        }
        Ok(EmbeddingBatch { images, texts })
    }

    pub fn images(&self) -> &Array2<f64> {
        &self.images
    }

    pub fn texts(&self) -> &Array2<f64> {
        &self.texts
    }

    pub fn len(&self) -> usize {
        self.images.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Loss weights and temperature. `epsilon_smooth` is added to the soft target
/// before normalization so the KL divergence stays finite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub tau: f64,
    pub alpha: f64,
    pub beta: f64,
    pub epsilon_smooth: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            tau: 0.07,
            alpha: 1.0,
            beta: 1.0,
            epsilon_smooth: 1e-6,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<(), LossError> {
        if !(self.tau > 0.0) {
            return Err(LossError::InvalidConfig("tau must be positive"));
        }
        if self.alpha < 0.0 || self.beta < 0.0 {
            return Err(LossError::InvalidConfig("alpha and beta must be nonnegative"));
        }
        if !(self.alpha + self.beta > 0.0) {
            return Err(LossError::InvalidConfig("alpha + beta must be positive"));
        }
        if !(self.epsilon_smooth > 0.0) {
            return Err(LossError::InvalidConfig("epsilon_smooth must be positive"));
        }
        Ok(())
    }
}

/// All intermediates of one loss evaluation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LossBreakdown {
    #[serde(with = "crate::util::matrix_serde")]
    pub c: Array2<f64>,
    #[serde(with = "crate::util::matrix_serde")]
    pub p_v2t: Array2<f64>,
    #[serde(with = "crate::util::matrix_serde")]
    pub p_t2v: Array2<f64>,
    pub l_v2t: f64,
    pub l_t2v: f64,
    pub l_clip: f64,
    pub l_se_v2t: f64,
    pub l_se_t2v: f64,
    pub l_se: f64,
    pub l_total: f64,
}

/// Pairwise cosine similarities: `C[i][j] = v_i . t_j / (|v_i| |t_j|)`,
/// clamped into [-1, 1] against roundoff.
pub fn cosine_matrix(batch: &EmbeddingBatch) -> Array2<f64> {
    let n = batch.len();
    let v = batch.images();
    let t = batch.texts();
    let v_norms: Vec<f64> = v
        .rows()
        .into_iter()
        .map(|r| r.iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();
    let t_norms: Vec<f64> = t
        .rows()
        .into_iter()
        .map(|r| r.iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();
    let mut c = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            let dot: f64 = v.row(i).iter().zip(t.row(j).iter()).map(|(a, b)| a * b).sum();
            c[[i, j]] = (dot / (v_norms[i] * t_norms[j])).clamp(-1.0, 1.0);
        }
    }
    c
}

fn row_softmax(m: &Array2<f64>) -> Array2<f64> {
    let mut out = m.clone();
    for mut row in out.rows_mut() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for x in row.iter_mut() {
            *x = (*x - max).exp();
            sum += *x;
        }
        for x in row.iter_mut() {
            *x /= sum;
        }
    }
    out
}

/// Row-stochastic softmax matrices at temperature `tau`: `P_v2t` over rows of
/// `C`, `P_t2v` over rows of `C` transposed.
pub fn prob_matrices(c: &Array2<f64>, tau: f64) -> (Array2<f64>, Array2<f64>) {
    assert!(tau > 0.0, "temperature must be positive");
    let scaled = c.mapv(|x| x / tau);
    let p_v2t = row_softmax(&scaled);
    let p_t2v = row_softmax(&scaled.t().to_owned());
    (p_v2t, p_t2v)
}

/// InfoNCE with the identity target: the mean negative log diagonal of each
/// probability matrix, and their average.
pub fn clip_loss(p_v2t: &Array2<f64>, p_t2v: &Array2<f64>) -> (f64, f64, f64) {
    let nll = |p: &Array2<f64>| {
        let n = p.nrows();
        -(0..n).map(|i| p[[i, i]].ln()).sum::<f64>() / n as f64
    };
    let l_v2t = nll(p_v2t);
    let l_t2v = nll(p_t2v);
    (l_v2t, l_t2v, (l_v2t + l_t2v) / 2.0)
}

fn row_normalize_smoothed(m: &Array2<f64>, epsilon: f64) -> Array2<f64> {
    let mut out = m.mapv(|x| x + epsilon);
    for mut row in out.rows_mut() {
        let sum: f64 = row.iter().sum();
        for x in row.iter_mut() {
            *x /= sum;
        }
    }
    out
}

/// Smoothed row-stochastic target: `normalize(S + epsilon)` per row. Every
/// entry is strictly positive.
pub fn soft_target(s: &SoftTargetMatrix, epsilon_smooth: f64) -> Array2<f64> {
    row_normalize_smoothed(s.values(), epsilon_smooth)
}

fn kl_divergence_rows(p: &Array2<f64>, q: &Array2<f64>) -> f64 {
    let n = p.nrows();
    let mut total = 0.0;
    for i in 0..n {
        let mut row_kl = 0.0;
        for j in 0..p.ncols() {
            let pj = p[[i, j]];
            if pj > 0.0 {
                row_kl += pj * (pj / q[[i, j]]).ln();
            }
        }
        total += row_kl;
    }
    total / n as f64
}

/// Mean per-row KL divergence from the probability matrices to the smoothed
/// soft target. The v2t side uses row-normalized `S + eps`; the t2v side uses
/// the row-normalized transpose (identical for symmetric `S`).
pub fn se_loss(
    p_v2t: &Array2<f64>,
    p_t2v: &Array2<f64>,
    s: &SoftTargetMatrix,
    epsilon_smooth: f64,
) -> (f64, f64, f64) {
    let q_v2t = row_normalize_smoothed(s.values(), epsilon_smooth);
    let q_t2v = row_normalize_smoothed(&s.values().t().to_owned(), epsilon_smooth);
    let l_se_v2t = kl_divergence_rows(p_v2t, &q_v2t);
    let l_se_t2v = kl_divergence_rows(p_t2v, &q_t2v);
    (l_se_v2t, l_se_t2v, (l_se_v2t + l_se_t2v) / 2.0)
}

/// Full loss evaluation: `L = alpha * L_clip + beta * L_se`, with every
/// intermediate recorded. `soft` may be `None` only when `beta` is zero; the
/// SE terms are then reported as zero.
pub fn total_loss(
    batch: &EmbeddingBatch,
    soft: Option<&SoftTargetMatrix>,
    cfg: &LossConfig,
) -> Result<LossBreakdown, LossError> {
    cfg.validate()?;
    if let Some(s) = soft {
        if s.n() != batch.len() {
            return Err(LossError::TargetSizeMismatch {
                target: s.n(),
                batch: batch.len(),
            });
        }
    } else if cfg.beta > 0.0 {
        return Err(LossError::MissingSoftTarget);
    }
    let c = cosine_matrix(batch);
    let (p_v2t, p_t2v) = prob_matrices(&c, cfg.tau);
    let (l_v2t, l_t2v, l_clip) = clip_loss(&p_v2t, &p_t2v);
    let (l_se_v2t, l_se_t2v, l_se) = match soft {
        Some(s) => se_loss(&p_v2t, &p_t2v, s, cfg.epsilon_smooth),
        None => (0.0, 0.0, 0.0),
    };
    let l_total = cfg.alpha * l_clip + cfg.beta * l_se;
    Ok(LossBreakdown {
        c,
        p_v2t,
        p_t2v,
        l_v2t,
        l_t2v,
        l_clip,
        l_se_v2t,
        l_se_t2v,
        l_se,
        l_total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn batch(images: Array2<f64>, texts: Array2<f64>) -> EmbeddingBatch {
        EmbeddingBatch::new(images, texts).unwrap()
    }

    fn random_batch(rng: &mut ChaCha8Rng, n: usize, d: usize) -> EmbeddingBatch {
        let images = Array2::from_shape_fn((n, d), |_| rng.gen_range(-1.0..1.0));
        let texts = Array2::from_shape_fn((n, d), |_| rng.gen_range(-1.0..1.0));
        batch(images, texts)
    }

    fn random_soft_target(rng: &mut ChaCha8Rng, n: usize) -> SoftTargetMatrix {
        let mut s = Array2::zeros((n, n));
        for i in 0..n {
            s[[i, i]] = 1.0;
            for j in (i + 1)..n {
                let v: f64 = rng.gen_range(0.0..1.0);
                s[[i, j]] = v;
                s[[j, i]] = v;
            }
        }
        SoftTargetMatrix::from_values(s).unwrap()
    }

    #[test]
    fn zero_norm_rows_are_rejected() {
        let images = array![[1.0, 0.0], [0.0, 0.0]];
        let texts = array![[1.0, 0.0], [0.0, 1.0]];
        assert_eq!(
            EmbeddingBatch::new(images, texts).unwrap_err(),
            LossError::ZeroNormRow {
                side: "image",
                row: 1
            }
        );
    }

    #[test]
    fn orthonormal_identical_rows_give_identity_cosine() {
        let m = array![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        let c = cosine_matrix(&batch(m.clone(), m));
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(c[[i, j]], if i == j { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn cosine_is_scale_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let b = random_batch(&mut rng, 4, 8);
        let c = cosine_matrix(&b);
        let scaled = batch(b.images() * 3.25, b.texts() * 0.125);
        let c2 = cosine_matrix(&scaled);
        for (a, b) in c.iter().zip(c2.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn cosine_matches_per_pair_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let b = random_batch(&mut rng, 4, 8);
        let c = cosine_matrix(&b);
        for i in 0..4 {
            for j in 0..4 {
                // Independent per-element computation.
                let vi: Vec<f64> = b.images().row(i).to_vec();
                let tj: Vec<f64> = b.texts().row(j).to_vec();
                let dot: f64 = vi.iter().zip(&tj).map(|(a, b)| a * b).sum();
                let nv = vi.iter().map(|x| x * x).sum::<f64>().sqrt();
                let nt = tj.iter().map(|x| x * x).sum::<f64>().sqrt();
                assert_abs_diff_eq!(c[[i, j]], dot / (nv * nt), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn uniform_softmax_for_constant_similarities() {
        let c = Array2::zeros((4, 4));
        let (p_v2t, p_t2v) = prob_matrices(&c, 0.3);
        for p in [&p_v2t, &p_t2v] {
            for v in p.iter() {
                assert_abs_diff_eq!(*v, 0.25, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn sharp_diagonal_concentrates_probability() {
        let c = Array2::from_diag_elem(3, 10.0);
        let (p_v2t, p_t2v) = prob_matrices(&c, 0.07);
        for i in 0..3 {
            assert!(p_v2t[[i, i]] > 0.999);
            assert!(p_t2v[[i, i]] > 0.999);
        }
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..100 {
            let n = rng.gen_range(2..9);
            let c = Array2::from_shape_fn((n, n), |_| rng.gen_range(-1.0..1.0));
            let tau = rng.gen_range(0.05..2.0);
            let (p_v2t, p_t2v) = prob_matrices(&c, tau);
            for p in [&p_v2t, &p_t2v] {
                for row in p.rows() {
                    assert_abs_diff_eq!(row.sum(), 1.0, epsilon = 1e-9);
                }
            }
        }
    }

    #[test]
    fn uniform_probabilities_give_ln_n() {
        let n = 5;
        let p = Array2::from_elem((n, n), 1.0 / n as f64);
        let (_, _, l_clip) = clip_loss(&p, &p);
        assert_abs_diff_eq!(l_clip, (n as f64).ln(), epsilon = 1e-12);
    }

    #[test]
    fn concentrated_diagonal_drives_clip_loss_to_zero() {
        let mut p = Array2::from_elem((3, 3), 1e-12);
        for i in 0..3 {
            p[[i, i]] = 1.0 - 2e-12;
        }
        let (_, _, l_clip) = clip_loss(&p, &p);
        assert!(l_clip < 1e-10);
    }

    #[test]
    fn clip_loss_matches_scalar_oracle() {
        let p = array![[0.9, 0.1], [0.2, 0.8]];
        let (l_v2t, _, _) = clip_loss(&p, &p);
        // Frozen: -(ln 0.9 + ln 0.8) / 2.
        assert_abs_diff_eq!(l_v2t, 0.164252033486018, epsilon = 1e-12);
    }

    #[test]
    fn soft_target_smooths_identity() {
        let s = SoftTargetMatrix::from_values(Array2::eye(2)).unwrap();
        let q = soft_target(&s, 1e-6);
        assert_abs_diff_eq!(q[[0, 0]], (1.0 + 1e-6) / (1.0 + 2e-6), epsilon = 1e-15);
        assert_abs_diff_eq!(q[[0, 1]], 1e-6 / (1.0 + 2e-6), epsilon = 1e-15);
    }

    #[test]
    fn all_ones_target_becomes_uniform() {
        let s = SoftTargetMatrix::from_values(Array2::ones((4, 4))).unwrap();
        let q = soft_target(&s, 1e-6);
        for v in q.iter() {
            assert_abs_diff_eq!(*v, 0.25, epsilon = 1e-12);
        }
    }

    #[test]
    fn soft_target_rows_sum_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for _ in 0..20 {
            let s = random_soft_target(&mut rng, 6);
            let q = soft_target(&s, 1e-6);
            for row in q.rows() {
                assert_abs_diff_eq!(row.sum(), 1.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn se_loss_is_zero_when_p_equals_target() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let s = random_soft_target(&mut rng, 4);
        let q = soft_target(&s, 1e-6);
        let (v, t, l) = se_loss(&q, &q, &s, 1e-6);
        assert_eq!(v, 0.0);
        assert_eq!(t, 0.0);
        assert_eq!(l, 0.0);
    }

    #[test]
    fn se_loss_large_for_uniform_p_against_identity_target() {
        let s = SoftTargetMatrix::from_values(Array2::eye(2)).unwrap();
        let p = Array2::from_elem((2, 2), 0.5);
        let (_, _, l_se) = se_loss(&p, &p, &s, 1e-6);
        assert!(l_se > 5.0, "l_se = {l_se}");
        // Frozen scalar evaluation of the same quantity.
        assert_abs_diff_eq!(l_se, 6.2146095984204415, epsilon = 1e-9);
    }

    #[test]
    fn se_loss_is_nonnegative() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        for _ in 0..100 {
            let n = rng.gen_range(2..7);
            let b = random_batch(&mut rng, n, 5);
            let c = cosine_matrix(&b);
            let (p_v2t, p_t2v) = prob_matrices(&c, 0.2);
            let s = random_soft_target(&mut rng, n);
            let (v, t, l) = se_loss(&p_v2t, &p_t2v, &s, 1e-6);
            assert!(v >= 0.0 && t >= 0.0 && l >= 0.0);
        }
    }

    #[test]
    fn beta_zero_reduces_to_weighted_clip_loss() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let b = random_batch(&mut rng, 4, 6);
        let cfg = LossConfig {
            alpha: 0.7,
            beta: 0.0,
            ..LossConfig::default()
        };
        let out = total_loss(&b, None, &cfg).unwrap();
        assert_eq!(out.l_total, 0.7 * out.l_clip);
        assert_eq!(out.l_se, 0.0);
    }

    #[test]
    fn alpha_zero_with_matching_target_gives_zero_total() {
        // Build S = identity and embeddings so sharply aligned that P matches
        // the smoothed target within numerical loss floor.
        let m = array![[10.0, 0.0], [0.0, 10.0]];
        let b = batch(m.clone(), m);
        let s = SoftTargetMatrix::from_values(Array2::eye(2)).unwrap();
        let cfg = LossConfig {
            alpha: 0.0,
            beta: 1.0,
            tau: 0.01,
            epsilon_smooth: 1e-6,
        };
        let out = total_loss(&b, Some(&s), &cfg).unwrap();
        // P concentrates on the diagonal like the target; KL small.
        assert!(out.l_total < 1e-3, "l_total = {}", out.l_total);
        // And exactly alpha-weighted: no clip contribution.
        assert_eq!(out.l_total, out.l_se);
    }

    #[test]
    fn hand_computed_two_by_two_total_loss() {
        let images = array![[1.0, 0.0, 1.0], [0.0, 1.0, 1.0]];
        let texts = array![[1.0, 0.2, 0.9], [-0.3, 1.0, 1.1]];
        let s = SoftTargetMatrix::from_values(array![[1.0, 0.4], [0.4, 1.0]]).unwrap();
        let cfg = LossConfig::default();
        let out = total_loss(&batch(images, texts), Some(&s), &cfg).unwrap();
        // Frozen from an independent scalar computation.
        assert_abs_diff_eq!(out.l_v2t, 0.001561119353612872, epsilon = 1e-10);
        assert_abs_diff_eq!(out.l_t2v, 0.0013991822270322612, epsilon = 1e-10);
        assert_abs_diff_eq!(out.l_clip, 0.0014801507903225665, epsilon = 1e-10);
        assert_abs_diff_eq!(out.l_se_v2t, 0.32704269155023935, epsilon = 1e-10);
        assert_abs_diff_eq!(out.l_se_t2v, 0.32781528839662444, epsilon = 1e-10);
        assert_abs_diff_eq!(out.l_se, 0.3274289899734319, epsilon = 1e-10);
        assert_abs_diff_eq!(out.l_total, 0.32890914076375444, epsilon = 1e-10);
    }

    #[test]
    fn missing_soft_target_with_positive_beta_is_an_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(18);
        let b = random_batch(&mut rng, 3, 4);
        assert_eq!(
            total_loss(&b, None, &LossConfig::default()).unwrap_err(),
            LossError::MissingSoftTarget
        );
    }

    #[test]
    fn constant_embeddings_give_ln_n_clip_loss() {
        let n = 6;
        let row = [0.3, -0.2, 0.9, 0.4];
        let m = Array2::from_shape_fn((n, 4), |(_, j)| row[j]);
        let out = total_loss(
            &batch(m.clone(), m),
            None,
            &LossConfig {
                beta: 0.0,
                ..LossConfig::default()
            },
        )
        .unwrap();
        assert_abs_diff_eq!(out.l_clip, (n as f64).ln(), epsilon = 1e-9);
    }

    #[test]
    fn total_loss_is_scale_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let b = random_batch(&mut rng, 5, 7);
        let s = random_soft_target(&mut rng, 5);
        let cfg = LossConfig::default();
        let base = total_loss(&b, Some(&s), &cfg).unwrap();
        let scaled = batch(b.images() * 42.0, b.texts() * 0.017);
        let out = total_loss(&scaled, Some(&s), &cfg).unwrap();
        assert_abs_diff_eq!(out.l_total, base.l_total, epsilon = 1e-10);
        assert_abs_diff_eq!(out.l_clip, base.l_clip, epsilon = 1e-10);
        assert_abs_diff_eq!(out.l_se, base.l_se, epsilon = 1e-10);
    }

    #[test]
    fn total_loss_is_permutation_equivariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        let n = 5;
        let b = random_batch(&mut rng, n, 7);
        let s = random_soft_target(&mut rng, n);
        let cfg = LossConfig::default();
        let base = total_loss(&b, Some(&s), &cfg).unwrap();

        let perm = [3usize, 0, 4, 1, 2];
        let pick = |m: &Array2<f64>| {
            Array2::from_shape_fn(m.dim(), |(i, j)| m[[perm[i], j]])
        };
        let s_perm = Array2::from_shape_fn((n, n), |(i, j)| {
            s.values()[[perm[i], perm[j]]]
        });
        let permuted = batch(pick(b.images()), pick(b.texts()));
        let s_perm = SoftTargetMatrix::from_values(s_perm).unwrap();
        let out = total_loss(&permuted, Some(&s_perm), &cfg).unwrap();
        assert_abs_diff_eq!(out.l_clip, base.l_clip, epsilon = 1e-9);
        assert_abs_diff_eq!(out.l_se, base.l_se, epsilon = 1e-9);
        assert_abs_diff_eq!(out.l_total, base.l_total, epsilon = 1e-9);
    }

    #[test]
    fn identity_target_shares_argmax_with_clip_target() {
        // With S = identity and small epsilon, the soft target rows put their
        // argmax on the diagonal, matching the one-hot CLIP target.
        let s = SoftTargetMatrix::from_values(Array2::eye(4)).unwrap();
        let q = soft_target(&s, 1e-6);
        for i in 0..4 {
            let row = q.row(i);
            let argmax = row
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap()
                .0;
            assert_eq!(argmax, i);
        }
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut cfg = LossConfig::default();
        cfg.tau = 0.0;
        assert!(cfg.validate().is_err());
        let mut cfg = LossConfig::default();
        cfg.alpha = 0.0;
        cfg.beta = 0.0;
        assert!(cfg.validate().is_err());
        let mut cfg = LossConfig::default();
        cfg.epsilon_smooth = 0.0;
        assert!(cfg.validate().is_err());
    }
}
