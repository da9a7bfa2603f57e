//! Mixed syntax and semantic text similarity: token Dice coefficient, clause
//! and description similarity, and the batch soft-target matrix.
//!
//! The clause score is `0.5 * TDC(t1, t2) * (w_loc + w_per)` where `w_loc`
//! compares the (orientation, anatomic site) pair and `w_per` the appearance;
//! description similarity averages the clause scores over all clause pairs.

use crate::report::{Clause, Description, Finding};
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SimilarityError {
    #[error("clause tokenizes to zero tokens: {0:?}")]
    EmptyClause(String),
    #[error("batch of {0} descriptions is too small (need at least 2)")]
    BatchTooSmall(usize),
    #[error("soft target matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("soft target matrix is not symmetric at ({i},{j})")]
    AsymmetricTarget { i: usize, j: usize },
    #[error("soft target entry ({i},{j}) = {value} outside [0,1]")]
    EntryOutOfRange { i: usize, j: usize, value: f64 },
}

/// How clause texts are tokenized before computing the Dice overlap. Word
/// mode suits space-separated text; character mode is provided for scripts
/// without word boundaries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizerConfig {
    pub mode: TokenizerMode,
    pub lowercase: bool,
    pub strip_punctuation: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TokenizerMode {
    Word,
    Character,
}

impl Default for TokenizerConfig {
    fn default() -> Self {
        TokenizerConfig {
            mode: TokenizerMode::Word,
            lowercase: true,
            strip_punctuation: true,
        }
    }
}

const PUNCTUATION: [char; 10] = ['.', ',', ';', ':', '!', '?', '(', ')', '"', '\''];

/// Splits a clause text into comparison tokens per the config.
pub fn tokenize(text: &str, cfg: &TokenizerConfig) -> Vec<String> {
    let lowered;
    let text = if cfg.lowercase {
        lowered = text.to_lowercase();
        &lowered
    } else {
        text
    };
    match cfg.mode {
        TokenizerMode::Word => text
            .split_whitespace()
            .map(|w| {
                if cfg.strip_punctuation {
                    w.chars().filter(|c| !PUNCTUATION.contains(c)).collect()
                } else {
                    w.to_string()
                }
            })
            .filter(|w: &String| !w.is_empty())
            .collect(),
        TokenizerMode::Character => text
            .chars()
            .filter(|c| !c.is_whitespace())
            .filter(|c| !(cfg.strip_punctuation && PUNCTUATION.contains(c)))
            .map(|c| c.to_string())
            .collect(),
    }
}

fn token_counts(tokens: &[String]) -> HashMap<&str, usize> {
    let mut counts = HashMap::new();
    for t in tokens {
        *counts.entry(t.as_str()).or_insert(0) += 1;
    }
    counts
}

/// Token Dice coefficient `2|t1 ∩ t2| / (|t1| + |t2|)` where the overlap is
/// the multiset token intersection (per-token minimum of occurrence counts).
pub fn tdc(t1: &str, t2: &str, cfg: &TokenizerConfig) -> Result<f64, SimilarityError> {
    let a = tokenize(t1, cfg);
    let b = tokenize(t2, cfg);
    if a.is_empty() {
        return Err(SimilarityError::EmptyClause(t1.to_string()));
    }
    if b.is_empty() {
        return Err(SimilarityError::EmptyClause(t2.to_string()));
    }
    let counts_a = token_counts(&a);
    let counts_b = token_counts(&b);
    let mut overlap = 0usize;
    for (token, ca) in &counts_a {
        if let Some(cb) = counts_b.get(token) {
            overlap += (*ca).min(*cb);
        }
    }
    Ok(2.0 * overlap as f64 / (a.len() + b.len()) as f64)
}

fn w_loc(c1: &Clause, c2: &Clause) -> f64 {
    match (&c1.finding, &c2.finding) {
        (None, None) => 1.0,
        (Some(f1), Some(f2)) => {
            if f1.orientation == f2.orientation && f1.anatomic_site == f2.anatomic_site {
                1.0
            } else {
                0.0
            }
        }
        // Sentinel normal clauses match only other sentinel clauses.
        _ => 0.0,
    }
}

fn w_per(c1: &Clause, c2: &Clause) -> f64 {
    match (&c1.finding, &c2.finding) {
        (None, None) => 1.0,
        (Some(f1), Some(f2)) => {
            if f1.appearance == f2.appearance {
                1.0
            } else {
                0.0
            }
        }
        _ => 0.0,
    }
}

/// Mixed syntax and semantic similarity of two clauses:
/// `0.5 * TDC * (w_loc + w_per)`.
pub fn clause_similarity(
    c1: &Clause,
    c2: &Clause,
    cfg: &TokenizerConfig,
) -> Result<f64, SimilarityError> {
    let dice = tdc(&c1.text, &c2.text, cfg)?;
    Ok(0.5 * dice * (w_loc(c1, c2) + w_per(c1, c2)))
}

type ClauseKey<'a> = (&'a str, Option<&'a Finding>);

fn clause_keys(d: &Description) -> Vec<ClauseKey<'_>> {
    d.clauses
        .iter()
        .map(|c| (c.text.as_str(), c.finding.as_ref()))
        .collect()
}

/// Mean clause similarity over all m*n clause pairs.
///
/// Clause pairs are summed with the first argument's clauses in the outer
/// loop; arguments are first put in a canonical order so that swapping them
/// reproduces the exact same floating-point sum.
pub fn description_similarity(
    a: &Description,
    b: &Description,
    cfg: &TokenizerConfig,
) -> Result<f64, SimilarityError> {
    let (x, y) = if clause_keys(b) < clause_keys(a) {
        (b, a)
    } else {
        (a, b)
    };
    let m = x.clauses.len();
    let n = y.clauses.len();
    let mut sum = 0.0;
    for ci in &x.clauses {
        for cj in &y.clauses {
            sum += clause_similarity(ci, cj, cfg)?;
        }
    }
    Ok(sum / (m * n) as f64)
}

/// N x N soft target built from pairwise description similarities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftTargetMatrix {
    #[serde(with = "crate::util::matrix_serde")]
    values: Array2<f64>,
    n: usize,
}

impl SoftTargetMatrix {
    /// Wraps an externally built symmetric matrix with entries in [0,1].
    pub fn from_values(values: Array2<f64>) -> Result<SoftTargetMatrix, SimilarityError> {
        let (rows, cols) = values.dim();
        if rows != cols {
            return Err(SimilarityError::NotSquare { rows, cols });
        }
        for i in 0..rows {
            for j in 0..cols {
                let v = values[[i, j]];
                if !(0.0..=1.0).contains(&v) {
                    return Err(SimilarityError::EntryOutOfRange { i, j, value: v });
                }
                if values[[i, j]] != values[[j, i]] {
                    return Err(SimilarityError::AsymmetricTarget { i, j });
                }
            }
        }
        Ok(SoftTargetMatrix { values, n: rows })
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn n(&self) -> usize {
        self.n
    }
}

/// Pairwise description-similarity matrix over a batch. The upper triangle is
/// computed and mirrored; `description_similarity` is exactly symmetric, so
/// the result matches the per-pair definition in both orders.
pub fn batch_similarity_matrix(
    batch: &[Description],
    cfg: &TokenizerConfig,
) -> Result<SoftTargetMatrix, SimilarityError> {
    let n = batch.len();
    if n < 2 {
        return Err(SimilarityError::BatchTooSmall(n));
    }
    let mut values = Array2::zeros((n, n));
    for i in 0..n {
        for j in i..n {
            let s = description_similarity(&batch[i], &batch[j], cfg)?;
            values[[i, j]] = s;
            values[[j, i]] = s;
        }
    }
    Ok(SoftTargetMatrix { values, n })
}
