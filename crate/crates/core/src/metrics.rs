//! NDCG@k and its pieces.
//!
//! Gains are `G(r) = 2^r - 1` and discounts `D(i) = 1 / log2(i + 1)` for the
//! 1-based rank `i`; `log2` is evaluated as `ln(i + 1) / ln 2`.

use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::{invalid_input, Result};
use crate::math;
use crate::types::{Permutation, RelevanceVector};

/// `G(r) = 2^r - 1`.
pub fn gain(grade: u32) -> f64 {
    if grade < 63 {
        ((1u64 << grade) - 1) as f64
    } else {
        math::powf(2.0, f64::from(grade)) - 1.0
    }
}

/// `D(i) = 1 / log2(i + 1)` for a 1-based rank `i`.
pub fn discount(rank: usize) -> f64 {
    core::f64::consts::LN_2 / math::ln((rank + 1) as f64)
}

/// Ranks documents by descending score; ties go to the lower document index.
pub fn argsort_desc(scores: &[f64]) -> Result<Permutation> {
    if scores.is_empty() {
        return Err(invalid_input!("cannot sort an empty score vector"));
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(invalid_input!("non-finite score at document {i}"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    // stable sort, so equal scores keep ascending index order
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap_or(Ordering::Equal)
    });
    Permutation::from_rank_to_doc(order)
}

fn check_cutoff(k: usize, m: usize) -> Result<()> {
    if k == 0 || k > m {
        return Err(invalid_input!("cutoff k={k} outside 1..={m}"));
    }
    Ok(())
}

/// DCG@k of the ranking `perm`.
pub fn dcg_at_k(perm: &Permutation, relevance: &RelevanceVector, k: usize) -> Result<f64> {
    if perm.len() != relevance.len() {
        return Err(invalid_input!(
            "ranking has {} documents, relevance has {}",
            perm.len(),
            relevance.len()
        ));
    }
    check_cutoff(k, perm.len())?;
    Ok(perm.rank_to_doc()[..k]
        .iter()
        .enumerate()
        .map(|(rank, &doc)| gain(relevance.grade(doc)) * discount(rank + 1))
        .sum())
}

/// Ideal DCG@k: the DCG of the grades sorted in descending order.
pub fn z_k(relevance: &RelevanceVector, k: usize) -> Result<f64> {
    check_cutoff(k, relevance.len())?;
    let mut grades = relevance.grades().to_vec();
    grades.sort_unstable_by(|a, b| b.cmp(a));
    Ok(grades[..k]
        .iter()
        .enumerate()
        .map(|(rank, &g)| gain(g) * discount(rank + 1))
        .sum())
}

/// NDCG@k of an explicit ranking. All-irrelevant queries score 0.
pub fn ndcg_of_ranking(perm: &Permutation, relevance: &RelevanceVector, k: usize) -> Result<f64> {
    let dcg = dcg_at_k(perm, relevance, k)?;
    let ideal = z_k(relevance, k)?;
    Ok(if ideal > 0.0 { dcg / ideal } else { 0.0 })
}

/// NDCG@k of the ranking induced by `scores`.
pub fn ndcg_at_k(scores: &[f64], relevance: &RelevanceVector, k: usize) -> Result<f64> {
    if scores.len() != relevance.len() {
        return Err(invalid_input!(
            "{} scores for {} grades",
            scores.len(),
            relevance.len()
        ));
    }
    ndcg_of_ranking(&argsort_desc(scores)?, relevance, k)
}
