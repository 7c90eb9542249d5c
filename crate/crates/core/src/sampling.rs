//! The round's action distribution, its prefix marginals, and top-k feedback.
//!
//! A round plays the deterministic ranking `sigma_t` with probability
//! `1 - gamma` and a uniformly random ranking otherwise, so
//! `P(sigma) = (1 - gamma) 1(sigma = sigma_t) + gamma / m!`. The estimators
//! in [`crate::surrogates`] divide by prefix marginals of this law;
//! [`prefix_marginal`] computes them in closed form for the mixture and by
//! summation for explicit tables.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{invalid_input, Error, Result};
use crate::math;
use crate::types::{factorial, Permutation, RelevanceVector, ScoreVector};

/// Largest `m` for which an explicit table over `S_m` may be built.
pub const MAX_TABLE_DOCS: usize = 8;

const TABLE_SUM_TOLERANCE: f64 = 1e-12;

/// A probability law over rankings of `m` documents.
#[derive(Debug, Clone, PartialEq)]
pub enum PermutationDistribution {
    /// `(1 - gamma) 1(sigma = exploit) + gamma / m!`.
    Mixture { exploit: Permutation, gamma: f64 },
    /// One probability per permutation, in lexicographic order of `S_m`.
    Table { num_docs: usize, probs: Vec<f64> },
}

impl PermutationDistribution {
    pub fn mixture(exploit: Permutation, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "exploration rate must lie in (0, 1), got {gamma}"
            )));
        }
        Ok(Self::Mixture { exploit, gamma })
    }

    pub fn explicit_table(num_docs: usize, probs: Vec<f64>) -> Result<Self> {
        if num_docs == 0 || num_docs > MAX_TABLE_DOCS {
            return Err(Error::Unsupported(format!(
                "explicit tables need 1 <= m <= {MAX_TABLE_DOCS}, got {num_docs}"
            )));
        }
        if probs.len() != factorial(num_docs) {
            return Err(invalid_input!(
                "table for m={num_docs} needs {} entries, got {}",
                factorial(num_docs),
                probs.len()
            ));
        }
        if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(invalid_input!("table probabilities must be finite and nonnegative"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > TABLE_SUM_TOLERANCE {
            return Err(invalid_input!("table probabilities sum to {total}, not 1"));
        }
        Ok(Self::Table { num_docs, probs })
    }

    /// Builds a table by evaluating `weight` on every permutation.
    pub fn from_fn(num_docs: usize, mut weight: impl FnMut(&Permutation) -> f64) -> Result<Self> {
        if num_docs == 0 || num_docs > MAX_TABLE_DOCS {
            return Err(Error::Unsupported(format!(
                "explicit tables need 1 <= m <= {MAX_TABLE_DOCS}, got {num_docs}"
            )));
        }
        let probs = Permutation::all(num_docs).map(|p| weight(&p)).collect();
        Self::explicit_table(num_docs, probs)
    }

    pub fn uniform(num_docs: usize) -> Result<Self> {
        let p = 1.0 / factorial(num_docs.min(MAX_TABLE_DOCS + 1)) as f64;
        Self::from_fn(num_docs, |_| p)
    }

    pub fn point_mass(perm: &Permutation) -> Result<Self> {
        Self::from_fn(perm.len(), |p| if p == perm { 1.0 } else { 0.0 })
    }

    pub fn num_docs(&self) -> usize {
        match self {
            Self::Mixture { exploit, .. } => exploit.len(),
            Self::Table { num_docs, .. } => *num_docs,
        }
    }

    pub fn probability(&self, perm: &Permutation) -> f64 {
        if perm.len() != self.num_docs() {
            return 0.0;
        }
        match self {
            Self::Mixture { exploit, gamma } => {
                let uniform = gamma / factorial(exploit.len()) as f64;
                if perm == exploit {
                    1.0 - gamma + uniform
                } else {
                    uniform
                }
            }
            Self::Table { probs, .. } => probs[perm.lex_index()],
        }
    }

    /// The same law as an explicit table (mixture mode needs `m <= 8`).
    pub fn to_table(&self) -> Result<Self> {
        match self {
            Self::Table { .. } => Ok(self.clone()),
            Self::Mixture { exploit, .. } => Self::from_fn(exploit.len(), |p| self.probability(p)),
        }
    }
}

/// Draws the played score vector: `s_det` with probability `1 - gamma`,
/// otherwise a fresh uniform draw from `[0, 1]^m`. Returns whether the round
/// explored.
pub fn sample_action<R: Rng + ?Sized>(
    s_det: &ScoreVector,
    gamma: f64,
    rng: &mut R,
) -> Result<(ScoreVector, bool)> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "exploration rate must lie in (0, 1), got {gamma}"
        )));
    }
    let u: f64 = rng.gen();
    if u < gamma {
        Ok((uniform_scores(s_det.len(), rng), true))
    } else {
        Ok((s_det.clone(), false))
    }
}

/// `m` independent uniform scores in `[0, 1)`.
pub fn uniform_scores<R: Rng + ?Sized>(m: usize, rng: &mut R) -> ScoreVector {
    ScoreVector::new((0..m).map(|_| rng.gen::<f64>()).collect()).expect("uniform draws are finite")
}

fn check_prefix(prefix: &[usize], m: usize) -> Result<()> {
    if prefix.is_empty() || prefix.len() > m {
        return Err(invalid_input!("prefix length {} outside 1..={m}", prefix.len()));
    }
    let mut seen = vec![false; m];
    for &doc in prefix {
        if doc >= m {
            return Err(invalid_input!("document {doc} out of range for m={m}"));
        }
        if seen[doc] {
            return Err(invalid_input!("document {doc} repeated in prefix {prefix:?}"));
        }
        seen[doc] = true;
    }
    Ok(())
}

/// `p(j_1, ..., j_k)`: the probability that the top `k` ranks hold exactly
/// `prefix`, in order.
pub fn prefix_marginal(dist: &PermutationDistribution, prefix: &[usize]) -> Result<f64> {
    let m = dist.num_docs();
    check_prefix(prefix, m)?;
    Ok(match dist {
        PermutationDistribution::Mixture { exploit, gamma } => {
            let hit = if exploit.starts_with(prefix) { 1.0 } else { 0.0 };
            (1.0 - gamma) * hit + gamma / math::falling_factorial(m, prefix.len())
        }
        PermutationDistribution::Table { num_docs, probs } => Permutation::all(*num_docs)
            .zip(probs)
            .filter(|(perm, _)| perm.starts_with(prefix))
            .map(|(_, p)| p)
            .sum(),
    })
}

/// `p(i, j) + p(j, i)`: the probability that `{i, j}` occupies the top two
/// ranks in either order.
pub fn pair_marginal_sum(dist: &PermutationDistribution, i: usize, j: usize) -> Result<f64> {
    if i == j {
        return Err(invalid_input!("pair marginal needs two distinct documents, got {i} twice"));
    }
    Ok(prefix_marginal(dist, &[i, j])? + prefix_marginal(dist, &[j, i])?)
}

/// Read access to a round's relevance grades.
///
/// Feedback extraction reads single grades through [`grade`](Self::grade);
/// [`full`](Self::full) exists for evaluation outside the learner's update.
pub trait RelevanceOracle {
    fn num_docs(&self) -> usize;
    fn grade(&self, doc: usize) -> u32;
    fn full(&self) -> &RelevanceVector;
}

impl RelevanceOracle for RelevanceVector {
    fn num_docs(&self) -> usize {
        self.len()
    }

    fn grade(&self, doc: usize) -> u32 {
        RelevanceVector::grade(self, doc)
    }

    fn full(&self) -> &RelevanceVector {
        self
    }
}

/// The played ranking and the grades of its top `k` documents; the only
/// relevance information the learner's update sees.
#[derive(Debug, Clone, PartialEq)]
pub struct TopKFeedback {
    sampled: Permutation,
    observed: Vec<u32>,
}

impl TopKFeedback {
    pub fn sampled_perm(&self) -> &Permutation {
        &self.sampled
    }

    pub fn depth(&self) -> usize {
        self.observed.len()
    }

    /// Grade of the document at (0-based) `rank`, for `rank < depth()`.
    pub fn observed_grades(&self) -> &[u32] {
        &self.observed
    }

    /// The top-ranked documents whose grades were revealed.
    pub fn observed_docs(&self) -> &[usize] {
        &self.sampled.rank_to_doc()[..self.observed.len()]
    }
}

/// Reveals `R` at the top `k` documents of `sigma`.
pub fn extract_feedback<O: RelevanceOracle + ?Sized>(
    relevance: &O,
    sigma: &Permutation,
    k: usize,
) -> Result<TopKFeedback> {
    let m = sigma.len();
    if relevance.num_docs() != m {
        return Err(invalid_input!(
            "ranking has {m} documents, relevance has {}",
            relevance.num_docs()
        ));
    }
    if k == 0 || k > m {
        return Err(invalid_input!("feedback depth {k} outside 1..={m}"));
    }
    let observed = sigma.rank_to_doc()[..k]
        .iter()
        .map(|&doc| relevance.grade(doc))
        .collect();
    Ok(TopKFeedback {
        sampled: sigma.clone(),
        observed,
    })
}
