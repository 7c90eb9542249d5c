//! Two adversaries that top-1 feedback cannot tell apart but that call for
//! different NDCG-optimal rankings.
//!
//! The documents are fixed (`X = I`) and relevance is binary, so an adversary
//! is a distribution over `{0, 1}^m`. Under top-1 feedback the learner sees
//! `R_{pi_s(1)}`, whose law depends only on the marginals `E[R]`. The
//! NDCG-optimal ranking sorts `E[G(R) / Z_m(R)]` instead, and two
//! distributions can share marginals while ordering that quantity
//! differently.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid_input, Result};
use crate::metrics::{argsort_desc, gain, z_k};
use crate::types::RelevanceVector;

/// Largest supported list length (`2^10` support points).
pub const MAX_DOCS: usize = 10;
const SUM_TOLERANCE: f64 = 1e-12;
/// Calibrated scores closer than this are treated as tied.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Support order of the bundled pair, as bit strings over documents 1..3.
pub const COUNTEREXAMPLE_SUPPORT: [&str; 8] = ["000", "110", "101", "011", "100", "010", "001", "111"];
const COUNTEREXAMPLE_P: [f64; 8] = [0.0, 0.1, 0.15, 0.05, 0.2, 0.3, 0.2, 0.0];
const COUNTEREXAMPLE_Q: [f64; 8] = [0.0, 0.3, 0.0, 0.0, 0.15, 0.15, 0.4, 0.0];

/// A distribution over all `2^m` binary relevance vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct RelevanceDistribution {
    num_docs: usize,
    support: Vec<Vec<u8>>,
    probs: Vec<f64>,
}

impl RelevanceDistribution {
    /// `support` must list each vector of `{0, 1}^m` exactly once, in any order.
    pub fn new(num_docs: usize, support: Vec<Vec<u8>>, probs: Vec<f64>) -> Result<Self> {
        if num_docs == 0 || num_docs > MAX_DOCS {
            return Err(invalid_input!("need 1 <= m <= {MAX_DOCS}, got {num_docs}"));
        }
        let size = 1usize << num_docs;
        if support.len() != size || probs.len() != size {
            return Err(invalid_input!(
                "m={num_docs} needs {size} support points and probabilities, got {} and {}",
                support.len(),
                probs.len()
            ));
        }
        let mut seen = vec![false; size];
        for v in &support {
            if v.len() != num_docs || v.iter().any(|&b| b > 1) {
                return Err(invalid_input!("support point {v:?} is not a binary vector of length {num_docs}"));
            }
            let code = v.iter().fold(0usize, |acc, &b| (acc << 1) | usize::from(b));
            if core::mem::replace(&mut seen[code], true) {
                return Err(invalid_input!("support point {v:?} appears twice"));
            }
        }
        if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(invalid_input!("probabilities must be finite and nonnegative"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > SUM_TOLERANCE {
            return Err(invalid_input!("probabilities sum to {total}, not 1"));
        }
        Ok(Self {
            num_docs,
            support,
            probs,
        })
    }

    /// Parses support points written as bit strings such as `"110"`.
    pub fn from_bit_strings(num_docs: usize, support: &[&str], probs: Vec<f64>) -> Result<Self> {
        let support = support
            .iter()
            .map(|s| {
                s.bytes()
                    .map(|c| match c {
                        b'0' => Ok(0),
                        b'1' => Ok(1),
                        _ => Err(invalid_input!("support point {s:?} is not a bit string")),
                    })
                    .collect()
            })
            .collect::<Result<_>>()?;
        Self::new(num_docs, support, probs)
    }

    /// All mass on one vector.
    pub fn point_mass(point: &[u8]) -> Result<Self> {
        let m = point.len();
        if m == 0 || m > MAX_DOCS {
            return Err(invalid_input!("need 1 <= m <= {MAX_DOCS}, got {m}"));
        }
        let support = all_binary(m);
        let probs = support.iter().map(|v| if v == point { 1.0 } else { 0.0 }).collect();
        Self::new(m, support, probs)
    }

    pub fn uniform(num_docs: usize) -> Result<Self> {
        if num_docs == 0 || num_docs > MAX_DOCS {
            return Err(invalid_input!("need 1 <= m <= {MAX_DOCS}, got {num_docs}"));
        }
        let size = 1usize << num_docs;
        Self::new(num_docs, all_binary(num_docs), vec![1.0 / size as f64; size])
    }

    /// The first adversary of the bundled pair.
    pub fn counterexample_p() -> Self {
        Self::from_bit_strings(3, &COUNTEREXAMPLE_SUPPORT, COUNTEREXAMPLE_P.to_vec()).expect("bundled table is valid")
    }

    /// The second adversary of the bundled pair.
    pub fn counterexample_q() -> Self {
        Self::from_bit_strings(3, &COUNTEREXAMPLE_SUPPORT, COUNTEREXAMPLE_Q.to_vec()).expect("bundled table is valid")
    }

    pub fn num_docs(&self) -> usize {
        self.num_docs
    }

    pub fn support(&self) -> &[Vec<u8>] {
        &self.support
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Relabels documents: document `i` of `self` becomes document `perm[i]`.
    pub fn relabel(&self, perm: &[usize]) -> Result<Self> {
        let m = self.num_docs;
        let mut check = perm.to_vec();
        check.sort_unstable();
        if check != (0..m).collect::<Vec<_>>() {
            return Err(invalid_input!("{perm:?} is not a permutation of 0..{m}"));
        }
        let support = self
            .support
            .iter()
            .map(|v| {
                let mut out = vec![0; m];
                for (i, &b) in v.iter().enumerate() {
                    out[perm[i]] = b;
                }
                out
            })
            .collect();
        Self::new(m, support, self.probs.clone())
    }

    fn weighted(&self) -> impl Iterator<Item = (&[u8], f64)> {
        self.support.iter().map(Vec::as_slice).zip(self.probs.iter().copied())
    }
}

fn all_binary(m: usize) -> Vec<Vec<u8>> {
    (0..1usize << m)
        .map(|code| (0..m).map(|i| ((code >> (m - 1 - i)) & 1) as u8).collect())
        .collect()
}

/// `E[R]`.
pub fn expected_relevance(dist: &RelevanceDistribution) -> Vec<f64> {
    let mut out = vec![0.0; dist.num_docs];
    for (v, p) in dist.weighted() {
        for (o, &b) in out.iter_mut().zip(v) {
            *o += p * f64::from(b);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibratedScore {
    /// `E[G(R) / Z_m(R)]`.
    pub values: Vec<f64>,
    /// The all-zero vector carries positive mass; it contributes zero since
    /// its NDCG is undefined.
    pub degenerate_support: bool,
}

/// `E[G(R) / Z_m(R)]`, whose descending order is the NDCG-optimal ranking.
pub fn calibrated_score(dist: &RelevanceDistribution) -> Result<CalibratedScore> {
    let m = dist.num_docs;
    let mut values = vec![0.0; m];
    let mut degenerate_support = false;
    for (v, p) in dist.weighted() {
        let relevance = RelevanceVector::new(v.iter().map(|&b| u32::from(b)).collect())?;
        let z = z_k(&relevance, m)?;
        if z == 0.0 {
            degenerate_support |= p > 0.0;
            continue;
        }
        for (o, &b) in values.iter_mut().zip(v) {
            *o += p * gain(u32::from(b)) / z;
        }
    }
    Ok(CalibratedScore {
        values,
        degenerate_support,
    })
}

/// `P(R_{pi_s(1)} = 1)`: the law of the single grade a top-1 learner sees
/// after playing `s`, summed exactly over the support.
pub fn top1_feedback_law(dist: &RelevanceDistribution, s: &[f64]) -> Result<f64> {
    if s.len() != dist.num_docs {
        return Err(invalid_input!("{} scores for {} documents", s.len(), dist.num_docs));
    }
    let top = argsort_desc(s)?.doc_at(0);
    Ok(dist.weighted().filter(|(v, _)| v[top] == 1).map(|(_, p)| p).sum())
}

/// Largest gap between the two top-1 feedback laws over `trials` random
/// score vectors in `[-1, 1]^m`.
pub fn feedback_law_gap(
    p: &RelevanceDistribution,
    q: &RelevanceDistribution,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    check_same_m(p, q)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gap = 0.0f64;
    for _ in 0..trials {
        let s: Vec<f64> = (0..p.num_docs).map(|_| rng.gen_range(-1.0..1.0)).collect();
        gap = gap.max((top1_feedback_law(p, &s)? - top1_feedback_law(q, &s)?).abs());
    }
    Ok(gap)
}

fn check_same_m(p: &RelevanceDistribution, q: &RelevanceDistribution) -> Result<()> {
    if p.num_docs != q.num_docs {
        return Err(invalid_input!(
            "distributions over {} and {} documents",
            p.num_docs,
            q.num_docs
        ));
    }
    Ok(())
}

/// Groups documents (0-based) into classes of equal value, best class first.
pub fn tie_classes(values: &[f64]) -> Result<Vec<Vec<usize>>> {
    let order = argsort_desc(values)?;
    let mut classes: Vec<Vec<usize>> = Vec::new();
    for &doc in order.rank_to_doc() {
        match classes.last_mut() {
            Some(class) if (values[class[0]] - values[doc]).abs() <= TIE_TOLERANCE => class.push(doc),
            _ => classes.push(vec![doc]),
        }
    }
    Ok(classes)
}

/// How two optimal orderings relate once ties are respected.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrderingComparison {
    /// Same tie classes in the same order.
    Identical,
    /// Some pair is strictly ordered one way by the first and strictly the
    /// other way by the second.
    Differ,
    /// Not identical, but every disagreement involves a tie.
    Ambiguous,
}

pub fn compare_orderings(a: &[f64], b: &[f64]) -> Result<OrderingComparison> {
    if a.len() != b.len() {
        return Err(invalid_input!("orderings of {} and {} documents", a.len(), b.len()));
    }
    let (ca, cb) = (tie_classes(a)?, tie_classes(b)?);
    if ca == cb {
        return Ok(OrderingComparison::Identical);
    }
    let class_of = |classes: &[Vec<usize>]| {
        let mut out = vec![0; a.len()];
        for (rank, class) in classes.iter().enumerate() {
            for &d in class {
                out[d] = rank;
            }
        }
        out
    };
    let (ra, rb) = (class_of(&ca), class_of(&cb));
    for i in 0..a.len() {
        for j in 0..a.len() {
            if ra[i] < ra[j] && rb[j] < rb[i] {
                return Ok(OrderingComparison::Differ);
            }
        }
    }
    Ok(OrderingComparison::Ambiguous)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CounterexampleReport {
    pub marginals_p: Vec<f64>,
    pub marginals_q: Vec<f64>,
    pub calibrated_p: CalibratedScore,
    pub calibrated_q: CalibratedScore,
    /// Descending argsort of the calibrated scores, 1-based, ties by index.
    pub argsort_p: Vec<usize>,
    pub argsort_q: Vec<usize>,
    /// Tie classes of the calibrated scores, 1-based, best first.
    pub classes_p: Vec<Vec<usize>>,
    pub classes_q: Vec<Vec<usize>>,
    pub comparison: OrderingComparison,
    /// `|E_p[R] - E_q[R]|_inf <= tol`, which makes every top-1 feedback law equal.
    pub indistinguishable: bool,
    pub orderings_differ: bool,
}

impl CounterexampleReport {
    /// Both flags hold: top-1 feedback cannot separate the adversaries, yet
    /// they need different rankings.
    pub fn verdict(&self) -> bool {
        self.indistinguishable && self.orderings_differ
    }
}

fn one_based(v: &[usize]) -> Vec<usize> {
    v.iter().map(|d| d + 1).collect()
}

pub fn verify_counterexample(
    p: &RelevanceDistribution,
    q: &RelevanceDistribution,
    tol: f64,
) -> Result<CounterexampleReport> {
    check_same_m(p, q)?;
    let marginals_p = expected_relevance(p);
    let marginals_q = expected_relevance(q);
    let gap = marginals_p
        .iter()
        .zip(&marginals_q)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let calibrated_p = calibrated_score(p)?;
    let calibrated_q = calibrated_score(q)?;
    let comparison = compare_orderings(&calibrated_p.values, &calibrated_q.values)?;
    let classes = |v: &[f64]| -> Result<Vec<Vec<usize>>> {
        Ok(tie_classes(v)?.iter().map(|c| one_based(c)).collect())
    };
    Ok(CounterexampleReport {
        argsort_p: one_based(argsort_desc(&calibrated_p.values)?.rank_to_doc()),
        argsort_q: one_based(argsort_desc(&calibrated_q.values)?.rank_to_doc()),
        classes_p: classes(&calibrated_p.values)?,
        classes_q: classes(&calibrated_q.values)?,
        indistinguishable: gap <= tol,
        orderings_differ: comparison == OrderingComparison::Differ,
        comparison,
        marginals_p,
        marginals_q,
        calibrated_p,
        calibrated_q,
    })
}

/// Formats the report's vectors for display.
pub fn format_vector(v: &[f64]) -> alloc::string::String {
    let parts: Vec<_> = v.iter().map(|x| format!("{x:.4}")).collect();
    format!("({})", parts.join(", "))
}
