//! Ranking surrogates, their score-space gradients, and unbiased gradient
//! estimators built from top-k feedback.
//!
//! | Surrogate | `phi(s, R)` | feedback |
//! |-----------|-------------|----------|
//! | squared | `sum_i (s_i - R_i)^2` | top-1 |
//! | RankSVM hinge | `sum_{i != j} 1(R_i > R_j) max(0, 1 + s_j - s_i)` | top-2 |
//! | KL (un-normalized ListNet) | `sum_i e^{R_i} R_i - e^{R_i} s_i - e^{R_i} + e^{s_i}` | top-1 |
//! | SmoothDCG@1 | `sum_i G(R_i) softmax(s / eps)_i` | top-1 |
//! | ListNet | `-sum_i softmax(R)_i log softmax(s)_i` | full only |
//!
//! An estimator may use a coordinate of `R` only if the gradient splits into
//! terms that each depend on at most `k` coordinates of `R`. ListNet's gradient
//! does not split for `k < m`, so it has no [`EstimableSurrogate`] variant and
//! is available only to the full-information baseline.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid_input, Error, Result};
use crate::math;
use crate::metrics::gain;
use crate::sampling::{pair_marginal_sum, prefix_marginal, PermutationDistribution, TopKFeedback};
use crate::types::{DocumentList, RelevanceVector, ScoreVector};

/// Bound on `|s_i|` and `R_i` for the exponential (KL) surrogate.
pub const EXP_ARG_LIMIT: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SurrogateKind {
    Squared,
    RankSvmHinge,
    KlListwise,
    SmoothDcg { epsilon: f64 },
    ListNetCrossEntropy,
}

/// How much of `R` a gradient estimator has to see.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeedbackDepth {
    Top(usize),
    Full,
}

impl SurrogateKind {
    pub fn smooth_dcg(epsilon: f64) -> Result<Self> {
        let kind = Self::SmoothDcg { epsilon };
        kind.validate()?;
        Ok(kind)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::SmoothDcg { epsilon } if !(*epsilon > 0.0 && epsilon.is_finite()) => Err(
                Error::InvalidConfig(format!("SmoothDCG epsilon must be positive, got {epsilon}")),
            ),
            _ => Ok(()),
        }
    }

    pub fn feedback_depth(&self) -> FeedbackDepth {
        match self {
            Self::Squared | Self::KlListwise | Self::SmoothDcg { .. } => FeedbackDepth::Top(1),
            Self::RankSvmHinge => FeedbackDepth::Top(2),
            Self::ListNetCrossEntropy => FeedbackDepth::Full,
        }
    }

    pub fn is_convex(&self) -> bool {
        matches!(self, Self::Squared | Self::RankSvmHinge | Self::KlListwise)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Squared => "squared",
            Self::RankSvmHinge => "ranksvm",
            Self::KlListwise => "kl",
            Self::SmoothDcg { .. } => "smoothdcg",
            Self::ListNetCrossEntropy => "listnet",
        }
    }
}

/// The surrogates that admit an unbiased top-k gradient estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EstimableSurrogate {
    Squared,
    RankSvmHinge,
    KlListwise,
    SmoothDcg { epsilon: f64 },
}

impl EstimableSurrogate {
    /// Number of top-ranked grades the estimator needs.
    pub fn depth(&self) -> usize {
        match self {
            Self::RankSvmHinge => 2,
            _ => 1,
        }
    }
}

impl From<EstimableSurrogate> for SurrogateKind {
    fn from(kind: EstimableSurrogate) -> Self {
        match kind {
            EstimableSurrogate::Squared => Self::Squared,
            EstimableSurrogate::RankSvmHinge => Self::RankSvmHinge,
            EstimableSurrogate::KlListwise => Self::KlListwise,
            EstimableSurrogate::SmoothDcg { epsilon } => Self::SmoothDcg { epsilon },
        }
    }
}

impl TryFrom<SurrogateKind> for EstimableSurrogate {
    type Error = Error;

    fn try_from(kind: SurrogateKind) -> Result<Self> {
        kind.validate()?;
        match kind {
            SurrogateKind::Squared => Ok(Self::Squared),
            SurrogateKind::RankSvmHinge => Ok(Self::RankSvmHinge),
            SurrogateKind::KlListwise => Ok(Self::KlListwise),
            SurrogateKind::SmoothDcg { epsilon } => Ok(Self::SmoothDcg { epsilon }),
            SurrogateKind::ListNetCrossEntropy => Err(Error::Unsupported(
                "the ListNet gradient does not decompose over top-k coordinates; \
                 it has no partial-feedback estimator"
                    .into(),
            )),
        }
    }
}

/// An estimate of the score-space gradient and its pull-back `X^T g`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientEstimate {
    pub score_grad: Vec<f64>,
    pub weight_grad: Vec<f64>,
}

fn check_inputs(kind: &SurrogateKind, s: &[f64], relevance: &RelevanceVector) -> Result<()> {
    kind.validate()?;
    if s.len() != relevance.len() {
        return Err(invalid_input!("{} scores for {} grades", s.len(), relevance.len()));
    }
    if let Some(i) = s.iter().position(|x| !x.is_finite()) {
        return Err(invalid_input!("non-finite score at document {i}"));
    }
    if matches!(kind, SurrogateKind::KlListwise) {
        check_exp_range(s, relevance)?;
    }
    Ok(())
}

fn check_exp_range(s: &[f64], relevance: &RelevanceVector) -> Result<()> {
    if let Some(x) = s.iter().find(|x| x.abs() > EXP_ARG_LIMIT) {
        return Err(Error::Range(format!(
            "score {x} exceeds the exponential surrogate's bound {EXP_ARG_LIMIT}"
        )));
    }
    if f64::from(relevance.max_grade()) > EXP_ARG_LIMIT {
        return Err(Error::Range(format!(
            "grade {} exceeds the exponential surrogate's bound {EXP_ARG_LIMIT}",
            relevance.max_grade()
        )));
    }
    Ok(())
}

/// `phi(s, R)`.
pub fn loss(kind: SurrogateKind, s: &[f64], relevance: &RelevanceVector) -> Result<f64> {
    check_inputs(&kind, s, relevance)?;
    let r = relevance.as_f64();
    Ok(match kind {
        SurrogateKind::Squared => s.iter().zip(&r).map(|(a, b)| (a - b) * (a - b)).sum(),
        SurrogateKind::RankSvmHinge => {
            let mut total = 0.0;
            for i in 0..s.len() {
                for j in 0..s.len() {
                    if r[i] > r[j] {
                        total += (1.0 + s[j] - s[i]).max(0.0);
                    }
                }
            }
            total
        }
        SurrogateKind::KlListwise => s
            .iter()
            .zip(&r)
            .map(|(&si, &ri)| {
                let er = math::exp(ri);
                er * ri - er * si - er + math::exp(si)
            })
            .sum(),
        SurrogateKind::SmoothDcg { epsilon } => {
            let weights = math::softmax(s, epsilon);
            relevance
                .grades()
                .iter()
                .zip(&weights)
                .map(|(&g, w)| gain(g) * w)
                .sum()
        }
        SurrogateKind::ListNetCrossEntropy => {
            let target = math::softmax(&r, 1.0);
            let log_pred = math::log_softmax(s);
            -target.iter().zip(&log_pred).map(|(p, lq)| p * lq).sum::<f64>()
        }
    })
}

/// RankSVM pair term `h_{s,i,j}(R_i, R_j) = 1(R_i > R_j) 1(1 + s_j > s_i) (e_j - e_i)`,
/// accumulated into `out`.
fn add_hinge_pair(out: &mut [f64], s: &[f64], i: usize, j: usize, ri: u32, rj: u32) {
    if ri > rj && 1.0 + s[j] > s[i] {
        out[j] += 1.0;
        out[i] -= 1.0;
    }
}

/// SmoothDCG@1 term for document `i`, scaled by `weight`:
/// `weight * (1/eps) (q_i e_i - q_i q)` with `q = softmax(s / eps)`.
fn add_smooth_dcg_term(out: &mut [f64], q: &[f64], epsilon: f64, i: usize, weight: f64) {
    let scale = weight * q[i] / epsilon;
    for (o, qj) in out.iter_mut().zip(q) {
        *o -= scale * qj;
    }
    out[i] += scale;
}

/// Exact `grad_s phi(s, R)`; a subgradient at hinge kinks, using the strict
/// indicator `1(1 + s_j > s_i)`.
pub fn gradient(kind: SurrogateKind, s: &[f64], relevance: &RelevanceVector) -> Result<Vec<f64>> {
    check_inputs(&kind, s, relevance)?;
    let m = s.len();
    let grades = relevance.grades();
    Ok(match kind {
        SurrogateKind::Squared => s
            .iter()
            .zip(grades)
            .map(|(si, &g)| 2.0 * (si - f64::from(g)))
            .collect(),
        SurrogateKind::RankSvmHinge => {
            let mut out = vec![0.0; m];
            for i in 0..m {
                for j in 0..m {
                    if i != j {
                        add_hinge_pair(&mut out, s, i, j, grades[i], grades[j]);
                    }
                }
            }
            out
        }
        SurrogateKind::KlListwise => s
            .iter()
            .zip(grades)
            .map(|(&si, &g)| math::exp(si) - math::exp(f64::from(g)))
            .collect(),
        SurrogateKind::SmoothDcg { epsilon } => {
            let q = math::softmax(s, epsilon);
            let mut out = vec![0.0; m];
            for (i, &g) in grades.iter().enumerate() {
                add_smooth_dcg_term(&mut out, &q, epsilon, i, gain(g));
            }
            out
        }
        SurrogateKind::ListNetCrossEntropy => {
            let pred = math::softmax(s, 1.0);
            let target = math::softmax(&relevance.as_f64(), 1.0);
            pred.iter().zip(&target).map(|(p, t)| p - t).collect()
        }
    })
}

/// Unbiased estimate of `grad_s phi(s, R)` from top-k feedback drawn from `dist`.
///
/// With `fb.depth() == kind.depth()` this is the importance-weighted
/// estimator of the surrogate. When the feedback reveals every grade
/// (`fb.depth() == m`), the exact gradient is returned.
pub fn estimate_score_gradient(
    kind: EstimableSurrogate,
    s: &[f64],
    fb: &TopKFeedback,
    dist: &PermutationDistribution,
) -> Result<Vec<f64>> {
    let m = s.len();
    if fb.sampled_perm().len() != m || dist.num_docs() != m {
        return Err(invalid_input!(
            "scores, feedback, and distribution disagree on m ({m}, {}, {})",
            fb.sampled_perm().len(),
            dist.num_docs()
        ));
    }
    if fb.depth() == m {
        return gradient(kind.into(), s, &full_relevance(fb)?);
    }
    if fb.depth() != kind.depth() {
        return Err(invalid_input!(
            "{} needs top-{} feedback, got top-{}",
            SurrogateKind::from(kind).name(),
            kind.depth(),
            fb.depth()
        ));
    }
    if let Some(i) = s.iter().position(|x| !x.is_finite()) {
        return Err(invalid_input!("non-finite score at document {i}"));
    }
    let docs = fb.observed_docs();
    let grades = fb.observed_grades();
    let denominator = match kind {
        EstimableSurrogate::RankSvmHinge => pair_marginal_sum(dist, docs[0], docs[1])?,
        _ => prefix_marginal(dist, &docs[..1])?,
    };
    if !(denominator > 0.0) {
        return Err(Error::DegenerateDistribution(format!(
            "observed prefix {docs:?} has zero probability"
        )));
    }
    let top = docs[0];
    let top_grade = f64::from(grades[0]);
    Ok(match kind {
        EstimableSurrogate::Squared => {
            let mut out: Vec<f64> = s.iter().map(|x| 2.0 * x).collect();
            out[top] -= 2.0 * top_grade / denominator;
            out
        }
        EstimableSurrogate::KlListwise => {
            if s[top].abs() > EXP_ARG_LIMIT || top_grade > EXP_ARG_LIMIT {
                return Err(Error::Range(format!(
                    "score {} or grade {top_grade} exceeds the exponential surrogate's bound",
                    s[top]
                )));
            }
            let mut out = vec![0.0; m];
            out[top] = (math::exp(s[top]) - math::exp(top_grade)) / denominator;
            out
        }
        EstimableSurrogate::SmoothDcg { epsilon } => {
            let q = math::softmax(s, epsilon);
            let mut out = vec![0.0; m];
            add_smooth_dcg_term(&mut out, &q, epsilon, top, gain(grades[0]) / denominator);
            out
        }
        EstimableSurrogate::RankSvmHinge => {
            let (a, b) = (docs[0], docs[1]);
            let mut out = vec![0.0; m];
            add_hinge_pair(&mut out, s, a, b, grades[0], grades[1]);
            add_hinge_pair(&mut out, s, b, a, grades[1], grades[0]);
            for x in &mut out {
                *x /= denominator;
            }
            out
        }
    })
}

fn full_relevance(fb: &TopKFeedback) -> Result<RelevanceVector> {
    let mut grades = vec![0; fb.depth()];
    for (&doc, &g) in fb.observed_docs().iter().zip(fb.observed_grades()) {
        grades[doc] = g;
    }
    RelevanceVector::new(grades)
}

/// [`estimate_score_gradient`] followed by the chain rule through `s = X w`.
pub fn estimate_gradient(
    kind: EstimableSurrogate,
    docs: &DocumentList,
    s: &ScoreVector,
    fb: &TopKFeedback,
    dist: &PermutationDistribution,
) -> Result<GradientEstimate> {
    let score_grad = estimate_score_gradient(kind, s.as_slice(), fb, dist)?;
    let weight_grad = docs.transpose_mul(&score_grad)?;
    Ok(GradientEstimate {
        score_grad,
        weight_grad,
    })
}

/// Whether a surrogate's gradient splits over `k` coordinates of `R`.
#[derive(Debug, Clone, PartialEq)]
pub enum Decomposability {
    Supported,
    Refuted(RefutationWitness),
}

/// A numeric certificate that the gradient does not split over `k`
/// coordinates: a quantity that must equal `required` under any such split,
/// evaluated on a concrete instance.
#[derive(Debug, Clone, PartialEq)]
pub struct RefutationWitness {
    pub instance: &'static str,
    pub required: f64,
    pub observed: f64,
}

/// Verdict on whether an unbiased estimator can be built from top-`k` feedback,
/// with a checked counterexample for the refuted cases.
pub fn decomposability_witness(kind: SurrogateKind, k: usize) -> Result<Decomposability> {
    if !(1..=2).contains(&k) {
        return Err(invalid_input!("decomposability is tabulated for k in {{1, 2}}, got {k}"));
    }
    kind.validate()?;
    Ok(match (kind, k) {
        (SurrogateKind::RankSvmHinge, 1) => {
            // m = 3, s = (1, 0, 0): the e_1 coefficient of the terms involving R_1
            // is 1(R_2 > R_1) + 1(R_3 > R_1). Under a split over single
            // coordinates its change when R_1 flips 0 -> 1 cannot depend on R_2, R_3.
            let change_at = |rest: u32| {
                let coefficient = |r1: u32| {
                    let s = [1.0, 0.0, 0.0];
                    let grades = [r1, rest, rest];
                    let mut out = [0.0; 3];
                    for j in 1..3 {
                        add_hinge_pair(&mut out, &s, 0, j, grades[0], grades[j]);
                        add_hinge_pair(&mut out, &s, j, 0, grades[j], grades[0]);
                    }
                    out[0]
                };
                coefficient(0) - coefficient(1)
            };
            Decomposability::Refuted(RefutationWitness {
                instance: "RankSVM, m=3, s=(1,0,0): change of the R_1 coefficient, R=(.,0,0) vs R=(.,1,1)",
                required: change_at(0),
                observed: change_at(1),
            })
        }
        (SurrogateKind::ListNetCrossEntropy, k) => {
            // f(R) = e_1 coefficient of the gradient at s = 0, m = 3, taken
            // around R = (0, 1, 1). A split over k coordinates forces every
            // (k+1)-fold mixed partial across distinct coordinates to vanish.
            // (The third partial happens to vanish at R = 0, hence the offset.)
            let f = |r: &[f64]| -math::softmax(r, 1.0)[0];
            Decomposability::Refuted(RefutationWitness {
                instance: if k == 1 {
                    "ListNet, m=3, s=0, R=(0,1,1): d^2 f / dR_1 dR_2"
                } else {
                    "ListNet, m=3, s=0, R=(0,1,1): d^3 f / dR_1 dR_2 dR_3"
                },
                required: 0.0,
                observed: mixed_partial(f, &[0.0, 1.0, 1.0], k + 1, 1e-2),
            })
        }
        _ => Decomposability::Supported,
    })
}

/// Central-difference mixed partial derivative across the first `order`
/// coordinates of `at`.
fn mixed_partial(f: impl Fn(&[f64]) -> f64, at: &[f64], order: usize, step: f64) -> f64 {
    let mut total = 0.0;
    for signs in 0..(1u32 << order) {
        let mut point = at.to_vec();
        let mut sign = 1.0;
        for (c, x) in point.iter_mut().enumerate().take(order) {
            if signs & (1 << c) != 0 {
                *x += step;
            } else {
                *x -= step;
                sign = -sign;
            }
        }
        total += sign * f(&point);
    }
    total / math::powf(2.0 * step, order as f64)
}
