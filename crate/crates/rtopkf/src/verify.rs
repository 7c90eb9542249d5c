//! Property suites behind `rtopkf verify`. Each check prints one line and
//! the suite passes only if every check does.

use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rtopkf_core::impossibility::{
    self, format_vector, verify_counterexample, RelevanceDistribution,
};
use rtopkf_core::oracle::{enumerate_expectation, finite_diff_gradient, variance_audit, AuditParams};
use rtopkf_core::surrogates::{self, estimate_score_gradient};
use rtopkf_core::{
    argsort_desc, extract_feedback, pair_marginal_sum, prefix_marginal, EstimableSurrogate,
    Permutation, PermutationDistribution, RelevanceVector, SurrogateKind, TopKFeedback,
};

use crate::error::{Error, Result};
use crate::fixture::{parse_pair, DistributionPair, COUNTEREXAMPLE};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Unbiased,
    Gradients,
    Marginals,
    Variance,
    Impossibility,
}

impl Suite {
    pub const ALL: [Suite; 5] = [
        Suite::Unbiased,
        Suite::Gradients,
        Suite::Marginals,
        Suite::Variance,
        Suite::Impossibility,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Unbiased => "unbiased",
            Suite::Gradients => "gradients",
            Suite::Marginals => "marginals",
            Suite::Variance => "variance",
            Suite::Impossibility => "impossibility",
        }
    }
}

impl std::str::FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|suite| suite.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown suite {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{status} {}: {}", self.name, self.detail)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub suite: Suite,
    pub checks: Vec<Check>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "{c}")?;
        }
        let failed = self.checks.iter().filter(|c| !c.passed).count();
        write!(
            f,
            "{}: {} of {} checks passed",
            self.suite.name(),
            self.checks.len() - failed,
            self.checks.len()
        )
    }
}

/// Signature of a score-space gradient estimator.
pub type Estimator = dyn Fn(
    EstimableSurrogate,
    &[f64],
    &TopKFeedback,
    &PermutationDistribution,
) -> rtopkf_core::Result<Vec<f64>>;

pub fn run(suite: Suite, seed: u64) -> Result<Report> {
    match suite {
        Suite::Unbiased => unbiased_with(&estimate_score_gradient, seed),
        Suite::Gradients => gradients(seed),
        Suite::Marginals => marginals(seed),
        Suite::Variance => variance(seed),
        Suite::Impossibility => impossibility(&parse_pair(COUNTEREXAMPLE)?, true, seed),
    }
}

const UNBIASED_TOLERANCE: f64 = 1e-9;

fn estimable_kinds() -> [EstimableSurrogate; 4] {
    [
        EstimableSurrogate::Squared,
        EstimableSurrogate::KlListwise,
        EstimableSurrogate::SmoothDcg { epsilon: 0.01 },
        EstimableSurrogate::RankSvmHinge,
    ]
}

/// Exact expectation of `estimator` over `S_m` against the analytic
/// gradient, for 20 random `(s, R, gamma)` per surrogate and `m` in 2..=4.
pub fn unbiased_with(estimator: &Estimator, seed: u64) -> Result<Report> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = Vec::new();
    for kind in estimable_kinds() {
        for m in 2..=4 {
            let mut worst = 0.0f64;
            for _ in 0..20 {
                let s: Vec<f64> = (0..m).map(|_| rng.gen_range(-2.0..2.0)).collect();
                let r = RelevanceVector::new((0..m).map(|_| rng.gen_range(0..=3)).collect())?;
                let gamma = rng.gen_range(0.05..0.95);
                let dist = PermutationDistribution::mixture(argsort_desc(&s)?, gamma)?;
                let depth = kind.depth();
                let mean = enumerate_expectation(&dist, |sigma| {
                    let fb = extract_feedback(&r, sigma, depth)?;
                    estimator(kind, &s, &fb, &dist)
                })?;
                let exact = surrogates::gradient(kind.into(), &s, &r)?;
                for (a, b) in mean.iter().zip(&exact) {
                    worst = worst.max((a - b).abs());
                }
            }
            checks.push(Check::new(
                format!("{} top-{} m={m}", SurrogateKind::from(kind).name(), kind.depth()),
                worst <= UNBIASED_TOLERANCE,
                format!("max |E[estimate] - gradient| = {worst:.3e} (tolerance {UNBIASED_TOLERANCE:e})"),
            ));
        }
    }
    Ok(Report {
        suite: Suite::Unbiased,
        checks,
    })
}

const GRADIENT_TOLERANCE: f64 = 1e-5;
const FD_STEP: f64 = 1e-6;
/// Hinge points with some active margin this close to zero are resampled.
const KINK_MARGIN: f64 = 1e-3;

fn near_kink(s: &[f64], r: &RelevanceVector) -> bool {
    (0..s.len()).any(|i| {
        (0..s.len()).any(|j| r.grade(i) > r.grade(j) && (1.0 + s[j] - s[i]).abs() < KINK_MARGIN)
    })
}

/// Central differences against analytic gradients at 50 random points per
/// surrogate. The error is `|fd - g|_inf / max(1, |g|_inf)`.
pub fn gradients(seed: u64) -> Result<Report> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kinds = [
        SurrogateKind::Squared,
        SurrogateKind::RankSvmHinge,
        SurrogateKind::KlListwise,
        SurrogateKind::SmoothDcg { epsilon: 0.1 },
        SurrogateKind::SmoothDcg { epsilon: 0.01 },
        SurrogateKind::ListNetCrossEntropy,
    ];
    let mut checks = Vec::new();
    for kind in kinds {
        let mut worst = 0.0f64;
        let mut points = 0;
        while points < 50 {
            let m = rng.gen_range(2..=6);
            let s: Vec<f64> = (0..m).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let r = RelevanceVector::new((0..m).map(|_| rng.gen_range(0..=3)).collect())?;
            if kind == SurrogateKind::RankSvmHinge && near_kink(&s, &r) {
                continue;
            }
            points += 1;
            let g = surrogates::gradient(kind, &s, &r)?;
            let fd = finite_diff_gradient(kind, &s, &r, FD_STEP)?;
            let scale = g.iter().fold(1.0f64, |acc, x| acc.max(x.abs()));
            let err = g.iter().zip(&fd).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / scale;
            worst = worst.max(err);
        }
        let label = match kind {
            SurrogateKind::SmoothDcg { epsilon } => format!("smoothdcg eps={epsilon}"),
            other => other.name().to_string(),
        };
        checks.push(Check::new(
            label,
            worst <= GRADIENT_TOLERANCE,
            format!("max relative error {worst:.3e} over 50 points (tolerance {GRADIENT_TOLERANCE:e})"),
        ));
    }
    Ok(Report {
        suite: Suite::Gradients,
        checks,
    })
}

const MARGINAL_TOLERANCE: f64 = 1e-12;

/// Closed-form prefix marginals of the mixture against summation over its
/// explicit table, for every prefix of length 1 and 2.
pub fn marginals(seed: u64) -> Result<Report> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = Vec::new();
    for m in 2..=6 {
        let mut worst = 0.0f64;
        let mut prefixes = 0;
        for _ in 0..10 {
            let gamma = rng.gen_range(0.001..0.999);
            let mut order: Vec<usize> = (0..m).collect();
            order.shuffle(&mut rng);
            let mixture = PermutationDistribution::mixture(Permutation::from_rank_to_doc(order)?, gamma)?;
            let table = mixture.to_table()?;
            for a in 0..m {
                let diff = (prefix_marginal(&mixture, &[a])? - prefix_marginal(&table, &[a])?).abs();
                worst = worst.max(diff);
                prefixes += 1;
                for b in (0..m).filter(|&b| b != a) {
                    let diff = (prefix_marginal(&mixture, &[a, b])? - prefix_marginal(&table, &[a, b])?).abs();
                    let pair = (pair_marginal_sum(&mixture, a, b)? - pair_marginal_sum(&table, a, b)?).abs();
                    worst = worst.max(diff).max(pair);
                    prefixes += 1;
                }
            }
        }
        checks.push(Check::new(
            format!("m={m}"),
            worst <= MARGINAL_TOLERANCE,
            format!("{prefixes} prefixes, max |closed form - table| = {worst:.3e}"),
        ));
    }
    Ok(Report {
        suite: Suite::Marginals,
        checks,
    })
}

pub const VARIANCE_GAMMAS: [f64; 4] = [0.05, 0.1, 0.25, 0.49];

/// Exact second moments against `C^phi / gamma` for the convex surrogates.
pub fn variance(seed: u64) -> Result<Report> {
    let params = AuditParams::default();
    let mut checks = Vec::new();
    for kind in [SurrogateKind::Squared, SurrogateKind::RankSvmHinge, SurrogateKind::KlListwise] {
        for m in 2..=4 {
            for gamma in VARIANCE_GAMMAS {
                let audit = variance_audit(kind, m, gamma, 50, seed, &params)?;
                checks.push(Check::new(
                    format!("{} m={m} gamma={gamma}", kind.name()),
                    audit.holds(),
                    format!(
                        "max E|z|^2 = {:.4e} <= C/gamma = {:.4e}; {} violations, {} envelope violations in {} trials",
                        audit.measured, audit.bound, audit.violations, audit.envelope_violations, audit.trials
                    ),
                ));
            }
        }
    }
    Ok(Report {
        suite: Suite::Variance,
        checks,
    })
}

/// Four-decimal reference values for the bundled pair.
const REFERENCE_P: [f64; 3] = [0.3533, 0.3920, 0.3226];
const REFERENCE_Q: [f64; 3] = [0.3339, 0.3339, 0.4000];
const REFERENCE_TOLERANCE: f64 = 5e-5;
const MARGINAL_EXACT: [f64; 3] = [9.0 / 20.0, 9.0 / 20.0, 2.0 / 5.0];

fn max_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Checks that `pair` is indistinguishable under top-1 feedback yet needs
/// different rankings. With `bundled`, also compares against the known values.
pub fn impossibility(pair: &DistributionPair, bundled: bool, seed: u64) -> Result<Report> {
    let report = verify_counterexample(&pair.p, &pair.q, 1e-9)?;
    let gap = impossibility::feedback_law_gap(&pair.p, &pair.q, 100, seed)?;
    let mut checks = vec![
        Check::new(
            "marginals",
            report.indistinguishable,
            format!(
                "E_p[R] = {}, E_q[R] = {}",
                format_vector(&report.marginals_p),
                format_vector(&report.marginals_q)
            ),
        ),
        Check::new(
            "calibrated scores",
            report.orderings_differ,
            format!(
                "p: {} argsort {:?}; q: {} tie classes {:?}",
                format_vector(&report.calibrated_p.values),
                report.argsort_p,
                format_vector(&report.calibrated_q.values),
                report.classes_q
            ),
        ),
        Check::new(
            "feedback law",
            gap <= 1e-12,
            format!("max |P_p(top grade = 1) - P_q(top grade = 1)| over 100 score vectors = {gap:.3e}"),
        ),
        Check::new(
            "verdict",
            report.verdict(),
            format!(
                "indistinguishable = {}, orderings_differ = {}",
                report.indistinguishable, report.orderings_differ
            ),
        ),
    ];
    if bundled {
        let exact = max_gap(&report.marginals_p, &MARGINAL_EXACT).max(max_gap(&report.marginals_q, &MARGINAL_EXACT));
        checks.push(Check::new(
            "marginals exact",
            exact <= 1e-12,
            format!("max distance to (9/20, 9/20, 2/5) = {exact:.3e}"),
        ));
        let reference = max_gap(&report.calibrated_p.values, &REFERENCE_P)
            .max(max_gap(&report.calibrated_q.values, &REFERENCE_Q));
        checks.push(Check::new(
            "reference values",
            reference <= REFERENCE_TOLERANCE,
            format!("max distance to the reference scores = {reference:.3e} (tolerance {REFERENCE_TOLERANCE:e})"),
        ));
        let builtin = pair.p == RelevanceDistribution::counterexample_p()
            && pair.q == RelevanceDistribution::counterexample_q();
        checks.push(Check::new("fixture", builtin, "bundled file matches the built-in pair"));
    }
    Ok(Report {
        suite: Suite::Impossibility,
        checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quick_suites_pass() {
        for suite in [Suite::Unbiased, Suite::Gradients, Suite::Marginals, Suite::Impossibility] {
            let report = run(suite, 1).unwrap();
            assert!(report.passed(), "{report}");
        }
    }

    #[test]
    fn corrupted_denominator_is_caught() {
        let corrupted = |kind: EstimableSurrogate, s: &[f64], fb: &TopKFeedback, dist: &PermutationDistribution| {
            // pretends every observed prefix is as likely as the exploit one
            let mut g = estimate_score_gradient(kind, s, fb, dist)?;
            let p = prefix_marginal(dist, &fb.observed_docs()[..1])?;
            let exploit = match dist {
                PermutationDistribution::Mixture { exploit, .. } => exploit.doc_at(0),
                _ => unreachable!(),
            };
            let p_exploit = prefix_marginal(dist, &[exploit])?;
            for x in &mut g {
                *x *= p / p_exploit;
            }
            Ok(g)
        };
        let report = unbiased_with(&corrupted, 1).unwrap();
        assert!(!report.passed());
    }

    #[test]
    fn suite_names_roundtrip() {
        for s in Suite::ALL {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
        }
        assert!("bogus".parse::<Suite>().is_err());
    }
}
