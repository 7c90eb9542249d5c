//! The online ranking game and its two reference baselines.
//!
//! Each round of [`Learner::play_round`]:
//!
//! 1. scores the documents, `s_t = X_t w_t`, and sorts them into `sigma_t`;
//! 2. plays `s_t` with probability `1 - gamma`, else uniform scores on `[0, 1]^m`;
//! 3. reveals the grades of the top `k` documents of the played ranking;
//! 4. estimates `grad_w phi(X_t w, R_t)` from that feedback alone and takes a
//!    projected gradient step onto the ball of radius `U`.
//!
//! The logged loss and NDCG are computed against the full relevance vector.
//! That happens after the update and only for reporting; the update path
//! receives nothing but a [`TopKFeedback`].

use alloc::format;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid_input, Error, Result};
use crate::math;
use crate::metrics::{argsort_desc, ndcg_of_ranking, z_k};
use crate::sampling::{
    extract_feedback, sample_action, uniform_scores, PermutationDistribution, RelevanceOracle,
    TopKFeedback,
};
use crate::surrogates::{self, EstimableSurrogate, SurrogateKind};
use crate::types::{project_l2_ball, DocumentList, Permutation, Query, ScoreVector, WeightVector};

/// Default NDCG cutoff for reporting.
pub const DEFAULT_METRIC_CUTOFF: usize = 10;
/// Default smoothing for SmoothDCG.
pub const DEFAULT_SMOOTH_DCG_EPSILON: f64 = 0.01;
/// Largest default exploration rate; the game needs `gamma < 1/2`.
pub const MAX_DEFAULT_GAMMA: f64 = 0.49;

/// How many grades each round reveals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FeedbackMode {
    /// The least the surrogate's estimator needs (top-1, or top-2 for RankSVM).
    #[default]
    Minimal,
    /// Every grade; the estimator degenerates to the exact gradient.
    Full,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnerConfig {
    pub surrogate: SurrogateKind,
    pub gamma: f64,
    pub eta: f64,
    pub radius: f64,
    pub horizon: usize,
    pub seed: u64,
    pub metric_cutoff: usize,
    pub feedback: FeedbackMode,
}

impl LearnerConfig {
    /// Defaults tuned to the horizon: `eta = T^{-2/3}`, `gamma = T^{-1/3}`
    /// (capped at 0.49 for very short games), `U = 1`, NDCG@10.
    pub fn new(surrogate: SurrogateKind, horizon: usize) -> Self {
        let t = horizon.max(1) as f64;
        Self {
            surrogate,
            gamma: default_gamma(horizon),
            eta: math::powf(t, -2.0 / 3.0),
            radius: 1.0,
            horizon,
            seed: 0,
            metric_cutoff: DEFAULT_METRIC_CUTOFF,
            feedback: FeedbackMode::Minimal,
        }
    }

    /// Configuration for a baseline; full-information ListNet steps with
    /// `eta = T^{-1/2}`.
    pub fn for_baseline(baseline: Baseline, horizon: usize) -> Self {
        let t = horizon.max(1) as f64;
        match baseline {
            Baseline::FullListNet => Self {
                eta: math::powf(t, -0.5),
                ..Self::new(SurrogateKind::ListNetCrossEntropy, horizon)
            },
            Baseline::RandomRanker => Self::new(SurrogateKind::ListNetCrossEntropy, horizon),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_radius(mut self, radius: f64) -> Self {
        self.radius = radius;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.surrogate.validate()?;
        if !(self.gamma > 0.0 && self.gamma < 0.5) {
            return Err(Error::InvalidConfig(format!(
                "exploration rate must lie in (0, 1/2), got {}",
                self.gamma
            )));
        }
        self.validate_common()
    }

    fn validate_common(&self) -> Result<()> {
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "learning rate must be finite and nonnegative, got {}",
                self.eta
            )));
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "ball radius must be positive, got {}",
                self.radius
            )));
        }
        if self.horizon == 0 {
            return Err(Error::InvalidConfig("horizon must be at least 1".into()));
        }
        if self.metric_cutoff == 0 {
            return Err(Error::InvalidConfig("NDCG cutoff must be at least 1".into()));
        }
        Ok(())
    }
}

/// `T^{-1/3}`, capped below 1/2.
pub fn default_gamma(horizon: usize) -> f64 {
    math::powf(horizon.max(1) as f64, -1.0 / 3.0).min(MAX_DEFAULT_GAMMA)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundRecord {
    /// 1-based.
    pub round: usize,
    /// Surrogate loss of the played scores against the full relevance.
    pub loss: f64,
    /// NDCG of the played ranking; `None` when the query has no relevant document.
    pub ndcg: Option<f64>,
    pub explored: bool,
    /// `|w_{t+1}|`.
    pub weight_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GameTrajectory {
    pub records: Vec<RoundRecord>,
    pub final_weights: WeightVector,
}

impl GameTrajectory {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn cumulative_loss(&self) -> f64 {
        self.records.iter().map(|r| r.loss).sum()
    }

    pub fn explored_rounds(&self) -> usize {
        self.records.iter().filter(|r| r.explored).count()
    }

    /// Running mean of NDCG over the rounds seen so far, skipping rounds
    /// with no relevant document. Updated as `avg += (x - avg) / n`.
    pub fn running_average_ndcg(&self) -> Vec<Option<f64>> {
        let mut mean = 0.0;
        let mut n = 0usize;
        self.records
            .iter()
            .map(|r| {
                if let Some(x) = r.ndcg {
                    n += 1;
                    mean += (x - mean) / n as f64;
                }
                (n > 0).then_some(mean)
            })
            .collect()
    }

    /// Final average NDCG, or `None` if no round had a relevant document.
    pub fn average_ndcg(&self) -> Option<f64> {
        self.running_average_ndcg().last().copied().flatten()
    }
}

/// State of one game: the current weights and the round's random source.
#[derive(Debug, Clone)]
pub struct Learner {
    config: LearnerConfig,
    estimator: EstimableSurrogate,
    weights: WeightVector,
    rng: ChaCha8Rng,
    round: usize,
}

impl Learner {
    /// Starts from `w_1 = 0` in dimension `dim`.
    pub fn new(config: LearnerConfig, dim: usize) -> Result<Self> {
        config.validate()?;
        let estimator = EstimableSurrogate::try_from(config.surrogate)?;
        Ok(Self {
            weights: WeightVector::zeros(dim, config.radius)?,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            estimator,
            config,
            round: 0,
        })
    }

    pub fn weights(&self) -> &WeightVector {
        &self.weights
    }

    pub fn config(&self) -> &LearnerConfig {
        &self.config
    }

    fn feedback_depth(&self, m: usize) -> usize {
        match self.config.feedback {
            FeedbackMode::Minimal => self.estimator.depth().min(m),
            FeedbackMode::Full => m,
        }
    }

    /// Plays one round against `(docs, relevance)`.
    pub fn play_round<O: RelevanceOracle + ?Sized>(
        &mut self,
        docs: &DocumentList,
        relevance: &O,
    ) -> Result<RoundRecord> {
        let m = docs.num_docs();
        if relevance.num_docs() != m {
            return Err(invalid_input!(
                "query {} has {m} documents but {} grades",
                docs.query_id(),
                relevance.num_docs()
            ));
        }
        let scores = docs.scores(self.weights.as_slice())?;
        let exploit = argsort_desc(scores.as_slice())?;
        let (played, explored) = sample_action(&scores, self.config.gamma, &mut self.rng)?;
        let played_perm = if explored {
            argsort_desc(played.as_slice())?
        } else {
            exploit.clone()
        };
        let feedback = extract_feedback(relevance, &played_perm, self.feedback_depth(m))?;
        let dist = PermutationDistribution::mixture(exploit, self.config.gamma)?;
        self.update(docs, &scores, &feedback, &dist)?;

        self.round += 1;
        let full = relevance.full();
        Ok(RoundRecord {
            round: self.round,
            loss: surrogates::loss(self.config.surrogate, played.as_slice(), full)?,
            ndcg: reported_ndcg(&played_perm, full, self.config.metric_cutoff)?,
            explored,
            weight_norm: self.weights.norm(),
        })
    }

    /// `w <- proj(w - eta * z)`, from feedback only.
    fn update(
        &mut self,
        docs: &DocumentList,
        scores: &ScoreVector,
        feedback: &TopKFeedback,
        dist: &PermutationDistribution,
    ) -> Result<()> {
        let estimate = surrogates::estimate_gradient(self.estimator, docs, scores, feedback, dist)?;
        self.step(&estimate.weight_grad)
    }

    fn step(&mut self, direction: &[f64]) -> Result<()> {
        let eta = self.config.eta;
        let moved = self
            .weights
            .as_slice()
            .iter()
            .zip(direction)
            .map(|(w, g)| w - eta * g)
            .collect();
        self.weights = project_l2_ball(&WeightVector::new(moved, self.config.radius)?);
        Ok(())
    }
}

fn reported_ndcg(
    perm: &Permutation,
    relevance: &crate::types::RelevanceVector,
    cutoff: usize,
) -> Result<Option<f64>> {
    let k = cutoff.min(perm.len());
    if z_k(relevance, k)? == 0.0 {
        return Ok(None);
    }
    ndcg_of_ranking(perm, relevance, k).map(Some)
}

fn next_query<I, Q>(stream: &mut I, round: usize) -> Result<Q>
where
    I: Iterator<Item = Q>,
{
    stream
        .next()
        .ok_or_else(|| Error::Data(format!("query stream exhausted before round {round}")))
}

/// Plays `cfg.horizon` rounds from `w_1 = 0` against `stream`.
pub fn run_game<I, Q>(cfg: &LearnerConfig, stream: I) -> Result<GameTrajectory>
where
    I: IntoIterator<Item = Q>,
    Q: core::borrow::Borrow<Query>,
{
    cfg.validate()?;
    let mut stream = stream.into_iter();
    let first = next_query(&mut stream, 1)?;
    let mut learner = Learner::new(cfg.clone(), first.borrow().docs.num_features())?;
    let mut records = Vec::with_capacity(cfg.horizon);
    records.push(learner.play_round(&first.borrow().docs, &first.borrow().relevance)?);
    for round in 2..=cfg.horizon {
        let q = next_query(&mut stream, round)?;
        let q = q.borrow();
        records.push(learner.play_round(&q.docs, &q.relevance)?);
    }
    Ok(GameTrajectory {
        records,
        final_weights: learner.weights,
    })
}

/// Reference algorithms that bracket the partial-feedback learner.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Baseline {
    /// Online gradient descent on the ListNet loss with the full relevance
    /// vector revealed every round, no exploration.
    FullListNet,
    /// A uniformly random ranking every round, ignoring all feedback.
    RandomRanker,
}

/// Runs a baseline with the same logging as [`run_game`]. The full-ListNet
/// baseline logs its own ListNet loss; the random ranker logs
/// `cfg.surrogate` at its random scores.
pub fn run_baseline<I, Q>(baseline: Baseline, cfg: &LearnerConfig, stream: I) -> Result<GameTrajectory>
where
    I: IntoIterator<Item = Q>,
    Q: core::borrow::Borrow<Query>,
{
    cfg.surrogate.validate()?;
    cfg.validate_common()?;
    let mut stream = stream.into_iter();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut weights: Option<WeightVector> = None;
    let mut records = Vec::with_capacity(cfg.horizon);
    for round in 1..=cfg.horizon {
        let q = next_query(&mut stream, round)?;
        let Query { docs, relevance } = q.borrow();
        let w = match &mut weights {
            Some(w) => w,
            None => weights.insert(WeightVector::zeros(docs.num_features(), cfg.radius)?),
        };
        let record = match baseline {
            Baseline::FullListNet => {
                let scores = docs.scores(w.as_slice())?;
                let perm = argsort_desc(scores.as_slice())?;
                let loss = surrogates::loss(
                    SurrogateKind::ListNetCrossEntropy,
                    scores.as_slice(),
                    relevance,
                )?;
                let grad = surrogates::gradient(
                    SurrogateKind::ListNetCrossEntropy,
                    scores.as_slice(),
                    relevance,
                )?;
                let direction = docs.transpose_mul(&grad)?;
                let moved = w
                    .as_slice()
                    .iter()
                    .zip(&direction)
                    .map(|(wi, g)| wi - cfg.eta * g)
                    .collect();
                *w = project_l2_ball(&WeightVector::new(moved, cfg.radius)?);
                RoundRecord {
                    round,
                    loss,
                    ndcg: reported_ndcg(&perm, relevance, cfg.metric_cutoff)?,
                    explored: false,
                    weight_norm: w.norm(),
                }
            }
            Baseline::RandomRanker => {
                let scores = uniform_scores(docs.num_docs(), &mut rng);
                let perm = argsort_desc(scores.as_slice())?;
                RoundRecord {
                    round,
                    loss: surrogates::loss(cfg.surrogate, scores.as_slice(), relevance)?,
                    ndcg: reported_ndcg(&perm, relevance, cfg.metric_cutoff)?,
                    explored: true,
                    weight_norm: w.norm(),
                }
            }
        };
        records.push(record);
    }
    Ok(GameTrajectory {
        records,
        final_weights: weights.expect("horizon is at least 1"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::RelevanceVector;
    use alloc::vec;
    use core::cell::Cell;
    use rand::Rng;

    fn query(rows: &[Vec<f64>], grades: &[u32]) -> Query {
        Query::new(
            DocumentList::from_rows("q", rows).unwrap(),
            RelevanceVector::new(grades.to_vec()).unwrap(),
        )
        .unwrap()
    }

    fn small_stream(n: usize, seed: u64) -> Vec<Query> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                let m = 3 + i % 3;
                let rows: Vec<Vec<f64>> = (0..m)
                    .map(|_| (0..3).map(|_| rng.gen_range(-0.5..0.5)).collect())
                    .collect();
                let grades: Vec<u32> = rows
                    .iter()
                    .map(|r| u32::from(r[0] + 0.3 * r[1] > 0.0) + u32::from(r[0] > 0.3))
                    .collect();
                query(&rows, &grades)
            })
            .collect()
    }

    #[test]
    fn defaults_follow_the_horizon() {
        let cfg = LearnerConfig::new(SurrogateKind::Squared, 1000);
        assert!((cfg.eta - 0.01).abs() < 1e-12);
        assert!((cfg.gamma - 0.1).abs() < 1e-12);
        assert_eq!(cfg.metric_cutoff, 10);
        let listnet = LearnerConfig::for_baseline(Baseline::FullListNet, 10_000);
        assert!((listnet.eta - 0.01).abs() < 1e-12);
        assert_eq!(LearnerConfig::new(SurrogateKind::Squared, 1).gamma, MAX_DEFAULT_GAMMA);
    }

    #[test]
    fn config_validation() {
        let mut cfg = LearnerConfig::new(SurrogateKind::Squared, 100);
        cfg.gamma = 0.5;
        assert!(cfg.validate().is_err());
        cfg.gamma = 0.2;
        cfg.eta = -1.0;
        assert!(cfg.validate().is_err());
        cfg.eta = 0.1;
        cfg.horizon = 0;
        assert!(cfg.validate().is_err());
        let listnet = LearnerConfig::new(SurrogateKind::ListNetCrossEntropy, 10);
        assert!(matches!(Learner::new(listnet, 3), Err(Error::Unsupported(_))));
    }

    #[test]
    fn zero_learning_rate_is_a_no_op() {
        let data = small_stream(50, 3);
        let mut cfg = LearnerConfig::new(SurrogateKind::RankSvmHinge, 50);
        cfg.eta = 0.0;
        let traj = run_game(&cfg, &data).unwrap();
        assert!(traj.final_weights.as_slice().iter().all(|&w| w == 0.0));
        assert!(traj.records.iter().all(|r| r.weight_norm == 0.0));
    }

    #[test]
    fn single_round_hand_trace() {
        // X has rows (1, 0), (0, 1), (1, 1); R = (2, 0, 1); w_1 = 0.
        let q = query(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]], &[2, 0, 1]);
        let mut cfg = LearnerConfig::new(SurrogateKind::Squared, 1);
        cfg.gamma = 0.4;
        cfg.eta = 0.05;
        cfg.radius = 10.0;
        cfg.seed = 7;
        let traj = run_game(&cfg, [&q]).unwrap();

        // replay the sampler by hand
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let u: f64 = rng.gen();
        let explored = u < 0.4;
        // s_1 = 0, so sigma_1 is the identity under the index tie-break
        let top = if explored {
            let s: Vec<f64> = (0..3).map(|_| rng.gen::<f64>()).collect();
            (0..3).fold(0, |best, i| if s[i] > s[best] { i } else { best })
        } else {
            0
        };
        let p_top = if top == 0 { 0.6 + 0.4 / 3.0 } else { 0.4 / 3.0 };
        let mut score_grad = [0.0; 3];
        score_grad[top] = -2.0 * f64::from([2, 0, 1][top]) / p_top;
        let rows = [[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]];
        let z: Vec<f64> = (0..2)
            .map(|c| (0..3).map(|r| rows[r][c] * score_grad[r]).sum())
            .collect();
        let w2: Vec<f64> = z.iter().map(|zi| -0.05 * zi).collect();
        let norm = (w2[0] * w2[0] + w2[1] * w2[1]).sqrt();
        let w2: Vec<f64> = w2.iter().map(|x| x * (10.0 / norm).min(1.0)).collect();

        assert_eq!(traj.records[0].explored, explored);
        for (a, b) in traj.final_weights.as_slice().iter().zip(&w2) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn full_feedback_steps_along_the_exact_gradient() {
        let q = query(&[vec![1.0, 0.2], vec![0.1, 1.0], vec![-0.4, 0.3]], &[1, 0, 2]);
        let mut cfg = LearnerConfig::new(SurrogateKind::KlListwise, 1);
        cfg.gamma = 0.3;
        cfg.eta = 0.1;
        cfg.feedback = FeedbackMode::Full;
        let traj = run_game(&cfg, [&q]).unwrap();
        let grad = surrogates::gradient(SurrogateKind::KlListwise, &[0.0; 3], &q.relevance).unwrap();
        let z = q.docs.transpose_mul(&grad).unwrap();
        let expected = project_l2_ball(
            &WeightVector::new(z.iter().map(|g| -0.1 * g).collect(), 1.0).unwrap(),
        );
        assert_eq!(traj.final_weights, expected);
    }

    #[test]
    fn weights_stay_in_the_ball() {
        let data = small_stream(400, 5);
        for kind in [
            SurrogateKind::Squared,
            SurrogateKind::RankSvmHinge,
            SurrogateKind::KlListwise,
            SurrogateKind::SmoothDcg { epsilon: 0.01 },
        ] {
            let mut cfg = LearnerConfig::new(kind, 400).with_radius(0.5);
            cfg.eta = 1.0;
            let traj = run_game(&cfg, &data).unwrap();
            assert_eq!(traj.len(), 400);
            for r in &traj.records {
                assert!(r.weight_norm <= 0.5 * (1.0 + 1e-12));
                assert!(r.loss.is_finite());
            }
        }
    }

    #[test]
    fn same_seed_same_trajectory() {
        let data = small_stream(300, 9);
        let cfg = LearnerConfig::new(SurrogateKind::RankSvmHinge, 300).with_seed(42);
        let a = run_game(&cfg, &data).unwrap();
        let b = run_game(&cfg, &data).unwrap();
        assert_eq!(a, b);
        let c = run_game(&cfg.clone().with_seed(43), &data).unwrap();
        assert_ne!(a.records, c.records);
    }

    #[test]
    fn horizon_one_and_exhaustion() {
        let data = small_stream(3, 1);
        let cfg = LearnerConfig::new(SurrogateKind::Squared, 1);
        assert_eq!(run_game(&cfg, &data).unwrap().len(), 1);
        let cfg = LearnerConfig::new(SurrogateKind::Squared, 4);
        assert!(matches!(run_game(&cfg, &data), Err(Error::Data(_))));
        assert!(matches!(
            run_baseline(Baseline::RandomRanker, &cfg, &data),
            Err(Error::Data(_))
        ));
    }

    #[test]
    fn exploration_count_concentrates() {
        let data = small_stream(20, 2);
        let mut cfg = LearnerConfig::new(SurrogateKind::Squared, 20_000);
        cfg.gamma = 0.2;
        let traj = run_game(&cfg, data.iter().cycle()).unwrap();
        let expected = 0.2 * 20_000.0;
        let got = traj.explored_rounds() as f64;
        assert!((got - expected).abs() <= 3.0 * expected.sqrt(), "{got}");
    }

    /// Relevance source whose full-vector accessor lies. The learner's
    /// weights must not notice.
    struct Canary {
        truth: RelevanceVector,
        poison: RelevanceVector,
        full_reads: Cell<usize>,
    }

    impl RelevanceOracle for Canary {
        fn num_docs(&self) -> usize {
            self.truth.len()
        }
        fn grade(&self, doc: usize) -> u32 {
            self.truth.grade(doc)
        }
        fn full(&self) -> &RelevanceVector {
            self.full_reads.set(self.full_reads.get() + 1);
            &self.poison
        }
    }

    #[test]
    fn update_sees_only_top_k_feedback() {
        let data = small_stream(200, 4);
        let cfg = LearnerConfig::new(SurrogateKind::RankSvmHinge, 200).with_seed(3);
        let mut honest = Learner::new(cfg.clone(), 3).unwrap();
        let mut watched = Learner::new(cfg, 3).unwrap();
        for q in &data {
            let canary = Canary {
                truth: q.relevance.clone(),
                poison: RelevanceVector::new(
                    q.relevance.grades().iter().map(|g| 3 - g.min(&3)).collect(),
                )
                .unwrap(),
                full_reads: Cell::new(0),
            };
            honest.play_round(&q.docs, &q.relevance).unwrap();
            watched.play_round(&q.docs, &canary).unwrap();
            assert_eq!(honest.weights(), watched.weights());
            // one read for reporting, none for the update
            assert_eq!(canary.full_reads.get(), 1);
        }
    }

    #[test]
    fn baselines() {
        let data = small_stream(30, 8);
        let mut cfg = LearnerConfig::for_baseline(Baseline::FullListNet, 30);
        cfg.eta = 0.0;
        let traj = run_baseline(Baseline::FullListNet, &cfg, &data).unwrap();
        assert!(traj.final_weights.as_slice().iter().all(|&w| w == 0.0));
        assert_eq!(traj.explored_rounds(), 0);

        let q = query(&[vec![1.0], vec![2.0], vec![3.0]], &[0, 1, 2]);
        let cfg = LearnerConfig::for_baseline(Baseline::RandomRanker, 100_000).with_seed(5);
        let traj = run_baseline(Baseline::RandomRanker, &cfg, core::iter::repeat(&q)).unwrap();
        // each of the 6 rankings gives a distinct NDCG@3 here
        let ideal = z_k(&q.relevance, 3).unwrap();
        let mut counts = [0usize; 6];
        let perms: Vec<Permutation> = Permutation::all(3).collect();
        for r in &traj.records {
            let v = r.ndcg.unwrap();
            let idx = perms
                .iter()
                .position(|p| (ndcg_of_ranking(p, &q.relevance, 3).unwrap() - v).abs() < 1e-15)
                .unwrap();
            counts[idx] += 1;
        }
        assert!(ideal > 0.0);
        for c in counts {
            assert!((c as f64 / 1e5 - 1.0 / 6.0).abs() < 0.01);
        }
    }

    #[test]
    fn running_average_skips_irrelevant_queries() {
        let rec = |ndcg| RoundRecord {
            round: 0,
            loss: 0.0,
            ndcg,
            explored: false,
            weight_norm: 0.0,
        };
        let traj = GameTrajectory {
            records: vec![rec(None), rec(Some(0.5)), rec(None), rec(Some(1.0))],
            final_weights: WeightVector::zeros(1, 1.0).unwrap(),
        };
        assert_eq!(
            traj.running_average_ndcg(),
            vec![None, Some(0.5), Some(0.5), Some(0.75)]
        );
    }
}
