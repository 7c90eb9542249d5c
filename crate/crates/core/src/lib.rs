//! Online learning to rank from top-k feedback.
//!
//! A learner scores each query's documents with a linear model, plays a
//! ranking drawn from an exploit/explore mixture, and observes only the
//! relevance grades of the top `k` ranked documents. From that feedback it
//! builds an unbiased estimate of the surrogate gradient and takes a
//! projected online gradient step.
//!
//! This crate is `no_std` (it needs `alloc`) and holds the algorithmic core:
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`types`] | documents, relevance, scores, weights, permutations |
//! | [`metrics`] | DCG/NDCG@k, ideal DCG, deterministic argsort |
//! | [`sampling`] | exploration mixture, prefix marginals, top-k feedback |
//! | [`surrogates`] | losses, gradients, unbiased top-k gradient estimators |
//! | [`learner`] | the online game loop and the two baselines |
//! | [`oracle`] | exact enumeration, finite differences, hindsight comparator, regret |
//! | [`impossibility`] | top-1 feedback counterexample for NDCG-calibrated surrogates |
//!
//! File formats, synthetic data, and the command-line front end live in the
//! `rtopkf` companion crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod error;
pub mod impossibility;
pub mod learner;
pub(crate) mod math;
pub mod metrics;
pub mod oracle;
pub mod sampling;
pub mod surrogates;
pub mod types;

pub use error::{Error, Result};
pub use learner::{
    run_baseline, run_game, Baseline, FeedbackMode, GameTrajectory, Learner, LearnerConfig,
    RoundRecord,
};
pub use metrics::{argsort_desc, ndcg_at_k, z_k};
pub use sampling::{
    extract_feedback, pair_marginal_sum, prefix_marginal, sample_action, PermutationDistribution,
    RelevanceOracle, TopKFeedback,
};
pub use surrogates::{EstimableSurrogate, FeedbackDepth, GradientEstimate, SurrogateKind};
pub use types::{
    project_l2_ball, DocumentList, Permutation, Query, RelevanceVector, ScoreVector, WeightVector,
};
