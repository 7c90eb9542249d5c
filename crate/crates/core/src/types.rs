//! Domain types shared by every module.
//!
//! Storage is 0-based: document `i` is row `i` of the feature matrix and rank
//! `r` is slot `r` of [`Permutation::rank_to_doc`]. Only the formulas in
//! [`crate::metrics`] shift to 1-based ranks.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid_input, Error, Result};
use crate::math;

/// The documents of one query: an `m x d` row-major feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DocumentList {
    query_id: String,
    features: Vec<f64>,
    num_docs: usize,
    num_features: usize,
}

impl DocumentList {
    pub fn new(
        query_id: impl Into<String>,
        num_docs: usize,
        num_features: usize,
        features: Vec<f64>,
    ) -> Result<Self> {
        if num_docs == 0 {
            return Err(invalid_input!("a document list needs at least one document"));
        }
        if num_features == 0 {
            return Err(invalid_input!("documents need at least one feature"));
        }
        if features.len() != num_docs * num_features {
            return Err(invalid_input!(
                "feature buffer has {} entries, expected {}x{}",
                features.len(),
                num_docs,
                num_features
            ));
        }
        if let Some(pos) = features.iter().position(|x| !x.is_finite()) {
            return Err(invalid_input!(
                "non-finite feature at document {}, feature {}",
                pos / num_features,
                pos % num_features
            ));
        }
        Ok(Self {
            query_id: query_id.into(),
            features,
            num_docs,
            num_features,
        })
    }

    pub fn from_rows(query_id: impl Into<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(invalid_input!("ragged feature rows"));
        }
        let features = rows.iter().flatten().copied().collect();
        Self::new(query_id, rows.len(), d, features)
    }

    /// The `m x m` identity matrix, under which scores equal weights.
    pub fn identity(m: usize) -> Self {
        let mut features = vec![0.0; m * m];
        for i in 0..m {
            features[i * m + i] = 1.0;
        }
        Self {
            query_id: String::from("identity"),
            features,
            num_docs: m,
            num_features: m,
        }
    }

    pub fn query_id(&self) -> &str {
        &self.query_id
    }

    pub fn num_docs(&self) -> usize {
        self.num_docs
    }

    pub fn num_features(&self) -> usize {
        self.num_features
    }

    pub fn row(&self, doc: usize) -> &[f64] {
        let start = doc * self.num_features;
        &self.features[start..start + self.num_features]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.features.chunks_exact(self.num_features)
    }

    /// Multiplies one row by `factor`.
    pub fn scale_row(&mut self, doc: usize, factor: f64) {
        let start = doc * self.num_features;
        for x in &mut self.features[start..start + self.num_features] {
            *x *= factor;
        }
    }

    /// Keeps the first `max_docs` documents.
    pub fn truncate(&mut self, max_docs: usize) {
        let keep = max_docs.max(1).min(self.num_docs);
        self.features.truncate(keep * self.num_features);
        self.num_docs = keep;
    }

    pub fn max_row_norm(&self) -> f64 {
        self.rows().map(math::norm2).fold(0.0, f64::max)
    }

    /// `X w`.
    pub fn scores(&self, weights: &[f64]) -> Result<ScoreVector> {
        if weights.len() != self.num_features {
            return Err(invalid_input!(
                "weight vector has length {}, documents have {} features",
                weights.len(),
                self.num_features
            ));
        }
        ScoreVector::new(self.rows().map(|row| math::dot(row, weights)).collect())
    }

    /// `X^T g` for a score-space vector `g`.
    pub fn transpose_mul(&self, score_space: &[f64]) -> Result<Vec<f64>> {
        if score_space.len() != self.num_docs {
            return Err(invalid_input!(
                "score-space vector has length {}, expected {}",
                score_space.len(),
                self.num_docs
            ));
        }
        let mut out = vec![0.0; self.num_features];
        for (row, &g) in self.rows().zip(score_space) {
            if g != 0.0 {
                for (o, x) in out.iter_mut().zip(row) {
                    *o += g * x;
                }
            }
        }
        Ok(out)
    }
}

/// Graded relevance of each document of a query.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RelevanceVector {
    grades: Vec<u32>,
}

impl RelevanceVector {
    pub fn new(grades: Vec<u32>) -> Result<Self> {
        if grades.is_empty() {
            return Err(invalid_input!("relevance vector is empty"));
        }
        Ok(Self { grades })
    }

    /// Like [`RelevanceVector::new`] but rejects grades above `max_grade`.
    pub fn with_max(grades: Vec<u32>, max_grade: u32) -> Result<Self> {
        if let Some(g) = grades.iter().find(|&&g| g > max_grade) {
            return Err(Error::Range(alloc::format!(
                "grade {g} exceeds maximum {max_grade}"
            )));
        }
        Self::new(grades)
    }

    pub fn len(&self) -> usize {
        self.grades.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grades.is_empty()
    }

    pub fn grades(&self) -> &[u32] {
        &self.grades
    }

    pub fn grade(&self, doc: usize) -> u32 {
        self.grades[doc]
    }

    pub fn max_grade(&self) -> u32 {
        self.grades.iter().copied().max().unwrap_or(0)
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.grades.iter().map(|&g| f64::from(g)).collect()
    }
}

/// Finite real scores, one per document.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector(Vec<f64>);

impl ScoreVector {
    pub fn new(scores: Vec<f64>) -> Result<Self> {
        if scores.is_empty() {
            return Err(invalid_input!("score vector is empty"));
        }
        if let Some(i) = scores.iter().position(|x| !x.is_finite()) {
            return Err(invalid_input!("non-finite score at document {i}"));
        }
        Ok(Self(scores))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

/// A linear ranker's weights together with the radius `U` of its feasible ball.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    weights: Vec<f64>,
    radius: f64,
}

impl WeightVector {
    pub fn new(weights: Vec<f64>, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidConfig(alloc::format!(
                "ball radius must be positive and finite, got {radius}"
            )));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(invalid_input!("non-finite weight"));
        }
        Ok(Self { weights, radius })
    }

    pub fn zeros(dim: usize, radius: f64) -> Result<Self> {
        Self::new(vec![0.0; dim], radius)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.weights
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.weights
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn norm(&self) -> f64 {
        math::norm2(&self.weights)
    }
}

/// Euclidean projection onto the ball of radius `U`: `w * min(1, U / |w|)`.
pub fn project_l2_ball(w: &WeightVector) -> WeightVector {
    let norm = w.norm();
    let weights = if norm > w.radius {
        let scale = w.radius / norm;
        w.weights.iter().map(|x| x * scale).collect()
    } else {
        w.weights.clone()
    };
    WeightVector {
        weights,
        radius: w.radius,
    }
}

/// A ranking of `m` documents, stored in both directions.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Permutation {
    rank_to_doc: Vec<usize>,
    doc_to_rank: Vec<usize>,
}

impl Permutation {
    pub fn from_rank_to_doc(rank_to_doc: Vec<usize>) -> Result<Self> {
        let m = rank_to_doc.len();
        if m == 0 {
            return Err(invalid_input!("empty permutation"));
        }
        let mut doc_to_rank = vec![usize::MAX; m];
        for (rank, &doc) in rank_to_doc.iter().enumerate() {
            if doc >= m || doc_to_rank[doc] != usize::MAX {
                return Err(invalid_input!("{rank_to_doc:?} is not a permutation"));
            }
            doc_to_rank[doc] = rank;
        }
        Ok(Self {
            rank_to_doc,
            doc_to_rank,
        })
    }

    pub fn identity(m: usize) -> Self {
        let ids: Vec<usize> = (0..m).collect();
        Self {
            rank_to_doc: ids.clone(),
            doc_to_rank: ids,
        }
    }

    pub fn len(&self) -> usize {
        self.rank_to_doc.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rank_to_doc.is_empty()
    }

    pub fn rank_to_doc(&self) -> &[usize] {
        &self.rank_to_doc
    }

    pub fn doc_to_rank(&self) -> &[usize] {
        &self.doc_to_rank
    }

    /// Document placed at (0-based) `rank`.
    pub fn doc_at(&self, rank: usize) -> usize {
        self.rank_to_doc[rank]
    }

    /// (0-based) rank of `doc`.
    pub fn rank_of(&self, doc: usize) -> usize {
        self.doc_to_rank[doc]
    }

    pub fn starts_with(&self, prefix: &[usize]) -> bool {
        self.rank_to_doc.starts_with(prefix)
    }

    /// Position of this permutation in the lexicographic order of `S_m`.
    pub fn lex_index(&self) -> usize {
        let m = self.len();
        let mut index = 0;
        let mut used = vec![false; m];
        for (rank, &doc) in self.rank_to_doc.iter().enumerate() {
            let smaller_unused = used[..doc].iter().filter(|&&u| !u).count();
            index += smaller_unused * factorial(m - rank - 1);
            used[doc] = true;
        }
        index
    }

    /// All `m!` permutations in lexicographic order of `rank_to_doc`.
    pub fn all(m: usize) -> Permutations {
        Permutations {
            next: (m > 0).then(|| (0..m).collect()),
        }
    }
}

pub(crate) fn factorial(n: usize) -> usize {
    (1..=n).product()
}

/// Iterator over `S_m` in lexicographic order.
#[derive(Debug, Clone)]
pub struct Permutations {
    next: Option<Vec<usize>>,
}

impl Iterator for Permutations {
    type Item = Permutation;

    fn next(&mut self) -> Option<Permutation> {
        let current = self.next.take()?;
        let mut succ = current.clone();
        if next_lexicographic(&mut succ) {
            self.next = Some(succ);
        }
        Some(Permutation::from_rank_to_doc(current).expect("generated permutation"))
    }
}

fn next_lexicographic(seq: &mut [usize]) -> bool {
    let Some(pivot) = seq.windows(2).rposition(|w| w[0] < w[1]) else {
        return false;
    };
    let successor = seq
        .iter()
        .rposition(|&x| x > seq[pivot])
        .expect("a larger element exists right of the pivot");
    seq.swap(pivot, successor);
    seq[pivot + 1..].reverse();
    true
}

/// One round's adversary move: a query's documents and their relevance.
#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    pub docs: DocumentList,
    pub relevance: RelevanceVector,
}

impl Query {
    pub fn new(docs: DocumentList, relevance: RelevanceVector) -> Result<Self> {
        if docs.num_docs() != relevance.len() {
            return Err(invalid_input!(
                "query {} has {} documents but {} grades",
                docs.query_id(),
                docs.num_docs(),
                relevance.len()
            ));
        }
        Ok(Self { docs, relevance })
    }

    pub fn num_docs(&self) -> usize {
        self.docs.num_docs()
    }
}
