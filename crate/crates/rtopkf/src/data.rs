//! Query streams: LETOR files and a planted-model synthetic generator.

use std::collections::HashMap;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rtopkf_core::{DocumentList, Query, RelevanceVector};

use crate::error::{Error, Result};

pub const DEFAULT_MAX_DOCS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct ParseOptions {
    /// Keep only the first `max_docs` documents of each query, in file order.
    pub max_docs: usize,
    /// Clip larger grades to this value.
    pub max_grade: Option<u32>,
}

impl Default for ParseOptions {
    fn default() -> Self {
        Self {
            max_docs: DEFAULT_MAX_DOCS,
            max_grade: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Corpus {
    pub queries: Vec<Query>,
    pub warnings: Vec<String>,
}

impl Corpus {
    pub fn num_docs(&self) -> usize {
        self.queries.iter().map(Query::num_docs).sum()
    }

    pub fn num_features(&self) -> usize {
        self.queries.first().map_or(0, |q| q.docs.num_features())
    }
}

struct RawDoc {
    grade: u32,
    features: Vec<(usize, f64)>,
}

fn parse_line(line_no: usize, line: &str) -> Result<Option<(String, RawDoc)>> {
    let content = line.split('#').next().unwrap_or("").trim();
    if content.is_empty() {
        return Ok(None);
    }
    let mut fields = content.split_whitespace();
    let grade_field = fields.next().expect("nonempty line has a field");
    let grade: u32 = grade_field
        .parse()
        .map_err(|_| Error::parse(line_no, format!("grade {grade_field:?} is not a nonnegative integer")))?;
    let qid = match fields.next() {
        Some(f) => f
            .strip_prefix("qid:")
            .filter(|id| !id.is_empty())
            .ok_or_else(|| Error::parse(line_no, format!("expected qid:<id>, found {f:?}")))?,
        None => return Err(Error::parse(line_no, "missing qid")),
    };
    let mut features = Vec::new();
    for field in fields {
        let (fid, value) = field
            .split_once(':')
            .ok_or_else(|| Error::parse(line_no, format!("expected <fid>:<value>, found {field:?}")))?;
        let fid: usize = fid
            .parse()
            .ok()
            .filter(|&f| f > 0)
            .ok_or_else(|| Error::parse(line_no, format!("feature id {fid:?} is not a positive integer")))?;
        let value: f64 = value
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| Error::parse(line_no, format!("feature {fid} has non-numeric value {value:?}")))?;
        if features.iter().any(|&(f, _)| f == fid) {
            return Err(Error::parse(line_no, format!("feature {fid} repeated")));
        }
        features.push((fid, value));
    }
    Ok(Some((qid.to_string(), RawDoc { grade, features })))
}

/// Parses `<grade> qid:<id> <fid>:<value> ... [# comment]` lines. Documents
/// are grouped by qid in order of first appearance; missing features are 0.
pub fn parse_letor(input: &str, opts: &ParseOptions) -> Result<Corpus> {
    if opts.max_docs == 0 {
        return Err(Error::Config("max_docs must be at least 1".into()));
    }
    let mut order: Vec<String> = Vec::new();
    let mut groups: HashMap<String, Vec<RawDoc>> = HashMap::new();
    let mut dim = 0;
    for (i, line) in input.lines().enumerate() {
        if let Some((qid, doc)) = parse_line(i + 1, line)? {
            dim = doc.features.iter().map(|&(f, _)| f).fold(dim, usize::max);
            groups
                .entry(qid.clone())
                .or_insert_with(|| {
                    order.push(qid);
                    Vec::new()
                })
                .push(doc);
        }
    }
    let dim = dim.max(1);
    let mut corpus = Corpus::default();
    for qid in order {
        let mut docs = groups.remove(&qid).expect("grouped above");
        if docs.len() > opts.max_docs {
            corpus.warnings.push(format!(
                "query {qid}: kept the first {} of {} documents",
                opts.max_docs,
                docs.len()
            ));
            docs.truncate(opts.max_docs);
        }
        if docs.len() == 1 {
            corpus.warnings.push(format!("query {qid} has a single document"));
        }
        let mut features = vec![0.0; docs.len() * dim];
        let mut grades = Vec::with_capacity(docs.len());
        for (row, doc) in docs.iter().enumerate() {
            for &(fid, value) in &doc.features {
                features[row * dim + fid - 1] = value;
            }
            let grade = match opts.max_grade {
                Some(cap) if doc.grade > cap => {
                    corpus
                        .warnings
                        .push(format!("query {qid}: grade {} clipped to {cap}", doc.grade));
                    cap
                }
                _ => doc.grade,
            };
            grades.push(grade);
        }
        let list = DocumentList::new(qid, docs.len(), dim, features)?;
        corpus
            .queries
            .push(Query::new(list, RelevanceVector::new(grades)?)?);
    }
    Ok(corpus)
}

/// Canonical LETOR text: grade first, every feature id in ascending order.
pub fn serialize_letor(queries: &[Query]) -> String {
    let mut out = String::new();
    for q in queries {
        for (doc, row) in q.docs.rows().enumerate() {
            write!(out, "{} qid:{}", q.relevance.grade(doc), q.docs.query_id()).unwrap();
            for (f, v) in row.iter().enumerate() {
                write!(out, " {}:{v:?}", f + 1).unwrap();
            }
            out.push('\n');
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NormalizationStats {
    pub rows: usize,
    pub scaled: usize,
    pub max_norm_before: f64,
}

/// Scales every feature row longer than `row_radius` back onto that sphere.
pub fn normalize_features(queries: &mut [Query], row_radius: f64) -> Result<NormalizationStats> {
    if !(row_radius > 0.0 && row_radius.is_finite()) {
        return Err(Error::Config(format!("row radius must be positive, got {row_radius}")));
    }
    let mut stats = NormalizationStats::default();
    for q in queries {
        for doc in 0..q.docs.num_docs() {
            let norm = q.docs.row(doc).iter().map(|x| x * x).sum::<f64>().sqrt();
            stats.rows += 1;
            stats.max_norm_before = stats.max_norm_before.max(norm);
            if norm > row_radius {
                q.docs.scale_row(doc, row_radius / norm);
                stats.scaled += 1;
            }
        }
    }
    Ok(stats)
}

/// Planted linear model with grade noise.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub num_docs: usize,
    pub num_features: usize,
    /// Probability that a grade is replaced by a uniform one.
    pub noise: f64,
    pub max_grade: u32,
    pub row_radius: f64,
    /// Planted direction; drawn from the seed when `None`.
    pub w_true: Option<Vec<f64>>,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn new(num_docs: usize, num_features: usize, noise: f64) -> Self {
        Self {
            num_docs,
            num_features,
            noise,
            max_grade: 2,
            row_radius: 1.0,
            w_true: None,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_docs < 2 {
            return Err(Error::Config(format!("synthetic queries need m >= 2, got {}", self.num_docs)));
        }
        if self.num_features == 0 {
            return Err(Error::Config("synthetic data needs d >= 1".into()));
        }
        if !(0.0..0.5).contains(&self.noise) {
            return Err(Error::Config(format!("noise must lie in [0, 0.5), got {}", self.noise)));
        }
        if !(self.row_radius > 0.0 && self.row_radius.is_finite()) {
            return Err(Error::Config(format!("row radius must be positive, got {}", self.row_radius)));
        }
        if let Some(w) = &self.w_true {
            if w.len() != self.num_features {
                return Err(Error::Config(format!(
                    "planted weights have dimension {}, expected {}",
                    w.len(),
                    self.num_features
                )));
            }
            if !w.iter().any(|x| *x != 0.0) || w.iter().any(|x| !x.is_finite()) {
                return Err(Error::Config("planted weights must be finite and nonzero".into()));
            }
        }
        Ok(())
    }
}

/// Endless synthetic queries. Rows are uniform in the `R_D` ball; the clean
/// grade splits `[-R_D |w|, R_D |w|]` into `R_max + 1` equal bins.
#[derive(Debug, Clone)]
pub struct SyntheticStream {
    spec: SyntheticSpec,
    w_true: Vec<f64>,
    rng: ChaCha8Rng,
    issued: usize,
}

impl SyntheticStream {
    pub fn new(spec: SyntheticSpec) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let w_true = match &spec.w_true {
            Some(w) => w.clone(),
            None => unit_direction(&mut rng, spec.num_features),
        };
        Ok(Self {
            spec,
            w_true,
            rng,
            issued: 0,
        })
    }

    pub fn w_true(&self) -> &[f64] {
        &self.w_true
    }

    /// Grade of a feature row under the planted model, before noise.
    pub fn clean_grade(&self, row: &[f64]) -> u32 {
        let bound = self.spec.row_radius * self.w_true.iter().map(|x| x * x).sum::<f64>().sqrt();
        let x: f64 = row.iter().zip(&self.w_true).map(|(a, b)| a * b).sum();
        let bins = f64::from(self.spec.max_grade) + 1.0;
        let bin = ((x + bound) / (2.0 * bound) * bins).floor();
        bin.clamp(0.0, f64::from(self.spec.max_grade)) as u32
    }

    fn next_query(&mut self) -> Query {
        let SyntheticSpec {
            num_docs: m,
            num_features: d,
            row_radius,
            ..
        } = self.spec;
        let mut features = Vec::with_capacity(m * d);
        for _ in 0..m {
            let direction = unit_direction(&mut self.rng, d);
            let r = row_radius * self.rng.gen::<f64>().powf(1.0 / d as f64);
            features.extend(direction.iter().map(|x| x * r));
        }
        let grades = features
            .chunks(d)
            .map(|row| {
                let clean = self.clean_grade(row);
                if self.rng.gen::<f64>() < self.spec.noise {
                    self.rng.gen_range(0..=self.spec.max_grade)
                } else {
                    clean
                }
            })
            .collect();
        self.issued += 1;
        let docs = DocumentList::new(format!("syn-{}", self.issued), m, d, features)
            .expect("synthetic rows are finite");
        Query::new(docs, RelevanceVector::new(grades).expect("nonempty grades"))
            .expect("matching lengths")
    }
}

impl Iterator for SyntheticStream {
    type Item = Query;

    fn next(&mut self) -> Option<Query> {
        Some(self.next_query())
    }
}

fn unit_direction<R: Rng>(rng: &mut R, d: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Replays a loaded corpus, optionally cycling and reshuffling each pass.
#[derive(Debug, Clone)]
pub struct CorpusStream<'a> {
    corpus: &'a [Query],
    order: Vec<usize>,
    pos: usize,
    cycle: bool,
    shuffle: Option<ChaCha8Rng>,
}

impl<'a> CorpusStream<'a> {
    pub fn new(corpus: &'a [Query], cycle: bool, shuffle_seed: Option<u64>) -> Self {
        let mut stream = Self {
            corpus,
            order: (0..corpus.len()).collect(),
            pos: 0,
            cycle,
            shuffle: shuffle_seed.map(ChaCha8Rng::seed_from_u64),
        };
        stream.reshuffle();
        stream
    }

    fn reshuffle(&mut self) {
        if let Some(rng) = &mut self.shuffle {
            self.order.sort_unstable();
            self.order.shuffle(rng);
        }
    }
}

impl<'a> Iterator for CorpusStream<'a> {
    type Item = &'a Query;

    fn next(&mut self) -> Option<&'a Query> {
        if self.corpus.is_empty() {
            return None;
        }
        if self.pos == self.order.len() {
            if !self.cycle {
                return None;
            }
            self.pos = 0;
            self.reshuffle();
        }
        let q = &self.corpus[self.order[self.pos]];
        self.pos += 1;
        Some(q)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_line() {
        let c = parse_letor("2 qid:1 1:0.5 3:1.0", &ParseOptions::default()).unwrap();
        assert_eq!(c.queries.len(), 1);
        let q = &c.queries[0];
        assert_eq!(q.docs.row(0), &[0.5, 0.0, 1.0]);
        assert_eq!(q.relevance.grades(), &[2]);
    }

    #[test]
    fn grouping_and_order() {
        let text = "1 qid:7 1:1\n0 qid:3 2:1 # note\n\n2 qid:7 1:2\r\n# only a comment\n";
        let c = parse_letor(text, &ParseOptions::default()).unwrap();
        let ids: Vec<_> = c.queries.iter().map(|q| q.docs.query_id().to_string()).collect();
        assert_eq!(ids, ["7", "3"]);
        assert_eq!(c.queries[0].num_docs(), 2);
        assert_eq!(c.queries[0].relevance.grades(), &[1, 2]);
        assert_eq!(c.num_features(), 2);
    }

    #[test]
    fn errors_name_the_line() {
        let err = parse_letor("x qid:1 1:0.5", &ParseOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }), "{err}");
        let err = parse_letor("1 qid:1 1:0.5\n1 qid:1 1:zz", &ParseOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        for bad in ["1 1:0.5", "1 qid:1 0:1", "1 qid:1 2", "1 qid:1 1:1 1:2", "-1 qid:1 1:1", "1 qid:1 1:nan"] {
            assert!(parse_letor(bad, &ParseOptions::default()).is_err(), "{bad}");
        }
    }

    #[test]
    fn empty_input_is_an_empty_corpus() {
        let c = parse_letor("", &ParseOptions::default()).unwrap();
        assert!(c.queries.is_empty());
        assert_eq!(c.num_docs(), 0);
    }

    #[test]
    fn caps_and_clipping() {
        let text = "5 qid:1 1:1\n1 qid:1 1:2\n0 qid:1 1:3\n1 qid:2 1:1";
        let opts = ParseOptions {
            max_docs: 2,
            max_grade: Some(3),
        };
        let c = parse_letor(text, &opts).unwrap();
        assert_eq!(c.queries[0].relevance.grades(), &[3, 1]);
        assert_eq!(c.warnings.len(), 3, "{:?}", c.warnings);
    }

    #[test]
    fn normalization() {
        let mut qs = parse_letor("1 qid:1 1:3 2:4\n0 qid:1 1:0.1\n0 qid:1 1:0", &ParseOptions::default())
            .unwrap()
            .queries;
        let stats = normalize_features(&mut qs, 1.0).unwrap();
        let row = qs[0].docs.row(0);
        assert!((row[0] - 0.6).abs() < 1e-15 && (row[1] - 0.8).abs() < 1e-15);
        assert_eq!(qs[0].docs.row(1), &[0.1, 0.0]);
        assert_eq!(qs[0].docs.row(2), &[0.0, 0.0]);
        assert_eq!((stats.rows, stats.scaled, stats.max_norm_before), (3, 1, 5.0));
    }

    #[test]
    fn synthetic_grades_at_the_extremes() {
        let spec = SyntheticSpec {
            w_true: Some(vec![1.0, 0.0]),
            max_grade: 3,
            ..SyntheticSpec::new(4, 2, 0.0)
        };
        let stream = SyntheticStream::new(spec).unwrap();
        assert_eq!(stream.clean_grade(&[1.0, 0.0]), 3);
        assert_eq!(stream.clean_grade(&[-1.0, 0.0]), 0);
    }

    #[test]
    fn synthetic_stream_is_reproducible_and_bounded() {
        let spec = SyntheticSpec {
            seed: 9,
            ..SyntheticSpec::new(6, 4, 0.2)
        };
        let a: Vec<Query> = SyntheticStream::new(spec.clone()).unwrap().take(50).collect();
        let b: Vec<Query> = SyntheticStream::new(spec).unwrap().take(50).collect();
        assert_eq!(a, b);
        for q in &a {
            assert!(q.docs.max_row_norm() <= 1.0 + 1e-12);
            assert!(q.relevance.max_grade() <= 2);
        }
        assert!(SyntheticStream::new(SyntheticSpec::new(1, 2, 0.0)).is_err());
        assert!(SyntheticStream::new(SyntheticSpec::new(3, 2, 0.5)).is_err());
    }

    #[test]
    fn corpus_cycling() {
        let qs = parse_letor("1 qid:a 1:1\n0 qid:b 1:1\n2 qid:c 1:1", &ParseOptions::default())
            .unwrap()
            .queries;
        let ids = |s: CorpusStream| s.take(6).map(|q| q.docs.query_id().to_string()).collect::<Vec<_>>();
        assert_eq!(ids(CorpusStream::new(&qs, true, None)), ["a", "b", "c", "a", "b", "c"]);
        assert_eq!(CorpusStream::new(&qs, false, None).count(), 3);
        let shuffled = ids(CorpusStream::new(&qs, true, Some(1)));
        assert_eq!(shuffled, ids(CorpusStream::new(&qs, true, Some(1))));
        let mut first: Vec<_> = shuffled[..3].to_vec();
        first.sort();
        assert_eq!(first, ["a", "b", "c"]);
    }
}
