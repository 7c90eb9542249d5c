//! Experiment settings and their `key = value` file format.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rtopkf_core::learner::{default_gamma, DEFAULT_METRIC_CUTOFF, DEFAULT_SMOOTH_DCG_EPSILON};
use rtopkf_core::{Baseline, FeedbackMode, LearnerConfig, SurrogateKind};

use crate::data::{SyntheticSpec, DEFAULT_MAX_DOCS};
use crate::error::{Error, Result};

/// Which player runs the game.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    /// The partial-feedback learner.
    TopK,
    FullListNet,
    Random,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Self::TopK => "topk",
            Self::FullListNet => "full_listnet",
            Self::Random => "random",
        }
    }

    pub fn baseline(self) -> Option<Baseline> {
        match self {
            Self::TopK => None,
            Self::FullListNet => Some(Baseline::FullListNet),
            Self::Random => Some(Baseline::RandomRanker),
        }
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "topk" => Ok(Self::TopK),
            "full_listnet" => Ok(Self::FullListNet),
            "random" => Ok(Self::Random),
            _ => Err(Error::Config(format!(
                "unknown algorithm {s:?} (expected topk, full_listnet, random)"
            ))),
        }
    }
}

/// Surrogate names as used on the command line and in config files.
pub fn parse_surrogate(name: &str, epsilon: f64) -> Result<SurrogateKind> {
    match name {
        "squared" => Ok(SurrogateKind::Squared),
        "ranksvm" => Ok(SurrogateKind::RankSvmHinge),
        "kl" => Ok(SurrogateKind::KlListwise),
        "smoothdcg" => Ok(SurrogateKind::smooth_dcg(epsilon)?),
        "listnet" => Ok(SurrogateKind::ListNetCrossEntropy),
        _ => Err(Error::Config(format!(
            "unknown surrogate {name:?} (expected squared, ranksvm, kl, smoothdcg, listnet)"
        ))),
    }
}

/// `m,d,noise` for the synthetic generator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticShape {
    pub num_docs: usize,
    pub num_features: usize,
    pub noise: f64,
}

impl FromStr for SyntheticShape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("expected m,d,noise, found {s:?}"));
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        let [m, d, noise] = parts[..] else {
            return Err(bad());
        };
        Ok(Self {
            num_docs: m.parse().map_err(|_| bad())?,
            num_features: d.parse().map_err(|_| bad())?,
            noise: noise.parse().map_err(|_| bad())?,
        })
    }
}

impl std::fmt::Display for SyntheticShape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{},{},{:?}", self.num_docs, self.num_features, self.noise)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub algorithm: Algorithm,
    /// One of squared, ranksvm, kl, smoothdcg, listnet.
    pub surrogate: String,
    pub epsilon: f64,
    /// `None`: `T^{-1/3}`, capped at 0.49.
    pub gamma: Option<f64>,
    /// `None`: `T^{-2/3}` (`T^{-1/2}` for full-feedback ListNet).
    pub eta: Option<f64>,
    pub radius: f64,
    pub horizon: usize,
    pub seed: u64,
    pub cutoff: usize,
    pub feedback: FeedbackMode,
    /// LETOR file; when absent the synthetic generator is used.
    pub data: Option<PathBuf>,
    pub synthetic: SyntheticShape,
    pub grades: u32,
    pub row_radius: f64,
    pub data_seed: u64,
    pub max_docs: usize,
    /// Reshuffle a file corpus on every pass.
    pub shuffle: bool,
    pub out_dir: PathBuf,
    /// Add a regret line to the summary (convex surrogates only).
    pub regret: bool,
    pub seeds: usize,
    pub horizons: Vec<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::TopK,
            surrogate: "squared".into(),
            epsilon: DEFAULT_SMOOTH_DCG_EPSILON,
            gamma: None,
            eta: None,
            radius: 2.0,
            horizon: 10_000,
            seed: 0,
            cutoff: DEFAULT_METRIC_CUTOFF,
            feedback: FeedbackMode::Minimal,
            data: None,
            synthetic: SyntheticShape {
                num_docs: 10,
                num_features: 5,
                noise: 0.1,
            },
            grades: 2,
            row_radius: 1.0,
            data_seed: 0,
            max_docs: DEFAULT_MAX_DOCS,
            shuffle: false,
            out_dir: PathBuf::from("out"),
            regret: false,
            seeds: 5,
            horizons: vec![1_000, 10_000, 100_000],
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("bad value {value:?} for {key}")))
}

fn parse_auto(key: &str, value: &str) -> Result<Option<f64>> {
    if value == "auto" {
        Ok(None)
    } else {
        parse_value(key, value).map(Some)
    }
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(Error::Config(format!("bad value {value:?} for {key} (expected true or false)"))),
    }
}

fn show_auto(v: Option<f64>) -> String {
    v.map_or_else(|| "auto".into(), |x| format!("{x:?}"))
}

impl ExperimentConfig {
    pub fn surrogate_kind(&self) -> Result<SurrogateKind> {
        parse_surrogate(&self.surrogate, self.epsilon)
    }

    /// Sets one key. Unknown keys are an error.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "algorithm" => self.algorithm = value.parse()?,
            "surrogate" => {
                parse_surrogate(value, self.epsilon.max(f64::MIN_POSITIVE))?;
                self.surrogate = value.into();
            }
            "epsilon" => self.epsilon = parse_value(key, value)?,
            "gamma" => self.gamma = parse_auto(key, value)?,
            "eta" => self.eta = parse_auto(key, value)?,
            "radius" => self.radius = parse_value(key, value)?,
            "horizon" => self.horizon = parse_value(key, value)?,
            "seed" => self.seed = parse_value(key, value)?,
            "cutoff" => self.cutoff = parse_value(key, value)?,
            "feedback" => {
                self.feedback = match value {
                    "minimal" => FeedbackMode::Minimal,
                    "full" => FeedbackMode::Full,
                    _ => return Err(Error::Config(format!("bad feedback {value:?} (expected minimal or full)"))),
                }
            }
            "data" => self.data = (value != "none").then(|| PathBuf::from(value)),
            "synthetic" => self.synthetic = value.parse()?,
            "grades" => self.grades = parse_value(key, value)?,
            "row_radius" => self.row_radius = parse_value(key, value)?,
            "data_seed" => self.data_seed = parse_value(key, value)?,
            "max_docs" => self.max_docs = parse_value(key, value)?,
            "shuffle" => self.shuffle = parse_bool(key, value)?,
            "out_dir" => self.out_dir = PathBuf::from(value),
            "regret" => self.regret = parse_bool(key, value)?,
            "seeds" => self.seeds = parse_value(key, value)?,
            "horizons" => {
                self.horizons = value
                    .split(',')
                    .map(|h| parse_value(key, h.trim()))
                    .collect::<Result<_>>()?
            }
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines on top of `self`; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let content = line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| Error::parse(i + 1, format!("expected key = value, found {content:?}")))?;
            self.set(key.trim(), value.trim()).map_err(|e| match e {
                Error::Config(msg) => Error::parse(i + 1, msg),
                other => other,
            })?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }

    /// Every key, one per line, in a form [`ExperimentConfig::from_text`] reads back.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut line = |k: &str, v: String| writeln!(out, "{k} = {v}").unwrap();
        line("algorithm", self.algorithm.name().into());
        line("surrogate", self.surrogate.clone());
        line("epsilon", format!("{:?}", self.epsilon));
        line("gamma", show_auto(self.gamma));
        line("eta", show_auto(self.eta));
        line("radius", format!("{:?}", self.radius));
        line("horizon", self.horizon.to_string());
        line("seed", self.seed.to_string());
        line("cutoff", self.cutoff.to_string());
        line(
            "feedback",
            match self.feedback {
                FeedbackMode::Minimal => "minimal",
                FeedbackMode::Full => "full",
            }
            .into(),
        );
        line(
            "data",
            self.data
                .as_ref()
                .map_or_else(|| "none".into(), |p| p.display().to_string()),
        );
        line("synthetic", self.synthetic.to_string());
        line("grades", self.grades.to_string());
        line("row_radius", format!("{:?}", self.row_radius));
        line("data_seed", self.data_seed.to_string());
        line("max_docs", self.max_docs.to_string());
        line("shuffle", self.shuffle.to_string());
        line("out_dir", self.out_dir.display().to_string());
        line("regret", self.regret.to_string());
        line("seeds", self.seeds.to_string());
        line(
            "horizons",
            self.horizons
                .iter()
                .map(ToString::to_string)
                .collect::<Vec<_>>()
                .join(","),
        );
        out
    }

    pub fn synthetic_spec(&self) -> SyntheticSpec {
        SyntheticSpec {
            max_grade: self.grades,
            row_radius: self.row_radius,
            seed: self.data_seed,
            ..SyntheticSpec::new(
                self.synthetic.num_docs,
                self.synthetic.num_features,
                self.synthetic.noise,
            )
        }
    }

    /// Learner settings for a horizon `t`, filling in horizon-dependent defaults.
    pub fn learner_config(&self, horizon: usize) -> Result<LearnerConfig> {
        let surrogate = self.surrogate_kind()?;
        let base = match self.algorithm.baseline() {
            Some(b) => LearnerConfig {
                surrogate: if b == Baseline::FullListNet {
                    SurrogateKind::ListNetCrossEntropy
                } else {
                    surrogate
                },
                ..LearnerConfig::for_baseline(b, horizon)
            },
            None => LearnerConfig::new(surrogate, horizon),
        };
        let cfg = LearnerConfig {
            gamma: self.gamma.unwrap_or_else(|| default_gamma(horizon)),
            eta: self.eta.unwrap_or(base.eta),
            radius: self.radius,
            seed: self.seed,
            metric_cutoff: self.cutoff,
            feedback: self.feedback,
            ..base
        };
        Ok(cfg)
    }
}
