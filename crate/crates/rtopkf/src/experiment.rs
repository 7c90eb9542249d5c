//! Runs games from an [`ExperimentConfig`] and renders their CSV and
//! summary outputs. Every output is a deterministic function of the config.

use std::borrow::Borrow;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use rtopkf_core::oracle::{best_in_hindsight, HindsightOptions, RegretReport};
use rtopkf_core::{run_baseline, run_game, GameTrajectory, LearnerConfig, Query, SurrogateKind};

use crate::config::{Algorithm, ExperimentConfig};
use crate::data::{normalize_features, parse_letor, CorpusStream, ParseOptions, SyntheticStream};
use crate::error::{Error, Result};

pub const TRAJECTORY_HEADER: &str = "round,loss,ndcg_at_k,avg_ndcg_at_k,explored,weight_norm";
pub const SCAN_HEADER: &str =
    "horizon,seeds,learner_loss,hindsight_loss,regret,regret_per_round,regret_per_t23";

/// Where a game's queries come from.
pub enum Source {
    File { corpus: Vec<Query>, warnings: Vec<String> },
    Synthetic(SyntheticStream),
}

impl Source {
    pub fn open(cfg: &ExperimentConfig) -> Result<Self> {
        match &cfg.data {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                let opts = ParseOptions {
                    max_docs: cfg.max_docs,
                    max_grade: Some(cfg.grades),
                };
                let mut corpus = parse_letor(&text, &opts)?;
                if corpus.queries.is_empty() {
                    return Err(Error::Config(format!("{} holds no queries", path.display())));
                }
                let stats = normalize_features(&mut corpus.queries, cfg.row_radius)?;
                if stats.scaled > 0 {
                    corpus.warnings.push(format!(
                        "scaled {} of {} feature rows onto radius {}",
                        stats.scaled, stats.rows, cfg.row_radius
                    ));
                }
                Ok(Self::File {
                    corpus: corpus.queries,
                    warnings: corpus.warnings,
                })
            }
            None => Ok(Self::Synthetic(SyntheticStream::new(cfg.synthetic_spec())?)),
        }
    }

    pub fn warnings(&self) -> &[String] {
        match self {
            Self::File { warnings, .. } => warnings,
            Self::Synthetic(_) => &[],
        }
    }

    /// The first `count` queries of the stream. File corpora cycle, and
    /// reshuffle each pass when `shuffle` is set.
    pub fn take(&self, cfg: &ExperimentConfig, count: usize) -> Dataset<'_> {
        match self {
            Self::File { corpus, .. } => Dataset::Borrowed(
                CorpusStream::new(corpus, true, cfg.shuffle.then_some(cfg.data_seed))
                    .take(count)
                    .collect(),
            ),
            Self::Synthetic(stream) => Dataset::Owned(stream.clone().take(count).collect()),
        }
    }
}

pub enum Dataset<'a> {
    Borrowed(Vec<&'a Query>),
    Owned(Vec<Query>),
}

impl Dataset<'_> {
    pub fn len(&self) -> usize {
        match self {
            Self::Borrowed(v) => v.len(),
            Self::Owned(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn play(&self, alg: Algorithm, cfg: &LearnerConfig, len: usize) -> Result<GameTrajectory> {
        match self {
            Self::Borrowed(v) => play(alg, cfg, &v[..len]),
            Self::Owned(v) => play(alg, cfg, &v[..len]),
        }
    }

    fn hindsight(&self, kind: SurrogateKind, radius: f64, len: usize) -> Result<f64> {
        let opts = HindsightOptions::default();
        let sol = match self {
            Self::Borrowed(v) => best_in_hindsight(&v[..len], kind, radius, &opts)?,
            Self::Owned(v) => best_in_hindsight(&v[..len], kind, radius, &opts)?,
        };
        Ok(sol.loss)
    }
}

fn play<Q: Borrow<Query>>(alg: Algorithm, cfg: &LearnerConfig, data: &[Q]) -> Result<GameTrajectory> {
    let stream = data.iter().map(Borrow::borrow);
    Ok(match alg.baseline() {
        None => run_game(cfg, stream)?,
        Some(b) => run_baseline(b, cfg, stream)?,
    })
}

/// `{:?}` prints the shortest string that reads back to the same `f64`.
fn num(x: f64) -> String {
    format!("{x:?}")
}

pub fn trajectory_csv(traj: &GameTrajectory) -> String {
    let mut out = String::with_capacity(64 * (traj.len() + 1));
    out.push_str(TRAJECTORY_HEADER);
    out.push('\n');
    for (r, avg) in traj.records.iter().zip(traj.running_average_ndcg()) {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.round,
            num(r.loss),
            r.ndcg.map(num).unwrap_or_default(),
            avg.map(num).unwrap_or_default(),
            u8::from(r.explored),
            num(r.weight_norm)
        )
        .unwrap();
    }
    out
}

pub struct RunOutput {
    pub trajectory: GameTrajectory,
    pub csv: String,
    pub summary: String,
    pub regret: Option<RegretReport>,
    pub warnings: Vec<String>,
}

fn regret_kind(cfg: &ExperimentConfig) -> Result<SurrogateKind> {
    let kind = cfg.surrogate_kind()?;
    if cfg.algorithm != Algorithm::TopK {
        return Err(Error::Config(format!(
            "regret is measured for the top-k learner, not {}",
            cfg.algorithm.name()
        )));
    }
    if !kind.is_convex() || kind == SurrogateKind::ListNetCrossEntropy {
        return Err(rtopkf_core::Error::Unsupported(format!(
            "no hindsight comparator for the {} surrogate",
            kind.name()
        ))
        .into());
    }
    Ok(kind)
}

/// Plays one game and renders its outputs without touching the filesystem.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let regret_kind = if cfg.regret { Some(regret_kind(cfg)?) } else { None };
    let source = Source::open(cfg)?;
    let learner = cfg.learner_config(cfg.horizon)?;
    let data = source.take(cfg, cfg.horizon);
    let trajectory = data.play(cfg.algorithm, &learner, cfg.horizon)?;
    let regret = match regret_kind {
        Some(kind) => Some(RegretReport::new(
            trajectory.len(),
            trajectory.cumulative_loss(),
            data.hindsight(kind, cfg.radius, cfg.horizon)?,
        )),
        None => None,
    };
    let csv = trajectory_csv(&trajectory);
    let summary = summary_text(cfg, &learner, &trajectory, regret.as_ref());
    Ok(RunOutput {
        trajectory,
        csv,
        summary,
        regret,
        warnings: source.warnings().to_vec(),
    })
}

fn summary_text(
    cfg: &ExperimentConfig,
    learner: &LearnerConfig,
    traj: &GameTrajectory,
    regret: Option<&RegretReport>,
) -> String {
    let mut out = String::new();
    let mut line = |k: &str, v: String| writeln!(out, "{k}: {v}").unwrap();
    line("algorithm", cfg.algorithm.name().into());
    line("surrogate", learner.surrogate.name().into());
    line("horizon", traj.len().to_string());
    line("seed", cfg.seed.to_string());
    if cfg.algorithm == Algorithm::TopK {
        line("gamma", num(learner.gamma));
    }
    line("eta", num(learner.eta));
    line("radius", num(learner.radius));
    line("cumulative_loss", num(traj.cumulative_loss()));
    line(
        &format!("average_ndcg_at_{}", cfg.cutoff),
        traj.average_ndcg().map(num).unwrap_or_else(|| "undefined".into()),
    );
    line("explored_rounds", traj.explored_rounds().to_string());
    line("final_weight_norm", num(traj.final_weights.norm()));
    if let Some(r) = regret {
        line("hindsight_loss", num(r.hindsight_loss));
        line("regret", num(r.regret));
        line("regret_per_round", num(r.regret_per_round));
        line("regret_per_t23", num(r.regret_scaled));
    }
    out
}

fn write_file(path: PathBuf, contents: &str) -> Result<()> {
    std::fs::write(&path, contents).map_err(|e| Error::io(path, e))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Writes `trajectory.csv` and `summary.txt` under `cfg.out_dir`.
pub fn write_run(cfg: &ExperimentConfig, output: &RunOutput) -> Result<()> {
    ensure_dir(&cfg.out_dir)?;
    write_file(cfg.out_dir.join("trajectory.csv"), &output.csv)?;
    write_file(cfg.out_dir.join("summary.txt"), &output.summary)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanRow {
    pub seeds: usize,
    /// Learner loss averaged over seeds, with its hindsight comparator.
    pub report: RegretReport,
}

/// Seeds `cfg.seed, cfg.seed + 1, ...` at every horizon, on the same query
/// stream; each horizon uses the stream's first `T` queries.
pub fn regret_scan(cfg: &ExperimentConfig) -> Result<Vec<ScanRow>> {
    let kind = regret_kind(cfg)?;
    if cfg.horizons.is_empty() || cfg.horizons.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config(format!(
            "horizons must be nonempty and strictly ascending, got {:?}",
            cfg.horizons
        )));
    }
    if cfg.seeds == 0 {
        return Err(Error::Config("need at least one seed".into()));
    }
    let source = Source::open(cfg)?;
    let longest = *cfg.horizons.last().expect("nonempty");
    let data = source.take(cfg, longest);
    let mut rows = Vec::with_capacity(cfg.horizons.len());
    for &t in &cfg.horizons {
        let base = cfg.learner_config(t)?;
        let losses: Vec<f64> = (0..cfg.seeds as u64)
            .into_par_iter()
            .map(|i| {
                let learner = LearnerConfig {
                    seed: cfg.seed.wrapping_add(i),
                    ..base.clone()
                };
                Ok(data.play(Algorithm::TopK, &learner, t)?.cumulative_loss())
            })
            .collect::<Result<_>>()?;
        let mean = losses.iter().sum::<f64>() / losses.len() as f64;
        rows.push(ScanRow {
            seeds: cfg.seeds,
            report: RegretReport::new(t, mean, data.hindsight(kind, cfg.radius, t)?),
        });
    }
    Ok(rows)
}

pub fn scan_csv(rows: &[ScanRow]) -> String {
    let mut out = String::from(SCAN_HEADER);
    out.push('\n');
    for row in rows {
        let r = &row.report;
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.horizon,
            row.seeds,
            num(r.learner_loss),
            num(r.hindsight_loss),
            num(r.regret),
            num(r.regret_per_round),
            num(r.regret_scaled)
        )
        .unwrap();
    }
    out
}

/// One entry of an algorithm comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct Contender {
    pub algorithm: Algorithm,
    pub surrogate: String,
}

impl Contender {
    pub fn label(&self) -> String {
        match self.algorithm {
            Algorithm::TopK => self.surrogate.clone(),
            other => other.name().into(),
        }
    }
}

/// The partial-feedback learners with the convex surrogates and SmoothDCG,
/// plus both baselines.
pub fn standard_contenders() -> Vec<Contender> {
    let topk = |s: &str| Contender {
        algorithm: Algorithm::TopK,
        surrogate: s.into(),
    };
    vec![
        Contender {
            algorithm: Algorithm::FullListNet,
            surrogate: "listnet".into(),
        },
        topk("squared"),
        topk("ranksvm"),
        topk("kl"),
        topk("smoothdcg"),
        Contender {
            algorithm: Algorithm::Random,
            surrogate: "squared".into(),
        },
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub label: String,
    /// Final average NDCG@cutoff for each seed.
    pub per_seed: Vec<f64>,
}

impl ComparisonRow {
    pub fn mean(&self) -> f64 {
        self.per_seed.iter().sum::<f64>() / self.per_seed.len() as f64
    }
}

/// Final average NDCG of every contender over `cfg.seeds` seeds, all on the
/// same stream.
pub fn compare(cfg: &ExperimentConfig, contenders: &[Contender]) -> Result<Vec<ComparisonRow>> {
    if cfg.seeds == 0 {
        return Err(Error::Config("need at least one seed".into()));
    }
    let source = Source::open(cfg)?;
    let data = source.take(cfg, cfg.horizon);
    let jobs: Vec<(usize, u64)> = (0..contenders.len())
        .flat_map(|c| (0..cfg.seeds as u64).map(move |s| (c, s)))
        .collect();
    let scores: Vec<f64> = jobs
        .par_iter()
        .map(|&(c, s)| {
            let entry = ExperimentConfig {
                algorithm: contenders[c].algorithm,
                surrogate: contenders[c].surrogate.clone(),
                seed: cfg.seed.wrapping_add(s),
                ..cfg.clone()
            };
            let learner = entry.learner_config(cfg.horizon)?;
            let traj = data.play(entry.algorithm, &learner, cfg.horizon)?;
            traj.average_ndcg()
                .ok_or_else(|| Error::Config("no query had a relevant document".into()))
        })
        .collect::<Result<_>>()?;
    Ok(contenders
        .iter()
        .zip(scores.chunks(cfg.seeds))
        .map(|(c, s)| ComparisonRow {
            label: c.label(),
            per_seed: s.to_vec(),
        })
        .collect())
}

pub fn comparison_csv(rows: &[ComparisonRow], cutoff: usize) -> String {
    let mut out = format!("algorithm,seeds,mean_avg_ndcg_at_{cutoff},per_seed\n");
    for row in rows {
        let per_seed: Vec<String> = row.per_seed.iter().map(|x| num(*x)).collect();
        writeln!(
            out,
            "{},{},{},{}",
            row.label,
            row.per_seed.len(),
            num(row.mean()),
            per_seed.join(";")
        )
        .unwrap();
    }
    out
}

pub fn write_named(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    ensure_dir(dir)?;
    let path = dir.join(name);
    write_file(path.clone(), contents)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(horizon: usize) -> ExperimentConfig {
        ExperimentConfig {
            horizon,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn csv_has_one_row_per_round() {
        let out = run(&small(10)).unwrap();
        let lines: Vec<&str> = out.csv.lines().collect();
        assert_eq!(lines[0], TRAJECTORY_HEADER);
        assert_eq!(lines.len(), 11);
        assert!(lines[1].starts_with("1,"));
        assert!(out.summary.contains("cumulative_loss"));
    }

    #[test]
    fn running_average_matches_recomputation() {
        let out = run(&small(500)).unwrap();
        let mut sum = 0.0;
        let mut n = 0;
        for line in out.csv.lines().skip(1) {
            let f: Vec<&str> = line.split(',').collect();
            if !f[2].is_empty() {
                sum += f[2].parse::<f64>().unwrap();
                n += 1;
            }
            if n > 0 {
                let avg: f64 = f[3].parse().unwrap();
                assert!((avg - sum / n as f64).abs() < 1e-12);
            } else {
                assert!(f[3].is_empty());
            }
        }
    }

    #[test]
    fn reruns_are_byte_identical() {
        let cfg = ExperimentConfig {
            surrogate: "ranksvm".into(),
            ..small(300)
        };
        assert_eq!(run(&cfg).unwrap().csv, run(&cfg).unwrap().csv);
    }

    #[test]
    fn regret_in_summary() {
        let cfg = ExperimentConfig {
            regret: true,
            ..small(200)
        };
        let out = run(&cfg).unwrap();
        assert!(out.regret.is_some());
        assert!(out.summary.contains("regret_per_round"));
        let bad = ExperimentConfig {
            surrogate: "smoothdcg".into(),
            ..cfg
        };
        assert!(run(&bad).is_err());
    }

    #[test]
    fn scan_rows_and_validation() {
        let cfg = ExperimentConfig {
            horizons: vec![50, 100],
            seeds: 2,
            ..ExperimentConfig::default()
        };
        let rows = regret_scan(&cfg).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(scan_csv(&rows).lines().count(), 3);
        assert_eq!(rows, regret_scan(&cfg).unwrap());
        let single = ExperimentConfig {
            horizons: vec![30],
            ..cfg.clone()
        };
        assert_eq!(regret_scan(&single).unwrap().len(), 1);
        for bad in [
            ExperimentConfig {
                horizons: vec![100, 50],
                ..cfg.clone()
            },
            ExperimentConfig {
                surrogate: "smoothdcg".into(),
                ..cfg.clone()
            },
        ] {
            assert!(regret_scan(&bad).is_err());
        }
    }

    #[test]
    fn comparison_is_deterministic() {
        let cfg = ExperimentConfig {
            seeds: 2,
            ..small(200)
        };
        let rows = compare(&cfg, &standard_contenders()).unwrap();
        assert_eq!(rows.len(), 6);
        assert_eq!(rows, compare(&cfg, &standard_contenders()).unwrap());
        assert_eq!(rows[0].label, "full_listnet");
    }
}
