use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use rtopkf::config::ExperimentConfig;
use rtopkf::data::{parse_letor, serialize_letor, ParseOptions};
use rtopkf::experiment;
use rtopkf::fixture::parse_pair;
use rtopkf::verify::{self, Suite};

#[derive(Parser)]
#[command(name = "rtopkf", version, about = "Online learning to rank with top-k feedback")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Play one game; writes trajectory.csv and summary.txt.
    Run(Overrides),
    /// Run a verification suite (unbiased, gradients, marginals, variance,
    /// impossibility, or all).
    Verify {
        suite: String,
        /// Counterexample pair file for the impossibility suite.
        #[arg(long)]
        fixture: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Average regret over seeds at several horizons; writes regret_scan.csv.
    RegretScan(Overrides),
    /// Final average NDCG of every algorithm; writes comparison.csv.
    Compare(Overrides),
    /// Parse a LETOR file and report what was read.
    Parse {
        file: PathBuf,
        #[arg(long, default_value_t = rtopkf::data::DEFAULT_MAX_DOCS)]
        max_docs: usize,
        /// Clip grades above this value.
        #[arg(long)]
        grades: Option<u32>,
        /// Write the parsed queries back out in LETOR format.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Flags override the config file, which overrides the defaults.
#[derive(Args)]
struct Overrides {
    /// `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    out_dir: Option<String>,
    /// squared, ranksvm, kl, smoothdcg or listnet.
    #[arg(long)]
    surrogate: Option<String>,
    /// Exploration rate, or `auto`.
    #[arg(long)]
    gamma: Option<String>,
    /// Step size, or `auto`.
    #[arg(long)]
    eta: Option<String>,
    #[arg(long)]
    horizon: Option<String>,
    /// LETOR file; synthetic data when absent.
    #[arg(long)]
    data: Option<String>,
    /// Synthetic shape as `m,d,noise`.
    #[arg(long)]
    synthetic: Option<String>,
    /// topk, full_listnet or random.
    #[arg(long)]
    algorithm: Option<String>,
    #[arg(long)]
    radius: Option<String>,
    #[arg(long)]
    cutoff: Option<String>,
    /// SmoothDCG smoothing.
    #[arg(long)]
    epsilon: Option<String>,
    #[arg(long)]
    seeds: Option<String>,
    /// Comma-separated, ascending.
    #[arg(long)]
    horizons: Option<String>,
    #[arg(long)]
    grades: Option<String>,
    /// minimal or full.
    #[arg(long)]
    feedback: Option<String>,
    /// Also compare against the best fixed weight vector in hindsight.
    #[arg(long)]
    regret: bool,
}

impl Overrides {
    fn resolve(&self) -> anyhow::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        let flags = [
            ("seed", &self.seed),
            ("out_dir", &self.out_dir),
            ("epsilon", &self.epsilon),
            ("surrogate", &self.surrogate),
            ("gamma", &self.gamma),
            ("eta", &self.eta),
            ("horizon", &self.horizon),
            ("data", &self.data),
            ("synthetic", &self.synthetic),
            ("algorithm", &self.algorithm),
            ("radius", &self.radius),
            ("cutoff", &self.cutoff),
            ("seeds", &self.seeds),
            ("horizons", &self.horizons),
            ("grades", &self.grades),
            ("feedback", &self.feedback),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, v).with_context(|| format!("--{}", key.replace('_', "-")))?;
            }
        }
        if self.regret {
            cfg.regret = true;
        }
        Ok(cfg)
    }
}

fn run_verify(suite: &str, fixture: Option<PathBuf>, seed: u64) -> anyhow::Result<bool> {
    let suites: Vec<Suite> = if suite == "all" {
        Suite::ALL.to_vec()
    } else {
        vec![suite.parse()?]
    };
    if fixture.is_some() && !suites.contains(&Suite::Impossibility) {
        bail!("--fixture only applies to the impossibility suite");
    }
    let mut passed = true;
    for s in suites {
        let report = match (&fixture, s) {
            (Some(path), Suite::Impossibility) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading {}", path.display()))?;
                verify::impossibility(&parse_pair(&text)?, false, seed)?
            }
            _ => verify::run(s, seed)?,
        };
        println!("{report}");
        passed &= report.passed();
    }
    Ok(passed)
}

fn execute(cli: Cli) -> anyhow::Result<bool> {
    match cli.command {
        Command::Run(o) => {
            let cfg = o.resolve()?;
            let out = experiment::run(&cfg)?;
            for w in &out.warnings {
                eprintln!("warning: {w}");
            }
            experiment::write_run(&cfg, &out)?;
            print!("{}", out.summary);
        }
        Command::Verify { suite, fixture, seed } => return run_verify(&suite, fixture, seed),
        Command::RegretScan(o) => {
            let mut cfg = o.resolve()?;
            cfg.regret = true;
            let csv = experiment::scan_csv(&experiment::regret_scan(&cfg)?);
            experiment::write_named(&cfg.out_dir, "regret_scan.csv", &csv)?;
            print!("{csv}");
        }
        Command::Compare(o) => {
            let cfg = o.resolve()?;
            let rows = experiment::compare(&cfg, &experiment::standard_contenders())?;
            let csv = experiment::comparison_csv(&rows, cfg.cutoff);
            experiment::write_named(&cfg.out_dir, "comparison.csv", &csv)?;
            print!("{csv}");
        }
        Command::Parse {
            file,
            max_docs,
            grades,
            out,
        } => {
            let text = std::fs::read_to_string(&file)
                .with_context(|| format!("reading {}", file.display()))?;
            let corpus = parse_letor(
                &text,
                &ParseOptions {
                    max_docs,
                    max_grade: grades,
                },
            )?;
            for w in &corpus.warnings {
                eprintln!("warning: {w}");
            }
            let docs: usize = corpus.queries.iter().map(|q| q.num_docs()).sum();
            println!("queries: {}", corpus.queries.len());
            println!("documents: {docs}");
            println!("max_docs_per_query: {}", corpus.num_docs());
            println!("features: {}", corpus.num_features());
            if let Some(path) = out {
                std::fs::write(&path, serialize_letor(&corpus.queries))
                    .with_context(|| format!("writing {}", path.display()))?;
            }
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
