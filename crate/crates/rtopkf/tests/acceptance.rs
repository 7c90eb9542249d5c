//! End-to-end acceptance criteria. Runs without the libtest harness so the
//! one-line verdict for every criterion is always printed; exits nonzero if
//! any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use rtopkf::config::{Algorithm, ExperimentConfig};
use rtopkf::experiment::{self, Contender};
use rtopkf::verify::{self, Report, Suite};

struct Verdict {
    passed: bool,
    detail: String,
}

fn from_report(report: Report) -> Verdict {
    let failed: Vec<String> = report
        .checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| c.to_string())
        .collect();
    let detail = if failed.is_empty() {
        format!("{} checks", report.checks.len())
    } else {
        format!("{} of {} checks failed: {}", failed.len(), report.checks.len(), failed.join("; "))
    };
    Verdict {
        passed: failed.is_empty(),
        detail,
    }
}

fn suite(s: Suite) -> Verdict {
    match verify::run(s, 0) {
        Ok(report) => from_report(report),
        Err(e) => Verdict {
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

/// Synthetic stream m=10, d=5, noise 0.1 with default step sizes, U=2,
/// averaged over 5 seeds.
fn regret_trend() -> Verdict {
    let mut passed = true;
    let mut parts = Vec::new();
    for surrogate in ["squared", "kl"] {
        let cfg = ExperimentConfig {
            surrogate: surrogate.into(),
            seeds: 5,
            horizons: vec![1_000, 10_000, 100_000],
            ..ExperimentConfig::default()
        };
        let rows = match experiment::regret_scan(&cfg) {
            Ok(rows) => rows,
            Err(e) => {
                return Verdict {
                    passed: false,
                    detail: format!("{surrogate}: {e}"),
                }
            }
        };
        let per_round: Vec<f64> = rows.iter().map(|r| r.report.regret_per_round).collect();
        let scaled: Vec<f64> = rows.iter().map(|r| r.report.regret_scaled).collect();
        let decreasing = per_round.windows(2).all(|w| w[1] < w[0]);
        let growth = scaled[2] / scaled[0];
        let ok = decreasing && growth <= 3.0;
        passed &= ok;
        parts.push(format!(
            "{surrogate} regret/T {:.3} > {:.3} > {:.3}, regret/T^(2/3) ratio {:.2} (limit 3){}",
            per_round[0],
            per_round[1],
            per_round[2],
            growth,
            if ok { "" } else { " VIOLATED" }
        ));
    }
    Verdict {
        passed,
        detail: parts.join("; "),
    }
}

/// Final average NDCG@10 at T=1e5 over 3 seeds.
fn baseline_ordering() -> Verdict {
    let cfg = ExperimentConfig {
        horizon: 100_000,
        seeds: 3,
        ..ExperimentConfig::default()
    };
    let contender = |algorithm, surrogate: &str| Contender {
        algorithm,
        surrogate: surrogate.into(),
    };
    let contenders = [
        contender(Algorithm::FullListNet, "listnet"),
        contender(Algorithm::TopK, "squared"),
        contender(Algorithm::TopK, "ranksvm"),
        contender(Algorithm::TopK, "kl"),
        contender(Algorithm::Random, "squared"),
    ];
    let rows = match experiment::compare(&cfg, &contenders) {
        Ok(rows) => rows,
        Err(e) => {
            return Verdict {
                passed: false,
                detail: format!("error: {e}"),
            }
        }
    };
    let means: Vec<f64> = rows.iter().map(|r| r.mean()).collect();
    let (full, random) = (means[0], means[4]);
    let sandwiched = means[1..4].iter().all(|&m| full >= m && m >= random);
    let margin = full - random;
    let table: Vec<String> = rows
        .iter()
        .zip(&means)
        .map(|(r, m)| format!("{} {m:.4}", r.label))
        .collect();
    Verdict {
        passed: sandwiched && margin >= 0.05,
        detail: format!("{}; full - random = {margin:.4} (need 0.05)", table.join(", ")),
    }
}

/// Renders every CSV the harness produces twice from scratch.
fn determinism() -> Verdict {
    let render = || -> rtopkf::Result<Vec<String>> {
        let mut csvs = Vec::new();
        for (algorithm, surrogate) in [
            (Algorithm::TopK, "squared"),
            (Algorithm::TopK, "ranksvm"),
            (Algorithm::TopK, "kl"),
            (Algorithm::TopK, "smoothdcg"),
            (Algorithm::FullListNet, "listnet"),
            (Algorithm::Random, "squared"),
        ] {
            let cfg = ExperimentConfig {
                algorithm,
                surrogate: surrogate.into(),
                horizon: 2_000,
                seed: 7,
                ..ExperimentConfig::default()
            };
            csvs.push(experiment::run(&cfg)?.csv);
        }
        let scan = ExperimentConfig {
            seeds: 3,
            horizons: vec![200, 2_000],
            ..ExperimentConfig::default()
        };
        csvs.push(experiment::scan_csv(&experiment::regret_scan(&scan)?));
        let cmp = ExperimentConfig {
            seeds: 2,
            horizon: 1_000,
            ..ExperimentConfig::default()
        };
        let rows = experiment::compare(&cmp, &experiment::standard_contenders())?;
        csvs.push(experiment::comparison_csv(&rows, cmp.cutoff));
        Ok(csvs)
    };
    match (render(), render()) {
        (Ok(a), Ok(b)) => {
            let differing = a.iter().zip(&b).filter(|(x, y)| x != y).count();
            Verdict {
                passed: differing == 0,
                detail: format!("{} CSV outputs, {differing} differ between runs", a.len()),
            }
        }
        (Err(e), _) | (_, Err(e)) => Verdict {
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Verdict); 8] = [
        ("unbiased estimator", || suite(Suite::Unbiased)),
        ("prefix marginals", || suite(Suite::Marginals)),
        ("gradient correctness", || suite(Suite::Gradients)),
        ("variance bound", || suite(Suite::Variance)),
        ("regret trend", regret_trend),
        ("impossibility counterexample", || suite(Suite::Impossibility)),
        ("baseline ordering", baseline_ordering),
        ("determinism", determinism),
    ];
    let mut failures = 0;
    for (i, (name, criterion)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let v = criterion();
        let status = if v.passed { "PASS" } else { "FAIL" };
        println!(
            "criterion {} {name}: {status} ({:.1}s) {}",
            i + 1,
            start.elapsed().as_secs_f64(),
            v.detail
        );
        failures += usize::from(!v.passed);
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
