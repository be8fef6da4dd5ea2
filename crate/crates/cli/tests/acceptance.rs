//! Runs every acceptance criterion and prints one PASS/FAIL line for each.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use score_forge::config::ExperimentConfig;
use score_forge::experiment::{run_experiment, ExperimentResult, MODE_MASS};
use score_forge::parallel::{resolve_threads, with_pool, Rayon};
use score_forge::run_to_dir;
use score_forge_core::sampler::{reverse_sample_in, SamplerConfig, Schedule, ZeroScore};

struct Outcome {
    passed: bool,
    detail: String,
}

fn config(name: &str) -> ExperimentConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn run(name: &str, threads: usize) -> Result<ExperimentResult, String> {
    let cfg = config(name);
    with_pool(threads, || run_experiment(&cfg, &Rayon))
        .and_then(|r| r)
        .map_err(|e| e.to_string())
}

fn from_checks(result: &ExperimentResult, extra: String) -> Outcome {
    let mut detail: Vec<String> = result
        .checks
        .iter()
        .map(|c| format!("{} {} {}", c.series, c.name, c.detail))
        .collect();
    if !extra.is_empty() {
        detail.push(extra);
    }
    Outcome {
        passed: result.passed(),
        detail: detail.join("; "),
    }
}

fn kernel_certification(threads: usize) -> Result<Outcome, String> {
    let result = run("kernel-certify.json", threads)?;
    let wanted = [2, 4, 8, 16];
    let mut detail = Vec::new();
    let mut passed = result.passed();
    for order in wanted {
        let check = result
            .checks
            .iter()
            .find(|c| c.name == format!("order {order}"))
            .ok_or(format!("order {order} missing"))?;
        passed &= check.passed;
        detail.push(format!("l={order}: {}", check.detail));
    }
    Ok(Outcome {
        passed,
        detail: detail.join("; "),
    })
}

fn t_slope(threads: usize) -> Result<Outcome, String> {
    let result = run("t-slope.json", threads)?;
    Ok(from_checks(&result, String::new()))
}

fn n_slope(threads: usize) -> Result<Outcome, String> {
    let result = run("n-slope.json", threads)?;
    // The unfrozen recipe is reported for comparison only.
    let mut plain = config("n-slope.json");
    plain.freeze_polylog = false;
    plain.checks.clear();
    let reference = with_pool(threads, || run_experiment(&plain, &Rayon))
        .and_then(|r| r)
        .map_err(|e| e.to_string())?;
    let extra = reference
        .fit("n-slope")
        .map(|f| format!("per-cell order and bandwidth log give slope {:.3} (not checked)", f.fit.slope))
        .unwrap_or_default();
    Ok(from_checks(&result, extra))
}

fn integrated(threads: usize) -> Result<Outcome, String> {
    let result = run("integrated.json", threads)?;
    let ys: Vec<String> = result.series("integrated").iter().map(|r| format!("{:.3}", r.y)).collect();
    Ok(from_checks(&result, format!("integrals {}", ys.join(", "))))
}

fn zero_drift(threads: usize) -> Result<Outcome, String> {
    let cfg = SamplerConfig {
        horizon: 4.0,
        early_stop: 0.01,
        steps: 100,
        schedule: Schedule::Geometric,
        seed: 1,
    };
    let out = with_pool(threads, || reverse_sample_in(&Rayon, &ZeroScore { dim: 1 }, &cfg, 100_000))
        .map_err(|e| e.to_string())?
        .map_err(|e| e.to_string())?;
    let target = 2.0 * cfg.horizon - cfg.early_stop;
    let v = out.variance()[0];
    let rel = (v / target - 1.0).abs();
    Ok(Outcome {
        passed: rel <= 0.02,
        detail: format!("variance {v:.4} vs {target}, relative error {rel:.4} <= 0.02"),
    })
}

fn oracle_end_to_end(threads: usize) -> Result<Outcome, String> {
    let result = run("end-to-end-oracle.json", threads)?;
    let mass = result.series(MODE_MASS).first().map(|r| r.y).unwrap_or(f64::NAN);
    Ok(from_checks(&result, format!("largest mode-mass gap {mass:.4}")))
}

fn bank_end_to_end(threads: usize) -> Result<Outcome, String> {
    let result = run("end-to-end-bank.json", threads)?;
    Ok(from_checks(&result, String::new()))
}

fn early_stop(threads: usize) -> Result<Outcome, String> {
    let result = run("early-stop.json", threads)?;
    Ok(from_checks(&result, String::new()))
}

fn determinism(threads: usize) -> Result<Outcome, String> {
    let cfg = config("n-slope.json");
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut bodies = Vec::new();
    let spread = threads.max(4);
    for (k, workers) in [threads, spread, 1].into_iter().enumerate() {
        let out = dir.path().join(format!("run{k}"));
        run_to_dir(&cfg, &out, workers).map_err(|e| e.to_string())?;
        bodies.push(std::fs::read(out.join("results.csv")).map_err(|e| e.to_string())?);
    }
    let same = bodies.windows(2).all(|w| w[0] == w[1]);
    Ok(Outcome {
        passed: same,
        detail: format!(
            "n-slope results.csv ({} bytes) identical across runs with {threads}, {spread} and 1 threads: {same}",
            bodies[0].len()
        ),
    })
}

type Criterion = (&'static str, Option<Duration>, fn(usize) -> Result<Outcome, String>);

fn main() -> ExitCode {
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return ExitCode::SUCCESS;
    }
    let threads = match resolve_threads(None) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::FAILURE;
        }
    };
    let secs = Duration::from_secs;
    let criteria: [Criterion; 9] = [
        ("1 kernel certification", Some(secs(1)), kernel_certification),
        ("2 t-slope", Some(secs(180)), t_slope),
        ("3 n-slope", Some(secs(180)), n_slope),
        ("4 integrated error ratio", None, integrated),
        ("5 zero-drift sampler", Some(secs(30)), zero_drift),
        ("6 oracle end-to-end", Some(secs(120)), oracle_end_to_end),
        ("7 kernel-bank end-to-end", Some(secs(900)), bank_end_to_end),
        ("8 early-stopping TV", Some(secs(5)), early_stop),
        ("9 determinism", None, determinism),
    ];
    let mut failed = 0;
    for (name, budget, f) in criteria {
        let start = Instant::now();
        let outcome = f(threads);
        let elapsed = start.elapsed();
        let (passed, detail) = match outcome {
            Ok(o) => (o.passed, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        let in_budget = budget.is_none_or(|b| elapsed <= b);
        let budget_note = match budget {
            Some(b) => format!("{:.2}s of {}s", elapsed.as_secs_f64(), b.as_secs()),
            None => format!("{:.2}s", elapsed.as_secs_f64()),
        };
        let ok = passed && in_budget;
        if !ok {
            failed += 1;
        }
        println!("{} criterion {name} [{budget_note}]: {detail}", if ok { "PASS" } else { "FAIL" });
    }
    println!("{} of 9 criteria passed", 9 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
