//! Experiment runners.

use std::time::Instant;

use score_forge_core::dist::{forward_perturb, sample_p0, GaussianMixture, SmoothedOracle};
use score_forge_core::estimator::{EstimatorConfig, ScoreEstimator};
use score_forge_core::kernel::build_kernel;
use score_forge_core::metrics::{
    fit_rate_slope, integrated_score_error_in, score_mse_in, tv_distance_1d, tv_empirical_1d, RatePoint, SlopeFit,
};
use score_forge_core::sampler::{reverse_sample_in, KernelScoreBank, OracleScore, SamplerConfig};
use score_forge_core::seed::derive_seed;
use score_forge_core::{Executor, Points};

use crate::config::{ExperimentConfig, ExperimentKind, ScoreSpec, SeriesChecks};
use crate::error::HarnessError;

/// One line of `results.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub experiment: String,
    pub cell_index: usize,
    pub x: f64,
    pub y: f64,
    pub stderr: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesFit {
    pub series: String,
    pub fit: SlopeFit,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub series: String,
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub rows: Vec<Row>,
    pub fits: Vec<SeriesFit>,
    /// Wall-clock seconds per cell of the primary grid.
    pub cell_seconds: Vec<f64>,
    pub seed: u64,
    pub checks: Vec<CheckOutcome>,
}

impl ExperimentResult {
    pub fn series(&self, name: &str) -> Vec<&Row> {
        self.rows.iter().filter(|r| r.experiment == name).collect()
    }

    pub fn fit(&self, name: &str) -> Option<&SeriesFit> {
        self.fits.iter().find(|f| f.series == name)
    }

    /// Series drawn in the plot and fitted first.
    pub fn primary_series(&self) -> &str {
        match (self.config.experiment, self.config.score) {
            (ExperimentKind::EndToEnd, ScoreSpec::None) => EARLY_STOP,
            (kind, _) => kind.name(),
        }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<String> {
        self.checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| format!("{} {}: {}", c.series, c.name, c.detail))
            .collect()
    }
}

pub const EARLY_STOP: &str = "early-stop";
pub const MODE_MASS: &str = "mode-mass";

/// Seed of cell `cell` of `experiment` under `master`.
pub fn cell_seed(master: u64, experiment: ExperimentKind, cell: usize) -> u64 {
    derive_seed(master, experiment.name(), cell as u64)
}

pub fn run_experiment<E: Executor>(cfg: &ExperimentConfig, exec: &E) -> Result<ExperimentResult, HarnessError> {
    cfg.validate()?;
    let mut result = ExperimentResult {
        config: cfg.clone(),
        rows: Vec::new(),
        fits: Vec::new(),
        cell_seconds: Vec::new(),
        seed: cfg.seed,
        checks: Vec::new(),
    };
    match cfg.experiment {
        ExperimentKind::TSlope => t_slope(cfg, exec, &mut result)?,
        ExperimentKind::NSlope => n_slope(cfg, exec, &mut result)?,
        ExperimentKind::Integrated => integrated(cfg, exec, &mut result)?,
        ExperimentKind::EndToEnd => end_to_end(cfg, exec, &mut result)?,
        ExperimentKind::KernelCertify => kernel_certify(cfg, &mut result)?,
    }
    fit_series(&mut result);
    apply_checks(&mut result);
    Ok(result)
}

fn cell_error(kind: ExperimentKind, cell: usize, x: f64) -> impl Fn(score_forge_core::Error) -> HarnessError {
    move |source| HarnessError::Cell {
        experiment: kind.name(),
        cell,
        x,
        source,
    }
}

fn finite(kind: ExperimentKind, cell: usize, x: f64, y: f64) -> Result<f64, HarnessError> {
    if y.is_finite() {
        Ok(y)
    } else {
        Err(HarnessError::Runtime(format!(
            "{} cell {cell} (x = {x}): non-finite measurement {y}",
            kind.name()
        )))
    }
}

fn timed<T>(
    result: &mut ExperimentResult,
    cell: usize,
    x: f64,
    f: impl FnOnce() -> Result<T, HarnessError>,
) -> Result<T, HarnessError> {
    let start = Instant::now();
    let out = f()?;
    let secs = start.elapsed().as_secs_f64();
    log::info!("{} cell {cell} (x = {x}) took {secs:.2}s", result.config.experiment.name());
    result.cell_seconds.push(secs);
    Ok(out)
}

fn perturbed_training(mixture: &GaussianMixture, n: usize, t: f64, seed: u64) -> Result<Points, score_forge_core::Error> {
    let clean = sample_p0(mixture, n, derive_seed(seed, "data", 0));
    forward_perturb(&clean, t, derive_seed(seed, "noise", 0))
}

fn mse_cell<E: Executor>(
    exec: &E,
    cfg: &ExperimentConfig,
    mixture: &GaussianMixture,
    est_cfg: EstimatorConfig,
    seed: u64,
) -> Result<(f64, f64), score_forge_core::Error> {
    let data = perturbed_training(mixture, est_cfg.n, est_cfg.t, seed)?;
    let est = ScoreEstimator::build(est_cfg, &data)?;
    let oracle = mixture.smoothed(est_cfg.t)?;
    let m = score_mse_in(exec, &est, &oracle, cfg.mc, derive_seed(seed, "mse", 0))?;
    Ok((m.value, m.stderr))
}

fn t_slope<E: Executor>(cfg: &ExperimentConfig, exec: &E, result: &mut ExperimentResult) -> Result<(), HarnessError> {
    let kind = cfg.experiment;
    let mixture = cfg.mixture.build().map_err(|e| HarnessError::Runtime(e.to_string()))?;
    let n = cfg.n_values()?[0];
    for (i, t) in cfg.t_values()?.into_iter().enumerate() {
        let seed = cell_seed(cfg.seed, kind, i);
        let (y, se) = timed(result, i, t, || {
            let est_cfg = EstimatorConfig::default_for(n, t, mixture.dim(), cfg.bandwidth_scale)
                .map_err(cell_error(kind, i, t))?;
            mse_cell(exec, cfg, &mixture, est_cfg, seed).map_err(cell_error(kind, i, t))
        })?;
        result.rows.push(Row {
            experiment: kind.name().into(),
            cell_index: i,
            x: t,
            y: finite(kind, i, t, y)?,
            stderr: se,
            seed,
        });
    }
    Ok(())
}

/// Estimator settings for one cell of an n-sweep. With `freeze`, the order
/// and the `ln n` inside the bandwidth are taken at `reference` so that only
/// the sample count and the threshold change across cells.
pub fn n_sweep_config(
    n: usize,
    t: f64,
    d: usize,
    bandwidth_scale: f64,
    freeze: Option<usize>,
) -> Result<EstimatorConfig, score_forge_core::Error> {
    let mut c = EstimatorConfig::default_for(n, t, d, bandwidth_scale)?;
    if let Some(reference) = freeze {
        let r = EstimatorConfig::default_for(reference, t, d, bandwidth_scale)?;
        c.h = r.h;
        c.ell = r.ell;
        c.validate()?;
    }
    Ok(c)
}

fn n_slope<E: Executor>(cfg: &ExperimentConfig, exec: &E, result: &mut ExperimentResult) -> Result<(), HarnessError> {
    let kind = cfg.experiment;
    let mixture = cfg.mixture.build().map_err(|e| HarnessError::Runtime(e.to_string()))?;
    let t = cfg.t_values()?[0];
    let ns = cfg.n_values()?;
    let freeze = cfg.freeze_polylog.then(|| *ns.last().unwrap());
    for (i, &n) in ns.iter().enumerate() {
        let seed = cell_seed(cfg.seed, kind, i);
        let x = n as f64;
        let (y, se) = timed(result, i, x, || {
            let est_cfg =
                n_sweep_config(n, t, mixture.dim(), cfg.bandwidth_scale, freeze).map_err(cell_error(kind, i, x))?;
            mse_cell(exec, cfg, &mixture, est_cfg, seed).map_err(cell_error(kind, i, x))
        })?;
        result.rows.push(Row {
            experiment: kind.name().into(),
            cell_index: i,
            x,
            y: finite(kind, i, x, y)?,
            stderr: se,
            seed,
        });
    }
    Ok(())
}

fn integrated<E: Executor>(cfg: &ExperimentConfig, exec: &E, result: &mut ExperimentResult) -> Result<(), HarnessError> {
    let kind = cfg.experiment;
    let mixture = cfg.mixture.build().map_err(|e| HarnessError::Runtime(e.to_string()))?;
    let n = cfg.n_values()?[0];
    let horizon = cfg.horizon.expect("validated");
    // Every cell sees the same training set, so only t_0 varies.
    let training = sample_p0(&mixture, n, derive_seed(cfg.seed, "training", 0));
    for (i, t0) in cfg.t_values()?.into_iter().enumerate() {
        let seed = cell_seed(cfg.seed, kind, i);
        let (y, se) = timed(result, i, t0, || {
            let err = cell_error(kind, i, t0);
            let times = score_forge_core::metrics::geometric_grid(t0, horizon, cfg.grid).map_err(&err)?;
            let bank =
                KernelScoreBank::build_in(exec, &training, &times, cfg.bandwidth_scale, derive_seed(seed, "bank", 0))
                    .map_err(&err)?;
            let ie = integrated_score_error_in(exec, &bank, &mixture, t0, horizon, cfg.grid, cfg.mc, derive_seed(seed, "mse", 0))
                .map_err(&err)?;
            Ok((ie.value, trapezoid_stderr(&ie.samples)))
        })?;
        result.rows.push(Row {
            experiment: kind.name().into(),
            cell_index: i,
            x: t0,
            y: finite(kind, i, t0, y)?,
            stderr: se,
            seed,
        });
    }
    Ok(())
}

/// Standard error of a trapezoid sum of independent estimates.
fn trapezoid_stderr(samples: &[(f64, score_forge_core::metrics::McEstimate)]) -> f64 {
    let k = samples.len();
    let mut var = 0.0;
    for (j, (_, est)) in samples.iter().enumerate() {
        let left = if j > 0 { samples[j].0 - samples[j - 1].0 } else { 0.0 };
        let right = if j + 1 < k { samples[j + 1].0 - samples[j].0 } else { 0.0 };
        let w = 0.5 * (left + right);
        var += w * w * est.stderr * est.stderr;
    }
    var.sqrt()
}

/// `t_0 = n^{-2/(2β+d)}` and the uncapped `T = n^{2β/(2β+d)}`.
pub fn theory_times(n: usize, beta: f64, d: usize) -> (f64, f64) {
    let denom = 2.0 * beta + d as f64;
    let nf = n as f64;
    (nf.powf(-2.0 / denom), nf.powf(2.0 * beta / denom))
}

/// `T` and `t_0` actually used by an end-to-end cell.
pub fn end_to_end_times(cfg: &ExperimentConfig, n: usize, d: usize) -> (f64, f64) {
    let (t0, big_t) = theory_times(n, cfg.beta, d);
    let t0 = cfg.early_stop.unwrap_or(t0);
    let wanted = cfg.horizon.unwrap_or(big_t);
    let horizon = wanted.min(cfg.horizon_cap);
    if horizon < wanted {
        log::info!("n = {n}: horizon T = {wanted:.4} capped at {horizon}");
    }
    (t0, horizon)
}

/// Half the L1 distance between `p_0` and `p_{t_0}` on a window covering both.
pub fn early_stop_tv(mixture: &GaussianMixture, t0: f64, nodes: usize) -> Result<f64, score_forge_core::Error> {
    let p0 = mixture.smoothed(0.0)?;
    let pt = mixture.smoothed(t0)?;
    let reach = mixture.max_mean_norm() + 8.0 * (mixture.max_variance() + t0).sqrt();
    let narrowest = mixture.variances().iter().copied().fold(f64::INFINITY, f64::min).sqrt();
    let nodes = nodes.max((2.0 * reach / (narrowest / 20.0)).ceil() as usize + 1);
    tv_distance_1d(|x| p0.density(&[x]), |x| pt.density(&[x]), -reach, reach, nodes)
}

/// Largest gap between a component's share of `samples` (by most likely
/// component under `p_t`) and its weight.
pub fn mode_mass_error(samples: &Points, oracle: &SmoothedOracle) -> f64 {
    let base = oracle.base();
    let mut counts = vec![0usize; base.components()];
    for x in samples.rows() {
        counts[base.most_likely_component(x, oracle.time())] += 1;
    }
    let total = samples.len() as f64;
    counts
        .iter()
        .zip(base.weights())
        .map(|(&c, &w)| (c as f64 / total - w).abs())
        .fold(0.0, f64::max)
}

/// Largest per-coordinate error of the sample mean and relative error of the
/// sample variance against `p_t`, used where TV is not computed (`d ≥ 2`).
pub fn moment_error(samples: &Points, oracle: &SmoothedOracle) -> f64 {
    let base = oracle.base();
    let t = oracle.time();
    let mean = samples.mean();
    let var = samples.variance();
    let mut worst: f64 = 0.0;
    for j in 0..base.dim() {
        let m: f64 = (0..base.components()).map(|k| base.weights()[k] * base.mean(k)[j]).sum();
        let second: f64 = (0..base.components())
            .map(|k| base.weights()[k] * (base.variances()[k] + t + base.mean(k)[j].powi(2)))
            .sum();
        let v = second - m * m;
        worst = worst.max((mean[j] - m).abs()).max(((var[j] - v) / v).abs());
    }
    worst
}

fn end_to_end<E: Executor>(cfg: &ExperimentConfig, exec: &E, result: &mut ExperimentResult) -> Result<(), HarnessError> {
    let kind = cfg.experiment;
    let mixture = cfg.mixture.build().map_err(|e| HarnessError::Runtime(e.to_string()))?;
    let d = mixture.dim();
    let ns = cfg.n_values()?;
    let n_max = *ns.last().unwrap();
    // Shared across cells: the training set of each cell is a prefix of the
    // largest one, and every cell starts from the same trajectory noise.
    let training_seed = derive_seed(cfg.seed, "training", 0);
    let trajectory_seed = derive_seed(cfg.seed, "trajectories", 0);
    let training = match cfg.score {
        ScoreSpec::KernelBank => Some(sample_p0(&mixture, n_max, training_seed)),
        _ => None,
    };
    for (i, &n) in ns.iter().enumerate() {
        let seed = cell_seed(cfg.seed, kind, i);
        let x = n as f64;
        let (t0, horizon) = end_to_end_times(cfg, n, d);
        let err = cell_error(kind, i, x);
        let oracle = mixture.smoothed(t0).map_err(&err)?;
        if d == 1 {
            let tv = early_stop_tv(&mixture, t0, cfg.tv_nodes).map_err(&err)?;
            result.rows.push(Row {
                experiment: EARLY_STOP.into(),
                cell_index: i,
                x,
                y: finite(kind, i, x, tv)?,
                stderr: 0.0,
                seed,
            });
        }
        if cfg.score == ScoreSpec::None {
            continue;
        }
        let sampler = SamplerConfig {
            horizon,
            early_stop: t0,
            steps: cfg.steps,
            schedule: cfg.schedule.into(),
            seed: trajectory_seed,
        };
        let samples = timed(result, i, x, || {
            match cfg.score {
                ScoreSpec::KernelBank => {
                    let train = training.as_ref().expect("built above").slice_rows(0..n);
                    let bank = KernelScoreBank::build_in(
                        exec,
                        &train,
                        &sampler.score_times(),
                        cfg.bandwidth_scale,
                        derive_seed(seed, "bank", 0),
                    )
                    .map_err(&err)?;
                    reverse_sample_in(exec, &bank, &sampler, cfg.samples).map_err(&err)
                }
                ScoreSpec::Oracle => {
                    reverse_sample_in(exec, &OracleScore::new(mixture.clone()), &sampler, cfg.samples).map_err(&err)
                }
                ScoreSpec::None => unreachable!(),
            }
        })?;
        let y = if d == 1 {
            tv_empirical_1d(samples.as_slice(), &oracle, cfg.tv_nodes).map_err(&err)?
        } else {
            moment_error(&samples, &oracle)
        };
        result.rows.push(Row {
            experiment: kind.name().into(),
            cell_index: i,
            x,
            y: finite(kind, i, x, y)?,
            stderr: 0.0,
            seed,
        });
        result.rows.push(Row {
            experiment: MODE_MASS.into(),
            cell_index: i,
            x,
            y: mode_mass_error(&samples, &oracle),
            stderr: 0.0,
            seed,
        });
    }
    Ok(())
}

fn kernel_certify(cfg: &ExperimentConfig, result: &mut ExperimentResult) -> Result<(), HarnessError> {
    let kind = cfg.experiment;
    for (i, order) in (1..=cfg.max_order).enumerate() {
        let x = order as f64;
        let report = timed(result, i, x, || {
            let spec = build_kernel(order).map_err(cell_error(kind, i, x))?;
            Ok(spec.certify())
        })?;
        result.rows.push(Row {
            experiment: kind.name().into(),
            cell_index: i,
            x,
            y: report.mass_error.max(report.max_moment_error),
            stderr: 0.0,
            seed: 0,
        });
        result.checks.push(CheckOutcome {
            series: kind.name().into(),
            name: format!("order {order}"),
            passed: report.passed(),
            detail: format!(
                "mass error {:.3e}, max moment error {:.3e} on {} nodes",
                report.mass_error, report.max_moment_error, report.nodes
            ),
        });
    }
    Ok(())
}

fn fit_series(result: &mut ExperimentResult) {
    if result.config.experiment == ExperimentKind::KernelCertify {
        return;
    }
    let mut names: Vec<String> = Vec::new();
    for r in &result.rows {
        if !names.contains(&r.experiment) {
            names.push(r.experiment.clone());
        }
    }
    for name in names {
        if name == MODE_MASS {
            continue;
        }
        let points: Vec<RatePoint> = result
            .series(&name)
            .iter()
            .map(|r| RatePoint {
                x: r.x,
                y: r.y,
                stderr: r.stderr,
                seed: r.seed,
            })
            .collect();
        if let Ok(fit) = fit_rate_slope(&points) {
            result.fits.push(SeriesFit {
                series: name,
                fit,
                points: points.len(),
            });
        }
    }
}

fn apply_checks(result: &mut ExperimentResult) {
    let checks = result.config.checks.clone();
    for (series, c) in &checks {
        let ys: Vec<f64> = result.series(series).iter().map(|r| r.y).collect();
        let mut push = |name: &str, passed: bool, detail: String| {
            result.checks.push(CheckOutcome {
                series: series.clone(),
                name: name.into(),
                passed,
                detail,
            })
        };
        if ys.is_empty() {
            push("present", false, "series has no rows".into());
            continue;
        }
        check_series(c, &ys, result.fits.iter().find(|f| &f.series == series).map(|f| f.fit), &mut push);
    }
}

fn check_series(c: &SeriesChecks, ys: &[f64], fit: Option<SlopeFit>, push: &mut impl FnMut(&str, bool, String)) {
    let last = *ys.last().unwrap();
    if let Some([lo, hi]) = c.slope {
        match fit {
            Some(f) => push("slope", (lo..=hi).contains(&f.slope), format!("{:.4} in [{lo}, {hi}]", f.slope)),
            None => push("slope", false, "no fit".into()),
        }
    }
    if let Some(min) = c.min_r2 {
        match fit {
            Some(f) => push("r2", f.r2 >= min, format!("{:.4} >= {min}", f.r2)),
            None => push("r2", false, "no fit".into()),
        }
    }
    if let Some(max) = c.max_last {
        push("max_last", last <= max, format!("{last:.5} <= {max}"));
    }
    if let Some(max) = c.max_all {
        let worst = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        push("max_all", worst <= max, format!("{worst:.5} <= {max}"));
    }
    if c.non_increasing {
        push("non_increasing", ys.windows(2).all(|w| w[1] <= w[0]), format!("{ys:?}"));
    }
    if c.decreasing {
        push("decreasing", ys.windows(2).all(|w| w[1] < w[0]), format!("{ys:?}"));
    }
    if let Some([lo, hi]) = c.first_over_last {
        let ratio = ys[0] / last;
        push("first_over_last", (lo..=hi).contains(&ratio), format!("{ratio:.4} in [{lo}, {hi}]"));
    }
}
