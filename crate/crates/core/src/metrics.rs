//! Error measurements against closed-form oracles.

use alloc::vec;
use alloc::vec::Vec;

use crate::dist::SmoothedOracle;
use crate::estimator::{EstimatorConfig, ScoreEstimator};
use crate::exec::{Executor, Sequential};
use crate::points::Points;
use crate::sampler::ScoreField;
use crate::seed::derive_seed;
use crate::{math, Error, Result};

/// One measured error at abscissa `x` (a sample size or a time).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatePoint {
    pub x: f64,
    pub y: f64,
    pub stderr: f64,
    pub seed: u64,
}

/// Least-squares line through `(ln x, ln y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub value: f64,
    pub stderr: f64,
}

pub const MIN_MSE_DRAWS: usize = 100;
pub const MIN_TV_NODES: usize = 1000;
pub const MIN_TV_SAMPLES: usize = 10_000;
/// Largest probability mass allowed outside a TV integration window.
pub const TV_TAIL_TOLERANCE: f64 = 1e-4;

const MSE_CHUNK: usize = 256;

/// `E_{X ~ p_t} ‖score(X, t) - s_t(X)‖²` from `mc` draws of `p_t`.
///
/// The draws are a Latin hypercube over the mixture's component selector and
/// normal coordinates, so each is distributed as `p_t` and the tails are
/// covered evenly. The reported standard error uses the i.i.d. formula, which
/// overstates the error of the stratified mean.
pub fn score_mse<S: ScoreField + ?Sized>(score: &S, oracle: &SmoothedOracle, mc: usize, seed: u64) -> Result<McEstimate> {
    score_mse_in(&Sequential, score, oracle, mc, seed)
}

pub fn score_mse_in<E: Executor, S: ScoreField + ?Sized>(
    exec: &E,
    score: &S,
    oracle: &SmoothedOracle,
    mc: usize,
    seed: u64,
) -> Result<McEstimate> {
    if mc < MIN_MSE_DRAWS {
        return Err(Error::TooFewSamples {
            required: MIN_MSE_DRAWS,
            got: mc,
        });
    }
    if score.dim() != oracle.dim() {
        return Err(Error::DimensionMismatch {
            expected: oracle.dim(),
            got: score.dim(),
        });
    }
    let draws = oracle.sample_stratified(mc, seed);
    let t = oracle.time();
    let d = oracle.dim();
    let errors: Vec<Vec<f64>> = exec.map(mc.div_ceil(MSE_CHUNK), |c| {
        let mut est = vec![0.0; d];
        let mut truth = vec![0.0; d];
        let end = ((c + 1) * MSE_CHUNK).min(mc);
        (c * MSE_CHUNK..end)
            .map(|i| {
                let x = draws.row(i);
                score.score_into(x, t, &mut est);
                oracle.score_into(x, &mut truth);
                est.iter().zip(&truth).map(|(a, b)| (a - b) * (a - b)).sum()
            })
            .collect()
    });
    Ok(mean_and_stderr(errors.iter().flatten().copied(), mc))
}

fn mean_and_stderr(values: impl Iterator<Item = f64> + Clone, n: usize) -> McEstimate {
    let nf = n as f64;
    let mean = values.clone().sum::<f64>() / nf;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / (nf - 1.0).max(1.0);
    McEstimate {
        value: mean,
        stderr: math::sqrt(var / nf),
    }
}

/// `points` values from `lo` to `hi` with a constant ratio, endpoints exact.
pub fn geometric_grid(lo: f64, hi: f64, points: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi > lo && lo.is_finite() && hi.is_finite()) {
        return Err(Error::param("grid", "need 0 < lo < hi"));
    }
    if points < 2 {
        return Err(Error::param("grid", "need at least 2 points"));
    }
    let mut g: Vec<f64> = (0..points)
        .map(|k| lo * math::powf(hi / lo, k as f64 / (points - 1) as f64))
        .collect();
    g[points - 1] = hi;
    Ok(g)
}

/// `∫_{t0}^{T} E_{p_t}‖ŝ_t - s_t‖² dt` by the trapezoid rule on a geometric grid.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegratedError {
    pub value: f64,
    /// `(t, mse)` at each grid time.
    pub samples: Vec<(f64, McEstimate)>,
}

pub fn integrated_score_error<S: ScoreField + ?Sized>(
    score: &S,
    base: &crate::dist::GaussianMixture,
    t0: f64,
    horizon: f64,
    grid: usize,
    mc: usize,
    seed: u64,
) -> Result<IntegratedError> {
    integrated_score_error_in(&Sequential, score, base, t0, horizon, grid, mc, seed)
}

#[allow(clippy::too_many_arguments)]
pub fn integrated_score_error_in<E: Executor, S: ScoreField + ?Sized>(
    exec: &E,
    score: &S,
    base: &crate::dist::GaussianMixture,
    t0: f64,
    horizon: f64,
    grid: usize,
    mc: usize,
    seed: u64,
) -> Result<IntegratedError> {
    if !(t0 > 0.0 && horizon > t0) {
        return Err(Error::param("t0", "need 0 < t0 < T"));
    }
    let times = geometric_grid(t0, horizon, grid)?;
    let mut samples = Vec::with_capacity(times.len());
    for (k, &t) in times.iter().enumerate() {
        let oracle = base.smoothed(t)?;
        let est = score_mse_in(exec, score, &oracle, mc, derive_seed(seed, "integrated", k as u64))?;
        samples.push((t, est));
    }
    let value = samples
        .windows(2)
        .map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1.value + w[1].1.value))
        .sum();
    Ok(IntegratedError { value, samples })
}

/// `½ ∫ |a - b|` over `[lo, hi]` by composite Simpson on `nodes` points
/// (rounded up to an odd count). Fails if either density leaves more than
/// [`TV_TAIL_TOLERANCE`] of its mass outside the window.
pub fn tv_distance_1d(
    density_a: impl Fn(f64) -> f64,
    density_b: impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    nodes: usize,
) -> Result<f64> {
    if nodes < MIN_TV_NODES {
        return Err(Error::param("nodes", "need at least 1000 quadrature nodes"));
    }
    if !(lo.is_finite() && hi.is_finite() && hi > lo) {
        return Err(Error::param("interval", "need finite lo < hi"));
    }
    let nodes = if nodes.is_multiple_of(2) { nodes + 1 } else { nodes };
    let step = (hi - lo) / (nodes - 1) as f64;
    let (mut mass_a, mut mass_b, mut diff) = (0.0, 0.0, 0.0);
    for i in 0..nodes {
        let x = if i == nodes - 1 { hi } else { lo + step * i as f64 };
        let w = if i == 0 || i == nodes - 1 {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let (a, b) = (density_a(x), density_b(x));
        mass_a += w * a;
        mass_b += w * b;
        diff += w * (a - b).abs();
    }
    let scale = step / 3.0;
    let missing = (1.0 - mass_a * scale).abs().max((1.0 - mass_b * scale).abs());
    if missing > TV_TAIL_TOLERANCE {
        return Err(Error::IntervalTooSmall { missing });
    }
    Ok((0.5 * diff * scale).clamp(0.0, 1.0))
}

/// TV between an order-2 KDE of `samples` and the reference density `p_t`.
///
/// The KDE uses the default bandwidth at the reference time,
/// `h = √(t / ln m)` for `m` samples. The integration window covers the
/// reference's `8σ` range and every sample's kernel support; `nodes` is raised
/// if needed so that the grid resolves `h`.
pub fn tv_empirical_1d(samples: &[f64], reference: &SmoothedOracle, nodes: usize) -> Result<f64> {
    if reference.dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: reference.dim(),
        });
    }
    if samples.len() < MIN_TV_SAMPLES {
        return Err(Error::TooFewSamples {
            required: MIN_TV_SAMPLES,
            got: samples.len(),
        });
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::param("samples", "must be finite"));
    }
    let cfg = EstimatorConfig::default_for(samples.len(), reference.time(), 1, 1.0)?.with_order(2)?;
    let kde = ScoreEstimator::build(cfg, &Points::from_scalars(samples.to_vec()))?;

    let base = reference.base();
    let reach = base.max_mean_norm() + 8.0 * math::sqrt(base.max_variance() + reference.time());
    let smin = samples.iter().copied().fold(f64::INFINITY, f64::min);
    let smax = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = (-reach).min(smin - cfg.h);
    let hi = reach.max(smax + cfg.h);
    let resolve = math::ceil((hi - lo) / (cfg.h / 32.0)) as usize + 1;
    let nodes = nodes.max(resolve);

    tv_distance_1d(
        |x| kde.density_and_gradient_into(&[x], &mut [0.0]),
        |x| reference.density(&[x]),
        lo,
        hi,
        nodes,
    )
}

/// Ordinary least squares on `(ln x, ln y)`.
pub fn fit_rate_slope(points: &[RatePoint]) -> Result<SlopeFit> {
    if points.len() < 2 {
        return Err(Error::DegenerateFit("need at least two points"));
    }
    if points.iter().any(|p| !(p.y > 0.0) || !p.y.is_finite()) {
        return Err(Error::DegenerateFit("every y must be positive"));
    }
    if points.iter().any(|p| !(p.x > 0.0) || !p.x.is_finite()) {
        return Err(Error::DegenerateFit("every x must be positive"));
    }
    let n = points.len() as f64;
    let lx: Vec<f64> = points.iter().map(|p| math::ln(p.x)).collect();
    let ly: Vec<f64> = points.iter().map(|p| math::ln(p.y)).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    if !(sxx > 0.0) {
        return Err(Error::DegenerateFit("abscissae must be distinct"));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ly.iter().map(|y| (y - my) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| {
            let r = y - (intercept + slope * x);
            r * r
        })
        .sum();
    // A constant series is fitted exactly by a flat line.
    let r2 = if syy > 0.0 { (1.0 - sse / syy).clamp(0.0, 1.0) } else { 1.0 };
    Ok(SlopeFit { slope, intercept, r2 })
}
