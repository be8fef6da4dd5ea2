//! Reverse-SDE sampling with early stopping.
//!
//! Starting from `Y_0 ~ N(0, T I)` the reverse process
//! `dY = s_{T-τ}(Y) dτ + dB` is integrated by Euler–Maruyama up to
//! `τ = T - t_0`. Each trajectory owns a random stream derived from the
//! config seed and its index, so output does not depend on batching.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::dist::GaussianMixture;
use crate::estimator::{EstimatorConfig, ScoreEstimator};
use crate::exec::{Executor, Sequential};
use crate::points::Points;
use crate::seed::{derive_seed, derived_rng};
use crate::{dist, math, Error, Result};

/// A time-dependent vector field `(x, t) ↦ s_t(x)`.
pub trait ScoreField: Sync {
    fn dim(&self) -> usize;

    fn score_into(&self, x: &[f64], t: f64, out: &mut [f64]);

    fn score(&self, x: &[f64], t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.score_into(x, t, &mut out);
        out
    }
}

impl<S: ScoreField + ?Sized> ScoreField for &S {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn score_into(&self, x: &[f64], t: f64, out: &mut [f64]) {
        (**self).score_into(x, t, out)
    }
}

/// `s ≡ 0`.
#[derive(Debug, Clone, Copy)]
pub struct ZeroScore {
    pub dim: usize,
}

impl ScoreField for ZeroScore {
    fn dim(&self) -> usize {
        self.dim
    }

    fn score_into(&self, _x: &[f64], _t: f64, out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
    }
}

/// The exact score of a smoothed mixture.
#[derive(Debug, Clone)]
pub struct OracleScore {
    mixture: GaussianMixture,
}

impl OracleScore {
    pub fn new(mixture: GaussianMixture) -> Self {
        Self { mixture }
    }
}

impl ScoreField for OracleScore {
    fn dim(&self) -> usize {
        self.mixture.dim()
    }

    fn score_into(&self, x: &[f64], t: f64, out: &mut [f64]) {
        self.mixture.score_at(x, t, out);
    }
}

/// A single estimator answers for every `t`.
impl ScoreField for ScoreEstimator {
    fn dim(&self) -> usize {
        self.config().d
    }

    fn score_into(&self, x: &[f64], _t: f64, out: &mut [f64]) {
        self.truncated_score_into(x, out);
    }
}

/// Truncated kernel estimators at a fixed set of times; a query at `t` is
/// answered by the estimator whose time is nearest.
#[derive(Debug, Clone)]
pub struct KernelScoreBank {
    /// Ascending.
    times: Vec<f64>,
    estimators: Vec<ScoreEstimator>,
}

impl KernelScoreBank {
    /// Builds one estimator per time from a fresh perturbation
    /// `X_i + √t Z_i` of `training`, with default bandwidth/order/threshold.
    pub fn build(training: &Points, times: &[f64], bandwidth_scale: f64, seed: u64) -> Result<Self> {
        Self::build_in(&Sequential, training, times, bandwidth_scale, seed)
    }

    pub fn build_in<E: Executor>(
        exec: &E,
        training: &Points,
        times: &[f64],
        bandwidth_scale: f64,
        seed: u64,
    ) -> Result<Self> {
        let built = exec.map(times.len(), |k| {
            bank_member(training, times[k], bandwidth_scale, derive_seed(seed, "bank", k as u64))
        });
        let estimators = built.into_iter().collect::<Result<Vec<_>>>()?;
        Self::from_parts(times.to_vec(), estimators)
    }

    pub fn from_parts(times: Vec<f64>, estimators: Vec<ScoreEstimator>) -> Result<Self> {
        if times.is_empty() || times.len() != estimators.len() {
            return Err(Error::param("times", "need one estimator per time"));
        }
        let dim = estimators[0].dim();
        if estimators.iter().any(|e| e.dim() != dim) {
            return Err(Error::param("estimators", "dimensions differ"));
        }
        let mut pairs: Vec<(f64, ScoreEstimator)> = times.into_iter().zip(estimators).collect();
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(core::cmp::Ordering::Equal));
        let (times, estimators) = pairs.into_iter().unzip();
        Ok(Self { times, estimators })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn estimators(&self) -> &[ScoreEstimator] {
        &self.estimators
    }

    pub fn estimator_for(&self, t: f64) -> &ScoreEstimator {
        let i = self.times.partition_point(|&s| s < t);
        let idx = if i == 0 {
            0
        } else if i == self.times.len() {
            i - 1
        } else if (self.times[i] - t) <= (t - self.times[i - 1]) {
            i
        } else {
            i - 1
        };
        &self.estimators[idx]
    }
}

impl ScoreField for KernelScoreBank {
    fn dim(&self) -> usize {
        self.estimators[0].dim()
    }

    fn score_into(&self, x: &[f64], t: f64, out: &mut [f64]) {
        self.estimator_for(t).truncated_score_into(x, out);
    }
}

/// One member of a [`KernelScoreBank`]: perturb to time `t`, then build.
pub fn bank_member(training: &Points, t: f64, bandwidth_scale: f64, seed: u64) -> Result<ScoreEstimator> {
    let perturbed = dist::forward_perturb(training, t, seed)?;
    let cfg = EstimatorConfig::default_for(training.len(), t, training.dim(), bandwidth_scale)?;
    ScoreEstimator::build(cfg, &perturbed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Schedule {
    /// Equal steps in reverse time.
    Uniform,
    /// Remaining time `T - τ_k` shrinks by a constant ratio.
    Geometric,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplerConfig {
    /// Terminal time `T`.
    pub horizon: f64,
    /// Early-stopping time `t_0`.
    pub early_stop: f64,
    pub steps: usize,
    pub schedule: Schedule,
    pub seed: u64,
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.early_stop.is_finite() && self.early_stop > 0.0) {
            return Err(Error::param("early_stop", "must be positive"));
        }
        if !(self.horizon.is_finite() && self.horizon > self.early_stop) {
            return Err(Error::param("horizon", "must exceed early_stop"));
        }
        if self.steps == 0 {
            return Err(Error::param("steps", "must be at least 1"));
        }
        Ok(())
    }

    /// Remaining times `r_k = T - τ_k` for `k = 0..=steps`, from `T` down to
    /// `t_0` inclusive.
    pub fn remaining_times(&self) -> Vec<f64> {
        let (big_t, t0, m) = (self.horizon, self.early_stop, self.steps);
        let mut r: Vec<f64> = (0..=m)
            .map(|k| {
                let frac = k as f64 / m as f64;
                match self.schedule {
                    Schedule::Uniform => big_t - frac * (big_t - t0),
                    Schedule::Geometric => big_t * math::powf(t0 / big_t, frac),
                }
            })
            .collect();
        r[0] = big_t;
        r[m] = t0;
        r
    }

    /// Times at which the score is queried: `r_0 .. r_{steps-1}`.
    pub fn score_times(&self) -> Vec<f64> {
        let mut r = self.remaining_times();
        r.pop();
        r
    }
}

const CHUNK: usize = 512;

/// Runs `count` trajectories and returns their states at `τ = T - t_0`.
pub fn reverse_sample<S: ScoreField + ?Sized>(score: &S, cfg: &SamplerConfig, count: usize) -> Result<Points> {
    reverse_sample_in(&Sequential, score, cfg, count)
}

pub fn reverse_sample_in<E: Executor, S: ScoreField + ?Sized>(
    exec: &E,
    score: &S,
    cfg: &SamplerConfig,
    count: usize,
) -> Result<Points> {
    reverse_sample_partial_in(exec, score, cfg, count, cfg.steps)
}

/// States after the first `taken` steps, at remaining time `r_taken`.
pub fn reverse_sample_partial<S: ScoreField + ?Sized>(
    score: &S,
    cfg: &SamplerConfig,
    count: usize,
    taken: usize,
) -> Result<Points> {
    reverse_sample_partial_in(&Sequential, score, cfg, count, taken)
}

pub fn reverse_sample_partial_in<E: Executor, S: ScoreField + ?Sized>(
    exec: &E,
    score: &S,
    cfg: &SamplerConfig,
    count: usize,
    taken: usize,
) -> Result<Points> {
    cfg.validate()?;
    if taken > cfg.steps {
        return Err(Error::param("taken", "exceeds the step count"));
    }
    let dim = score.dim();
    let mut times = cfg.remaining_times();
    times.truncate(taken + 1);
    let chunks = count.div_ceil(CHUNK);
    let blocks = exec.map(chunks, |c| {
        let start = c * CHUNK;
        let end = (start + CHUNK).min(count);
        integrate_block(score, cfg, &times, start..end, dim)
    });
    let blocks = blocks.into_iter().collect::<Result<Vec<_>>>()?;
    Points::concat(dim, blocks)
}

fn integrate_block<S: ScoreField + ?Sized>(
    score: &S,
    cfg: &SamplerConfig,
    times: &[f64],
    range: core::ops::Range<usize>,
    dim: usize,
) -> Result<Points> {
    let mut rngs: Vec<_> = range
        .clone()
        .map(|j| derived_rng(cfg.seed, "trajectory", j as u64))
        .collect();
    let mut state = Points::zeros(dim, range.len());
    let sd0 = math::sqrt(cfg.horizon);
    for (row, rng) in state.rows_mut().zip(rngs.iter_mut()) {
        for y in row.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *y = sd0 * z;
        }
    }
    let mut drift = vec![0.0; dim];
    for (step, pair) in times.windows(2).enumerate() {
        let (t_now, t_next) = (pair[0], pair[1]);
        let dt = t_now - t_next;
        let sd = math::sqrt(dt);
        for (j, (row, rng)) in state.rows_mut().zip(rngs.iter_mut()).enumerate() {
            score.score_into(row, t_now, &mut drift);
            let mut finite = true;
            for (y, s) in row.iter_mut().zip(&drift) {
                let z: f64 = rng.sample(StandardNormal);
                *y += dt * s + sd * z;
                finite &= y.is_finite();
            }
            if !finite {
                return Err(Error::NonFinite {
                    step,
                    trajectory: range.start + j,
                });
            }
        }
    }
    Ok(state)
}

/// OU time `s` to Brownian time `t = e^{2s} - 1`.
pub fn ou_to_bm_time(s: f64) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(Error::param("s", "must be nonnegative"));
    }
    Ok(math::expm1(2.0 * s))
}

/// Brownian time `t` to OU time `s = ½ ln(1 + t)`.
pub fn bm_to_ou_time(t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::param("t", "must be nonnegative"));
    }
    Ok(0.5 * math::ln_1p(t))
}

/// `e^s x`: an OU state at time `s` rescaled to the matching Brownian state.
pub fn scale_ou_sample(x: &[f64], s: f64) -> Vec<f64> {
    let f = math::exp(s);
    x.iter().map(|v| f * v).collect()
}
