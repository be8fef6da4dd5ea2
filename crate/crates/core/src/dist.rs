//! Reference distributions with exact samplers and smoothed oracles.
//!
//! Only isotropic Gaussian mixtures are supported: for these `p_t = p_0 * φ_t`
//! is again a mixture (component variances grow by `t`), so density, gradient
//! and score at any time are available in closed form.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;
use rand_distr::weighted::WeightedIndex;
use rand_distr::{Distribution, StandardNormal};

use crate::points::Points;
use crate::seed::rng_from_seed;
use crate::{math, Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    dim: usize,
    weights: Vec<f64>,
    log_weights: Vec<f64>,
    /// Row-major `k × d`.
    means: Vec<f64>,
    variances: Vec<f64>,
    sub_gaussian_proxy: f64,
}

impl GaussianMixture {
    pub fn new(dim: usize, weights: Vec<f64>, means: Vec<Vec<f64>>, variances: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidMixture("dimension must be positive"));
        }
        if weights.is_empty() {
            return Err(Error::InvalidMixture("at least one component is required"));
        }
        if means.len() != weights.len() || variances.len() != weights.len() {
            return Err(Error::InvalidMixture(
                "weights, means and variances must have the same length",
            ));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidMixture("weights must be finite and nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidMixture("weights must sum to 1"));
        }
        if variances.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidMixture("variances must be positive and finite"));
        }
        let mut flat = Vec::with_capacity(dim * means.len());
        for m in &means {
            if m.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: m.len(),
                });
            }
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidMixture("means must be finite"));
            }
            flat.extend_from_slice(m);
        }
        let sub_gaussian_proxy = means
            .iter()
            .zip(&variances)
            .map(|(m, v)| math::sqrt(m.iter().map(|x| x * x).sum::<f64>()) + math::sqrt(*v))
            .fold(0.0, f64::max);
        let log_weights = weights.iter().map(|&w| math::ln(w)).collect();
        Ok(Self {
            dim,
            weights,
            log_weights,
            means: flat,
            variances,
            sub_gaussian_proxy,
        })
    }

    /// `N(0, I_d)`.
    pub fn standard_normal(dim: usize) -> Result<Self> {
        Self::new(dim, vec![1.0], vec![vec![0.0; dim]], vec![1.0])
    }

    /// Equal-weight pair at `±offset` along every axis in 1-d.
    pub fn symmetric_pair(offset: f64, variance: f64) -> Result<Self> {
        Self::new(
            1,
            vec![0.5, 0.5],
            vec![vec![-offset], vec![offset]],
            vec![variance, variance],
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn components(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn mean(&self, k: usize) -> &[f64] {
        &self.means[k * self.dim..(k + 1) * self.dim]
    }

    pub fn means(&self) -> Vec<Vec<f64>> {
        self.means.chunks_exact(self.dim).map(|c| c.to_vec()).collect()
    }

    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    /// `max_k (‖μ_k‖ + σ_k)`, recorded as a sub-Gaussian scale.
    pub fn sub_gaussian_proxy(&self) -> f64 {
        self.sub_gaussian_proxy
    }

    pub fn max_mean_norm(&self) -> f64 {
        self.means
            .chunks_exact(self.dim)
            .map(|m| math::sqrt(m.iter().map(|x| x * x).sum::<f64>()))
            .fold(0.0, f64::max)
    }

    pub fn max_variance(&self) -> f64 {
        self.variances.iter().copied().fold(0.0, f64::max)
    }

    /// The mixture convolved with `N(0, t I)`.
    pub fn convolved(&self, t: f64) -> Result<Self> {
        check_time(t)?;
        let mut out = self.clone();
        out.variances.iter_mut().for_each(|v| *v += t);
        out.sub_gaussian_proxy = self
            .means
            .chunks_exact(self.dim)
            .zip(&out.variances)
            .map(|(m, v)| math::sqrt(m.iter().map(|x| x * x).sum::<f64>()) + math::sqrt(*v))
            .fold(0.0, f64::max);
        Ok(out)
    }

    pub fn smoothed(&self, t: f64) -> Result<SmoothedOracle> {
        SmoothedOracle::new(self.clone(), t)
    }

    /// `n` i.i.d. draws, deterministic in `seed`.
    pub fn sample(&self, n: usize, seed: u64) -> Points {
        let mut rng = rng_from_seed(seed);
        let picker = WeightedIndex::new(&self.weights).expect("weights validated at construction");
        let mut out = Points::zeros(self.dim, n);
        for row in out.rows_mut() {
            let k = if self.weights.len() == 1 { 0 } else { picker.sample(&mut rng) };
            let sd = math::sqrt(self.variances[k]);
            for (x, m) in row.iter_mut().zip(self.mean(k)) {
                let z: f64 = rng.sample(StandardNormal);
                *x = m + sd * z;
            }
        }
        out
    }

    /// `n` Latin-hypercube draws: the component selector and each normal
    /// coordinate are stratified into `n` equal-probability bins, with the
    /// bins paired by independent random permutations. Every row is
    /// marginally distributed as the mixture; rows are not independent.
    pub fn sample_stratified(&self, n: usize, seed: u64) -> Points {
        let mut rng = rng_from_seed(seed);
        let mut out = Points::zeros(self.dim, n);
        if n == 0 {
            return out;
        }
        let nf = n as f64;
        let strata = |rng: &mut crate::seed::Rng| -> Vec<f64> {
            let mut perm: Vec<usize> = (0..n).collect();
            for i in (1..n).rev() {
                let j = rng.random_range(0..=i);
                perm.swap(i, j);
            }
            perm.iter().map(|&k| (k as f64 + rng.random::<f64>()) / nf).collect()
        };
        let selector = strata(&mut rng);
        let coords: Vec<Vec<f64>> = (0..self.dim).map(|_| strata(&mut rng)).collect();
        let cumulative: Vec<f64> = self
            .weights
            .iter()
            .scan(0.0, |acc, w| {
                *acc += w;
                Some(*acc)
            })
            .collect();
        for (i, row) in out.rows_mut().enumerate() {
            let k = cumulative
                .iter()
                .position(|&c| selector[i] < c)
                .unwrap_or(self.weights.len() - 1);
            let sd = math::sqrt(self.variances[k]);
            for (j, (x, m)) in row.iter_mut().zip(self.mean(k)).enumerate() {
                // Open interval keeps the quantile finite.
                let u = coords[j][i].clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON);
                *x = m + sd * math::normal_quantile(u);
            }
        }
        out
    }

    /// `ln p_t(x)` in log-sum-exp form.
    pub fn log_density_at(&self, x: &[f64], t: f64) -> f64 {
        let d = self.dim as f64;
        let mut max = f64::NEG_INFINITY;
        let mut sum = 0.0;
        for k in 0..self.weights.len() {
            if self.weights[k] == 0.0 {
                continue;
            }
            let v = self.variances[k] + t;
            let q: f64 = x.iter().zip(self.mean(k)).map(|(a, b)| (a - b) * (a - b)).sum();
            let l = self.log_weights[k] - 0.5 * d * (LN_2PI + math::ln(v)) - 0.5 * q / v;
            if l > max {
                sum = sum * math::exp(max - l) + 1.0;
                max = l;
            } else {
                sum += math::exp(l - max);
            }
        }
        max + math::ln(sum)
    }

    /// Index of the component with the largest responsibility at `x` under `p_t`.
    pub fn most_likely_component(&self, x: &[f64], t: f64) -> usize {
        let d = self.dim as f64;
        let mut best = (0, f64::NEG_INFINITY);
        for k in 0..self.weights.len() {
            let v = self.variances[k] + t;
            let q: f64 = x.iter().zip(self.mean(k)).map(|(a, b)| (a - b) * (a - b)).sum();
            let l = self.log_weights[k] - 0.5 * d * math::ln(v) - 0.5 * q / v;
            if l > best.1 {
                best = (k, l);
            }
        }
        best.0
    }

    /// Writes `s_t(x) = Σ r_k (μ_k - x) / (σ_k² + t)` into `out` and returns
    /// `ln p_t(x)`. Responsibilities are accumulated with a running maximum so
    /// far tails do not underflow.
    pub fn score_at(&self, x: &[f64], t: f64, out: &mut [f64]) -> f64 {
        let d = self.dim as f64;
        let mut max = f64::NEG_INFINITY;
        let mut sum = 0.0;
        out.iter_mut().for_each(|o| *o = 0.0);
        for k in 0..self.weights.len() {
            if self.weights[k] == 0.0 {
                continue;
            }
            let v = self.variances[k] + t;
            let mu = self.mean(k);
            let q: f64 = x.iter().zip(mu).map(|(a, b)| (a - b) * (a - b)).sum();
            let l = self.log_weights[k] - 0.5 * d * (LN_2PI + math::ln(v)) - 0.5 * q / v;
            let e = if l > max {
                let scale = math::exp(max - l);
                sum *= scale;
                out.iter_mut().for_each(|o| *o *= scale);
                max = l;
                1.0
            } else {
                math::exp(l - max)
            };
            sum += e;
            for ((o, m), xi) in out.iter_mut().zip(mu).zip(x) {
                *o += e * (m - xi) / v;
            }
        }
        out.iter_mut().for_each(|o| *o /= sum);
        max + math::ln(sum)
    }
}

fn check_time(t: f64) -> Result<()> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::param("t", "must be finite and nonnegative"));
    }
    Ok(())
}

/// `p_t = p_0 * φ_t` for a mixture `p_0`, with exact density, gradient and score.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothedOracle {
    base: GaussianMixture,
    time: f64,
}

impl SmoothedOracle {
    pub fn new(base: GaussianMixture, time: f64) -> Result<Self> {
        check_time(time)?;
        Ok(Self { base, time })
    }

    pub fn base(&self) -> &GaussianMixture {
        &self.base
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn dim(&self) -> usize {
        self.base.dim
    }

    /// The mixture whose density is `p_t`.
    pub fn marginal(&self) -> GaussianMixture {
        self.base.convolved(self.time).expect("time validated at construction")
    }

    pub fn log_density(&self, x: &[f64]) -> f64 {
        self.base.log_density_at(x, self.time)
    }

    pub fn density(&self, x: &[f64]) -> f64 {
        math::exp(self.log_density(x))
    }

    pub fn score_into(&self, x: &[f64], out: &mut [f64]) {
        self.base.score_at(x, self.time, out);
    }

    pub fn score(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.base.dim];
        self.score_into(x, &mut out);
        out
    }

    /// `∇p_t(x) = p_t(x) s_t(x)`.
    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.base.dim];
        let logp = self.base.score_at(x, self.time, &mut out);
        let p = math::exp(logp);
        out.iter_mut().for_each(|g| *g *= p);
        out
    }

    /// `n` draws from `p_t`.
    pub fn sample(&self, n: usize, seed: u64) -> Points {
        self.marginal().sample(n, seed)
    }

    /// `n` Latin-hypercube draws from `p_t`; see
    /// [`GaussianMixture::sample_stratified`].
    pub fn sample_stratified(&self, n: usize, seed: u64) -> Points {
        self.marginal().sample_stratified(n, seed)
    }
}

/// Draws `count` samples from `p_0`.
pub fn sample_p0(dist: &GaussianMixture, count: usize, seed: u64) -> Points {
    dist.sample(count, seed)
}

/// `X_t = X_0 + √t Z` row by row. `t = 0` returns the input unchanged.
pub fn forward_perturb(samples: &Points, t: f64, seed: u64) -> Result<Points> {
    check_time(t)?;
    let mut out = samples.clone();
    if t == 0.0 {
        return Ok(out);
    }
    let sd = math::sqrt(t);
    let mut rng = rng_from_seed(seed);
    for row in out.rows_mut() {
        for x in row.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *x += sd * z;
        }
    }
    Ok(out)
}

pub fn oracle_density(oracle: &SmoothedOracle, x: &[f64]) -> f64 {
    oracle.density(x)
}

pub fn oracle_score(oracle: &SmoothedOracle, x: &[f64]) -> Vec<f64> {
    oracle.score(x)
}
