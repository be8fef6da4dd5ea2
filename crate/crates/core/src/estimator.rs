//! Kernel density estimates of `p_t`, `∇p_t` and the truncated score.
//!
//! ```text
//! p̂_t(x)  = 1/(n h^d)     Σ K_d((x - X_i)/h)
//! ∇p̂_t(x) = 1/(n h^{d+1}) Σ ∇K_d((x - X_i)/h)
//! ŝ_t(x)  = ∇p̂_t(x) / p̂_t(x)   if p̂_t(x) ≥ ρ, else 0
//! ```

use alloc::vec;
use alloc::vec::Vec;

use crate::grid::NeighborIndex;
use crate::kernel::{build_kernel, ProductKernel, MAX_ORDER};
use crate::points::Points;
use crate::{math, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorConfig {
    pub n: usize,
    pub d: usize,
    pub t: f64,
    /// Bandwidth, in the units of the data.
    pub h: f64,
    /// Kernel order.
    pub ell: usize,
    /// Truncation threshold on `p̂_t`.
    pub rho: f64,
    /// `C` in `h = C √(t / ln n)`.
    pub bandwidth_scale: f64,
}

impl EstimatorConfig {
    /// `h = C √(t/ln n)`, `ℓ = ⌈ln n⌉`, `ρ = 1/(n t^{d/2})`.
    pub fn default_for(n: usize, t: f64, d: usize, bandwidth_scale: f64) -> Result<Self> {
        if n < 3 {
            return Err(Error::param("n", "need at least 3 samples so that ln n > 1"));
        }
        if !(t.is_finite() && t > 0.0) {
            return Err(Error::param("t", "must be positive and finite"));
        }
        if d == 0 {
            return Err(Error::param("d", "must be positive"));
        }
        if !(bandwidth_scale.is_finite() && bandwidth_scale > 0.0) {
            return Err(Error::param("bandwidth_scale", "must be positive and finite"));
        }
        let ln_n = math::ln(n as f64);
        let ell = math::ceil(ln_n) as usize;
        if ell > MAX_ORDER {
            return Err(Error::KernelOrder { order: ell, max: MAX_ORDER });
        }
        let cfg = Self {
            n,
            d,
            t,
            h: bandwidth_scale * math::sqrt(t / ln_n),
            ell,
            rho: 1.0 / (n as f64 * math::powf(t, 0.5 * d as f64)),
            bandwidth_scale,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Same config with a different kernel order.
    pub fn with_order(mut self, ell: usize) -> Result<Self> {
        self.ell = ell;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::param("n", "must be positive"));
        }
        if self.d == 0 {
            return Err(Error::param("d", "must be positive"));
        }
        if !(self.h.is_finite() && self.h > 0.0) {
            return Err(Error::param("h", "must be positive and finite"));
        }
        if !(self.rho.is_finite() && self.rho > 0.0) {
            return Err(Error::param("rho", "must be positive and finite"));
        }
        if self.ell == 0 || self.ell > MAX_ORDER {
            return Err(Error::KernelOrder {
                order: self.ell,
                max: MAX_ORDER,
            });
        }
        if !(self.t.is_finite() && self.t >= 0.0) {
            return Err(Error::param("t", "must be finite and nonnegative"));
        }
        Ok(())
    }
}

/// See [`EstimatorConfig::default_for`].
pub fn default_config(n: usize, t: f64, d: usize, bandwidth_scale: f64) -> Result<EstimatorConfig> {
    EstimatorConfig::default_for(n, t, d, bandwidth_scale)
}

/// Immutable KDE state for one diffusion time.
#[derive(Debug, Clone)]
pub struct ScoreEstimator {
    config: EstimatorConfig,
    kernel: ProductKernel,
    index: NeighborIndex,
    inv_h: f64,
    density_norm: f64,
    gradient_norm: f64,
}

impl ScoreEstimator {
    /// `data` holds `config.n` samples from `p_t`.
    pub fn build(config: EstimatorConfig, data: &Points) -> Result<Self> {
        config.validate()?;
        if data.dim() != config.d {
            return Err(Error::DimensionMismatch {
                expected: config.d,
                got: data.dim(),
            });
        }
        if data.len() != config.n {
            return Err(Error::param("data", "row count must equal config.n"));
        }
        let kernel = ProductKernel::new(build_kernel(config.ell)?, config.d)?;
        let index = NeighborIndex::build(data, config.h)?;
        let hd = math::powi(config.h, config.d as i32);
        let n = config.n as f64;
        Ok(Self {
            config,
            kernel,
            index,
            inv_h: 1.0 / config.h,
            density_norm: 1.0 / (n * hd),
            gradient_norm: 1.0 / (n * hd * config.h),
        })
    }

    pub fn config(&self) -> &EstimatorConfig {
        &self.config
    }

    pub fn kernel(&self) -> &ProductKernel {
        &self.kernel
    }

    pub fn index(&self) -> &NeighborIndex {
        &self.index
    }

    pub fn dim(&self) -> usize {
        self.config.d
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.config.d {
            return Err(Error::DimensionMismatch {
                expected: self.config.d,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Returns `p̂_t(x)` and writes `∇p̂_t(x)` into `grad`. `x` and `grad` must
    /// have length `d`.
    pub fn density_and_gradient_into(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let d = self.config.d;
        let inv_h = self.inv_h;
        let mut value = 0.0;
        grad.iter_mut().for_each(|g| *g = 0.0);
        if d == 1 {
            let base = self.kernel.base();
            let x0 = x[0];
            let mut dsum = 0.0;
            self.index.for_each_candidate_run(x, |_, run| {
                for &xi in run {
                    let u = (x0 - xi) * inv_h;
                    if u.abs() < 1.0 {
                        let (k, dk) = base.eval_pair(u);
                        value += k;
                        dsum += dk;
                    }
                }
            });
            grad[0] = dsum * self.gradient_norm;
            return value * self.density_norm;
        }
        let mut u = vec![0.0; d];
        let mut kg = vec![0.0; d];
        self.index.for_each_candidate_run(x, |_, run| {
            for row in run.chunks_exact(d) {
                let mut inside = true;
                for j in 0..d {
                    u[j] = (x[j] - row[j]) * inv_h;
                    inside &= u[j].abs() < 1.0;
                }
                if !inside {
                    continue;
                }
                value += self.kernel.eval_into(&u, &mut kg);
                for (g, k) in grad.iter_mut().zip(&kg) {
                    *g += k;
                }
            }
        });
        grad.iter_mut().for_each(|g| *g *= self.gradient_norm);
        value * self.density_norm
    }

    /// `p̂_t(x)`. Higher-order kernels take negative values, so this may be
    /// negative.
    pub fn kde_density(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        let mut grad = vec![0.0; self.config.d];
        Ok(self.density_and_gradient_into(x, &mut grad))
    }

    /// `∇p̂_t(x)`; the zero vector when no sample is within range.
    pub fn kde_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        let mut grad = vec![0.0; self.config.d];
        self.density_and_gradient_into(x, &mut grad);
        Ok(grad)
    }

    /// Writes `ŝ_t(x)` into `out` and returns `p̂_t(x)`. The estimate is
    /// active when `p̂_t(x) ≥ ρ`; otherwise `out` is zeroed.
    pub fn truncated_score_into(&self, x: &[f64], out: &mut [f64]) -> f64 {
        let p = self.density_and_gradient_into(x, out);
        if p >= self.config.rho {
            out.iter_mut().for_each(|g| *g /= p);
        } else {
            out.iter_mut().for_each(|g| *g = 0.0);
        }
        p
    }

    pub fn truncated_score(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        let mut out = vec![0.0; self.config.d];
        self.truncated_score_into(x, &mut out);
        Ok(out)
    }
}
