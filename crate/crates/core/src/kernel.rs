//! Compactly supported high-order kernels.
//!
//! A kernel of order `ℓ` is defined through its derivative
//! `K'(x) = Σ a_i P_i(x)` (odd `i ≤ ℓ+1`) on `[-1, 1]`, with the coefficients
//! chosen so that `∫ K = 1` and `∫ x^j K = 0` for `1 ≤ j ≤ ℓ`. Oddness of `K'`
//! makes `K` even and gives `K(±1) = 0` without further constraints.

use alloc::vec;
use alloc::vec::Vec;

use crate::legendre::{legendre_series, legendre_to_monomial, monomial_moments, GaussLegendre};
use crate::{Error, Result};

/// Largest order accepted by [`build_kernel`]; the moment system becomes too
/// ill-conditioned beyond this in double precision.
pub const MAX_ORDER: usize = 64;

/// Orders up to this use a monomial (Horner) evaluation path in hot loops.
const MONOMIAL_MAX_ORDER: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec {
    order: usize,
    /// Legendre coefficients of `K'`; only odd indices are nonzero.
    dcoeffs: Vec<f64>,
    /// Legendre coefficients of `K`; only even indices are nonzero.
    coeffs: Vec<f64>,
    /// `K(u) = Σ even_poly[j] u^{2j}` when the order is small enough.
    even_poly: Option<Vec<f64>>,
    /// `K'(u) = u Σ odd_poly[j] u^{2j}`.
    odd_poly: Option<Vec<f64>>,
}

/// Builds the order-`ℓ` kernel by solving the odd-moment system.
pub fn build_kernel(order: usize) -> Result<KernelSpec> {
    if order == 0 || order > MAX_ORDER {
        return Err(Error::KernelOrder {
            order,
            max: MAX_ORDER,
        });
    }
    let top = order + 1;
    let moments = monomial_moments(top);
    let odd: Vec<usize> = (1..=top).step_by(2).collect();
    let m = odd.len();

    // Row r: Σ_c a_{odd[c]} ∫ x^{odd[r]} P_{odd[c]} = -1 if odd[r] == 1 else 0.
    let mut matrix = vec![0.0; m * m];
    let mut rhs = vec![0.0; m];
    for (r, &k) in odd.iter().enumerate() {
        for (c, &i) in odd.iter().enumerate() {
            matrix[r * m + c] = moments[k][i];
        }
    }
    rhs[0] = -1.0;
    let solution = solve_lower_triangular(&matrix, &rhs, m).ok_or(Error::SingularMomentSystem { order })?;

    let mut dcoeffs = vec![0.0; top + 1];
    for (&i, a) in odd.iter().zip(&solution) {
        dcoeffs[i] = *a;
    }
    // ∫_{-1}^x P_i = (P_{i+1} - P_{i-1}) / (2i+1) for i ≥ 1.
    let mut coeffs = vec![0.0; top + 2];
    for (i, &a) in dcoeffs.iter().enumerate().skip(1) {
        let s = a / (2.0 * i as f64 + 1.0);
        coeffs[i + 1] += s;
        coeffs[i - 1] -= s;
    }

    let (even_poly, odd_poly) = if order <= MONOMIAL_MAX_ORDER {
        let k_mono = legendre_to_monomial(&coeffs);
        let dk_mono = legendre_to_monomial(&dcoeffs);
        (
            Some(k_mono.iter().step_by(2).copied().collect()),
            Some(dk_mono.iter().skip(1).step_by(2).copied().collect()),
        )
    } else {
        (None, None)
    };

    Ok(KernelSpec {
        order,
        dcoeffs,
        coeffs,
        even_poly,
        odd_poly,
    })
}

/// Solves the moment system. `∫ x^k P_i = 0` for `i > k`, so the matrix is
/// lower triangular and forward substitution is exact up to rounding; general
/// elimination with pivoting would mix rows and lose several digits at high
/// order. Returns `None` on a vanishing pivot or a non-finite solution.
fn solve_lower_triangular(a: &[f64], b: &[f64], n: usize) -> Option<Vec<f64>> {
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut x = vec![0.0; n];
    for row in 0..n {
        debug_assert!(a[row * n + row + 1..(row + 1) * n].iter().all(|&v| v == 0.0));
        let pivot = a[row * n + row];
        if !(pivot.abs() > scale * 1e-290) {
            return None;
        }
        let head: f64 = (0..row).map(|j| a[row * n + j] * x[j]).sum();
        x[row] = (b[row] - head) / pivot;
        if !x[row].is_finite() {
            return None;
        }
    }
    Some(x)
}

impl KernelSpec {
    pub fn order(&self) -> usize {
        self.order
    }

    /// Legendre coefficients `a_i` of `K'`, indexed by degree.
    pub fn derivative_coeffs(&self) -> &[f64] {
        &self.dcoeffs
    }

    /// Legendre coefficients of `K`, indexed by degree.
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// `K(x)`; zero for `|x| ≥ 1`.
    pub fn eval(&self, x: f64) -> f64 {
        if !(x.abs() < 1.0) {
            return 0.0;
        }
        legendre_series(&self.coeffs, x)
    }

    /// `K'(x)`; zero for `|x| ≥ 1`.
    pub fn deriv(&self, x: f64) -> f64 {
        if !(x.abs() < 1.0) {
            return 0.0;
        }
        legendre_series(&self.dcoeffs, x)
    }

    /// `(K(u), K'(u))` for `|u| < 1`, using the Horner form when available.
    /// The caller is responsible for the support check.
    #[inline]
    pub(crate) fn eval_pair_inside(&self, u: f64) -> (f64, f64) {
        match (&self.even_poly, &self.odd_poly) {
            (Some(ev), Some(od)) => {
                let u2 = u * u;
                let k = ev.iter().rev().fold(0.0, |acc, c| acc * u2 + c);
                let dk = od.iter().rev().fold(0.0, |acc, c| acc * u2 + c);
                (k, u * dk)
            }
            _ => (
                legendre_series(&self.coeffs, u),
                legendre_series(&self.dcoeffs, u),
            ),
        }
    }

    /// `(K(u), K'(u))`, both zero outside the open support.
    #[inline]
    pub fn eval_pair(&self, u: f64) -> (f64, f64) {
        if !(u.abs() < 1.0) {
            return (0.0, 0.0);
        }
        self.eval_pair_inside(u)
    }

    /// Checks the moment conditions with a `4ℓ`-node Gauss–Legendre rule.
    pub fn certify(&self) -> MomentReport {
        let nodes = 4 * self.order;
        let rule = GaussLegendre::new(nodes);
        let mass = rule.integrate(|x| self.eval(x));
        let max_moment_error = (1..self.order)
            .map(|j| rule.integrate(|x| crate::math::powi(x, j as i32) * self.eval(x)).abs())
            .fold(0.0, f64::max);
        MomentReport {
            order: self.order,
            nodes,
            mass_error: (mass - 1.0).abs(),
            max_moment_error,
        }
    }
}

/// Convenience alias for `spec.eval(x)`.
pub fn kernel_eval(spec: &KernelSpec, x: f64) -> f64 {
    spec.eval(x)
}

/// Convenience alias for `spec.deriv(x)`.
pub fn kernel_deriv_eval(spec: &KernelSpec, x: f64) -> f64 {
    spec.deriv(x)
}

/// Result of [`KernelSpec::certify`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentReport {
    pub order: usize,
    pub nodes: usize,
    pub mass_error: f64,
    pub max_moment_error: f64,
}

impl MomentReport {
    pub const MASS_TOLERANCE: f64 = 1e-9;
    pub const MOMENT_TOLERANCE: f64 = 1e-8;

    pub fn passed(&self) -> bool {
        self.mass_error < Self::MASS_TOLERANCE && self.max_moment_error < Self::MOMENT_TOLERANCE
    }
}

/// `K_d(x) = Π K(x_j)` on `[-1, 1]^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductKernel {
    base: KernelSpec,
    dim: usize,
}

impl ProductKernel {
    pub fn new(base: KernelSpec, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::param("dim", "must be positive"));
        }
        Ok(Self { base, dim })
    }

    pub fn base(&self) -> &KernelSpec {
        &self.base
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Value and gradient at `x`; both vanish when any `|x_j| ≥ 1`.
    pub fn eval(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        let mut grad = vec![0.0; self.dim];
        let value = self.eval_into(x, &mut grad);
        Ok((value, grad))
    }

    /// Writes the gradient into `grad` and returns the value. Lengths are
    /// assumed to match `dim`.
    #[inline]
    pub fn eval_into(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        if x.iter().any(|v| !(v.abs() < 1.0)) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            return 0.0;
        }
        if self.dim == 1 {
            let (k, dk) = self.base.eval_pair_inside(x[0]);
            grad[0] = dk;
            return k;
        }
        let mut vals = [0.0; 8];
        let mut ders = [0.0; 8];
        if self.dim <= 8 {
            for (j, &xj) in x.iter().enumerate() {
                let (k, dk) = self.base.eval_pair_inside(xj);
                vals[j] = k;
                ders[j] = dk;
            }
            product_with_gradient(&vals[..self.dim], &ders[..self.dim], grad)
        } else {
            let pairs: Vec<(f64, f64)> = x.iter().map(|&v| self.base.eval_pair_inside(v)).collect();
            let vals: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let ders: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            product_with_gradient(&vals, &ders, grad)
        }
    }
}

/// `Π vals` and `grad_j = ders_j Π_{i≠j} vals_i` without dividing by `vals_j`.
fn product_with_gradient(vals: &[f64], ders: &[f64], grad: &mut [f64]) -> f64 {
    let d = vals.len();
    // Prefix products go into `grad`, then a backward sweep multiplies suffixes.
    let mut acc = 1.0;
    for j in 0..d {
        grad[j] = acc;
        acc *= vals[j];
    }
    let mut suffix = 1.0;
    for j in (0..d).rev() {
        grad[j] *= suffix * ders[j];
        suffix *= vals[j];
    }
    acc
}

/// Convenience wrapper for [`ProductKernel::eval`].
pub fn product_eval(pk: &ProductKernel, x: &[f64]) -> Result<(f64, Vec<f64>)> {
    pk.eval(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn order_two_coefficients() {
        let k = build_kernel(2).unwrap();
        let a = k.derivative_coeffs();
        assert!(close(a[1], -1.5, 1e-14), "{a:?}");
        assert!(close(a[3], 21.0 / 4.0, 1e-13), "{a:?}");
        assert_eq!(a[0], 0.0);
        assert_eq!(a[2], 0.0);
    }

    #[test]
    fn order_one_is_epanechnikov() {
        let k = build_kernel(1).unwrap();
        for &x in &[-0.9, -0.2, 0.0, 0.5] {
            assert!(close(k.eval(x), 0.75 * (1.0 - x * x), 1e-14));
        }
    }

    #[test]
    fn order_two_values() {
        let k = build_kernel(2).unwrap();
        assert_eq!(k.eval(-1.0), 0.0);
        assert_eq!(k.eval(1.0), 0.0);
        assert!(close(k.eval(0.0), 45.0 / 32.0, 1e-13));
        assert!(close(k.deriv(0.5), -3.046875, 1e-13));
        assert_eq!(k.deriv(0.0), 0.0);
        assert_eq!(k.deriv(1.5), 0.0);
        // Endpoint of the analytic expansion, just inside the support.
        assert!(k.eval(1.0 - 1e-12).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_orders() {
        assert!(matches!(build_kernel(0), Err(Error::KernelOrder { .. })));
        assert!(matches!(build_kernel(65), Err(Error::KernelOrder { .. })));
        assert!(build_kernel(64).is_ok());
    }

    #[test]
    fn monomial_path_agrees_with_legendre() {
        for order in 1..=MONOMIAL_MAX_ORDER {
            let k = build_kernel(order).unwrap();
            let scale = k.eval(0.0).abs().max(1.0);
            for i in 0..200 {
                let u = -0.999 + 1.998 * i as f64 / 199.0;
                let (fast_k, fast_dk) = k.eval_pair(u);
                assert!((fast_k - k.eval(u)).abs() < 1e-10 * scale, "order {order} u {u}");
                let dscale = k.deriv(u).abs().max(scale);
                assert!((fast_dk - k.deriv(u)).abs() < 1e-9 * dscale, "order {order} u {u}");
            }
        }
    }

    #[test]
    fn product_kernel_examples() {
        let base = build_kernel(2).unwrap();
        let pk = ProductKernel::new(base.clone(), 2).unwrap();
        let (v, g) = pk.eval(&[0.0, 0.0]).unwrap();
        assert!(close(v, (45.0f64 / 32.0).powi(2), 1e-12));
        assert_eq!(g, vec![0.0, 0.0]);

        let pk3 = ProductKernel::new(base.clone(), 3).unwrap();
        let (v, g) = pk3.eval(&[2.0, 0.0, 0.0]).unwrap();
        assert_eq!(v, 0.0);
        assert_eq!(g, vec![0.0; 3]);

        let pk1 = ProductKernel::new(base.clone(), 1).unwrap();
        let (_, g) = pk1.eval(&[0.5]).unwrap();
        assert!(close(g[0], base.deriv(0.5), 1e-12));

        assert!(matches!(
            pk.eval(&[0.1]),
            Err(Error::DimensionMismatch { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn product_gradient_matches_definition() {
        let base = build_kernel(4).unwrap();
        let pk = ProductKernel::new(base.clone(), 3).unwrap();
        let x = [0.3, -0.45, 0.1];
        let (v, g) = pk.eval(&x).unwrap();
        let vals: Vec<f64> = x.iter().map(|&u| base.eval(u)).collect();
        assert!(close(v, vals.iter().product(), 1e-12));
        for j in 0..3 {
            let expect: f64 = base.deriv(x[j])
                * (0..3).filter(|&i| i != j).map(|i| vals[i]).product::<f64>();
            assert!(close(g[j], expect, 1e-11), "j={j}");
        }
    }
}
