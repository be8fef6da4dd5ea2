//! Legendre polynomials, their moments and Gauss–Legendre quadrature.

use alloc::vec;
use alloc::vec::Vec;

use crate::math;

/// `P_degree(x)` by the three-term recurrence
/// `(n+1) P_{n+1} = (2n+1) x P_n - n P_{n-1}`.
pub fn legendre_eval(degree: usize, x: f64) -> f64 {
    legendre_pair(degree, x).0
}

/// Returns `(P_n(x), P_{n-1}(x))`, with `P_{-1} = 0`.
fn legendre_pair(degree: usize, x: f64) -> (f64, f64) {
    let (mut prev, mut cur) = (0.0, 1.0);
    for n in 0..degree {
        let nf = n as f64;
        let next = ((2.0 * nf + 1.0) * x * cur - nf * prev) / (nf + 1.0);
        prev = cur;
        cur = next;
    }
    (cur, prev)
}

/// Evaluates `Σ coeffs[i] P_i(x)` in a single recurrence pass.
pub fn legendre_series(coeffs: &[f64], x: f64) -> f64 {
    let (mut prev, mut cur) = (0.0, 1.0);
    let mut acc = 0.0;
    for (n, &c) in coeffs.iter().enumerate() {
        acc += c * cur;
        let nf = n as f64;
        let next = ((2.0 * nf + 1.0) * x * cur - nf * prev) / (nf + 1.0);
        prev = cur;
        cur = next;
    }
    acc
}

/// Table of `∫_{-1}^{1} x^k P_i(x) dx` for `k ≤ max_power`, `i ≤ max_power`.
///
/// Built from `x P_i = ((i+1) P_{i+1} + i P_{i-1}) / (2i+1)`; every term is
/// nonnegative so the recurrence loses no precision to cancellation.
/// Indexed as `table[k][i]`.
pub fn monomial_moments(max_power: usize) -> Vec<Vec<f64>> {
    let width = max_power + 2;
    let mut table = vec![vec![0.0; width]; max_power + 1];
    table[0][0] = 2.0;
    for k in 0..max_power {
        for i in 0..=k + 1 {
            let up = table[k].get(i + 1).copied().unwrap_or(0.0);
            let down = if i > 0 { table[k][i - 1] } else { 0.0 };
            let fi = i as f64;
            table[k + 1][i] = ((fi + 1.0) * up + fi * down) / (2.0 * fi + 1.0);
        }
    }
    for row in &mut table {
        row.truncate(max_power + 1);
    }
    table
}

/// Monomial coefficients (ascending powers) of `Σ coeffs[i] P_i(x)`.
pub fn legendre_to_monomial(coeffs: &[f64]) -> Vec<f64> {
    let n = coeffs.len();
    let mut out = vec![0.0; n.max(1)];
    if n == 0 {
        return out;
    }
    let mut prev = vec![0.0; n];
    let mut cur = vec![0.0; n];
    cur[0] = 1.0;
    for (deg, &c) in coeffs.iter().enumerate() {
        for (o, p) in out.iter_mut().zip(&cur) {
            *o += c * p;
        }
        if deg + 1 == n {
            break;
        }
        let d = deg as f64;
        let mut next = vec![0.0; n];
        for j in 0..n {
            let shifted = if j > 0 { cur[j - 1] } else { 0.0 };
            next[j] = ((2.0 * d + 1.0) * shifted - d * prev[j]) / (d + 1.0);
        }
        prev = cur;
        cur = next;
    }
    out
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Computes an `n`-point rule by Newton iteration on `P_n`.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "quadrature needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut x = math::cos(core::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5));
            let mut dp = 1.0;
            for _ in 0..100 {
                let (p, p_prev) = legendre_pair(n, x);
                dp = nf * (x * p - p_prev) / (x * x - 1.0);
                let dx = p / dp;
                x -= dx;
                if dx.abs() <= 1e-16 * x.abs().max(1.0) {
                    break;
                }
            }
            let (p, p_prev) = legendre_pair(n, x);
            dp = if p.is_finite() { nf * (x * p - p_prev) / (x * x - 1.0) } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    /// `∫_{-1}^{1} f`.
    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    /// `∫_a^b f` by affine mapping of the rule.
    pub fn integrate_on(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        half * self.integrate(|x| f(mid + half * x))
    }
}
