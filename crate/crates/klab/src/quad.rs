//! Quadrature kit: adaptive Simpson on finite intervals, a fixed 64-point
//! Gauss-Hermite rule for Gaussian integrals, log-domain composite Simpson
//! for integrands that overflow in linear scale, and grid trapezoid sums.

use crate::linalg::symmetric_eigen;
use std::sync::OnceLock;

/// Adaptive Simpson integration of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(a: f64, fa: f64, b: f64, fb: f64, fm: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        fm: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(a, fa, m, fm, flm);
        let right = simpson(m, fm, b, fb, frm);
        if depth >= 50 || (left + right - whole).abs() <= 15.0 * tol {
            left + right + (left + right - whole) / 15.0
        } else {
            recurse(f, a, fa, m, fm, flm, left, 0.5 * tol, depth + 1)
                + recurse(f, m, fm, b, fb, frm, right, 0.5 * tol, depth + 1)
        }
    }
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = simpson(a, fa, b, fb, fm);
    recurse(f, a, fa, b, fb, fm, whole, tol, 0)
}

/// Integrates `f` over `[a, +inf)` by marching unit chunks until a chunk
/// contributes less than `cutoff` in absolute value.
pub fn adaptive_simpson_tail(f: &dyn Fn(f64) -> f64, a: f64, tol: f64, cutoff: f64) -> f64 {
    let mut total = 0.0;
    let mut left = a;
    for _ in 0..100_000 {
        let right = left + 1.0;
        let chunk = adaptive_simpson(f, left, right, tol);
        total += chunk;
        if chunk.abs() < cutoff {
            break;
        }
        left = right;
    }
    total
}

const GH_ORDER: usize = 64;

fn gauss_hermite_table() -> &'static (Vec<f64>, Vec<f64>) {
    static TABLE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    TABLE.get_or_init(|| {
        // Golub-Welsch: the Jacobi matrix for Hermite weight e^{-x^2} is
        // tridiagonal with off-diagonal sqrt(k/2); weights are sqrt(pi)
        // times the squared first eigenvector components.
        let n = GH_ORDER;
        let mut jac = vec![0.0; n * n];
        for k in 1..n {
            let e = (k as f64 / 2.0).sqrt();
            jac[(k - 1) * n + k] = e;
            jac[k * n + (k - 1)] = e;
        }
        let (nodes, vectors) = symmetric_eigen(&jac, n);
        let mu0 = std::f64::consts::PI.sqrt();
        let weights: Vec<f64> = vectors.iter().map(|v| mu0 * v[0] * v[0]).collect();
        (nodes, weights)
    })
}

/// Expectation of `f` under the centred Gaussian with the given `variance`,
/// computed with a 64-point Gauss-Hermite rule.
pub fn gauss_mean(f: &dyn Fn(f64) -> f64, variance: f64) -> f64 {
    assert!(variance >= 0.0, "gauss_mean needs a nonnegative variance");
    if variance == 0.0 {
        return f(0.0);
    }
    let (nodes, weights) = gauss_hermite_table();
    let scale = (2.0 * variance).sqrt();
    let inv_sqrt_pi = 1.0 / std::f64::consts::PI.sqrt();
    nodes
        .iter()
        .zip(weights)
        .map(|(&x, &w)| w * f(scale * x))
        .sum::<f64>()
        * inv_sqrt_pi
}

/// log(exp(a) + exp(b)) without overflow.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// log of a sum of exponentials.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let m = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    m + values.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// Computes `log( integral of exp(g(x)) dx over [a,b] )` by composite Simpson
/// with `2*half_intervals` subintervals, entirely in log scale.
pub fn log_integral_exp(g: &dyn Fn(f64) -> f64, a: f64, b: f64, half_intervals: usize) -> f64 {
    assert!(b > a && half_intervals >= 1);
    let n = 2 * half_intervals;
    let h = (b - a) / n as f64;
    let mut terms = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let w = if i == 0 || i == n {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        terms.push(g(a + i as f64 * h) + (w * h / 3.0).ln());
    }
    log_sum_exp(&terms)
}

/// Trapezoid sum of sampled values with uniform spacing `h`.
pub fn trapezoid(values: &[f64], h: f64) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let inner: f64 = values[1..values.len() - 1].iter().sum();
    h * (0.5 * (values[0] + values[values.len() - 1]) + inner)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_matches_closed_forms() {
        let v = adaptive_simpson(&|x: f64| x.sin(), 0.0, std::f64::consts::PI, 1e-12);
        assert!((v - 2.0).abs() < 1e-11);
        let v = adaptive_simpson(&(|x: f64| (-x).exp()), 0.0, 30.0, 1e-12);
        assert!((v - 1.0).abs() < 1e-10);
    }

    #[test]
    fn hermite_rule_is_exact_on_moments() {
        // Second and fourth moments of N(0,1): 1 and 3.
        assert!((gauss_mean(&|x| x * x, 1.0) - 1.0).abs() < 1e-12);
        assert!((gauss_mean(&|x| x.powi(4), 1.0) - 3.0).abs() < 1e-11);
        // E exp(X) = e^{1/2}.
        assert!((gauss_mean(&|x| x.exp(), 1.0) - 0.5f64.exp()).abs() < 1e-12);
        // Scaling: E X^2 under N(0, 4) = 4.
        assert!((gauss_mean(&|x| x * x, 4.0) - 4.0).abs() < 1e-11);
    }

    #[test]
    fn log_integral_handles_huge_exponents() {
        // integral of exp(x) over [0, 1000] = exp(1000) - 1; log = 1000 - tiny.
        let lv = log_integral_exp(&|x| x, 0.0, 1000.0, 4096);
        assert!((lv - 1000.0).abs() < 1e-5, "composite Simpson in log scale drifted: {lv}");
    }

    #[test]
    fn trapezoid_gaussian_mass() {
        let h = 0.01;
        let n = 2401;
        let vals: Vec<f64> = (0..n)
            .map(|i| {
                let x = -12.0 + i as f64 * h;
                (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
            })
            .collect();
        assert!((trapezoid(&vals, h) - 1.0).abs() < 1e-12);
    }
}
