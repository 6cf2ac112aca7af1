//! Gauss-Legendre rules and an adaptive bisection driver built on them.

use std::sync::OnceLock;

use num_complex::Complex64;

/// Gauss-Legendre nodes and weights on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Rule with `n` nodes; roots found by Newton iteration on P_n.
    pub fn new(n: usize) -> Self {
        assert!(n > 0, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            // Tricomi initial guess for the i-th root from the right
            let theta = std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5);
            let mut x = (1.0 - (nf - 1.0) / (8.0 * nf * nf * nf)) * theta.cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = x;
            weights[i] = w;
            nodes[n - 1 - i] = -x;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        // ascending order
        nodes.reverse();
        weights.reverse();
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Nodes and weights mapped onto [a, b].
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, half * w))
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }

    pub fn integrate_complex<F: FnMut(f64) -> Complex64>(&self, a: f64, b: f64, mut f: F) -> Complex64 {
        self.mapped(a, b).map(|(x, w)| f(x) * w).sum()
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let dp = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, dp)
}

fn rule16() -> &'static GaussLegendre {
    static R: OnceLock<GaussLegendre> = OnceLock::new();
    R.get_or_init(|| GaussLegendre::new(16))
}

fn rule32() -> &'static GaussLegendre {
    static R: OnceLock<GaussLegendre> = OnceLock::new();
    R.get_or_init(|| GaussLegendre::new(32))
}

/// Tolerances for [`adaptive`].
#[derive(Debug, Clone, Copy)]
pub struct AdaptiveTolerance {
    /// Absolute acceptance threshold per panel, scaled by panel length fraction.
    pub abs: f64,
    /// Relative acceptance threshold.
    pub rel: f64,
    /// Maximum bisection depth.
    pub max_depth: u32,
    /// Relative change above which an unresolved panel is reported as a failure.
    pub fail_rel: f64,
}

impl Default for AdaptiveTolerance {
    fn default() -> Self {
        Self {
            abs: 1e-13,
            rel: 1e-10,
            max_depth: 30,
            fail_rel: 1e-4,
        }
    }
}

/// Outcome of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct AdaptiveResult {
    pub value: Complex64,
    /// Largest relative 16/32-point disagreement among panels accepted at
    /// maximum depth (0 when every panel converged normally).
    pub worst_unresolved: f64,
}

/// Adaptive Gauss-Legendre integration of a complex integrand over [a, b].
///
/// Each panel is evaluated with the 16- and 32-point rules; panels whose
/// estimates disagree are bisected. Deterministic for a given integrand.
pub fn adaptive<F: Fn(f64) -> Complex64>(f: &F, a: f64, b: f64, tol: AdaptiveTolerance) -> AdaptiveResult {
    let mut worst = 0.0_f64;
    let total = (b - a).abs().max(f64::MIN_POSITIVE);
    let value = panel(f, a, b, total, tol, 0, &mut worst);
    AdaptiveResult {
        value,
        worst_unresolved: worst,
    }
}

fn panel<F: Fn(f64) -> Complex64>(
    f: &F,
    a: f64,
    b: f64,
    total: f64,
    tol: AdaptiveTolerance,
    depth: u32,
    worst: &mut f64,
) -> Complex64 {
    let coarse = rule16().integrate_complex(a, b, f);
    let fine = rule32().integrate_complex(a, b, f);
    let diff = (fine - coarse).norm();
    let share = (b - a).abs() / total;
    if diff <= tol.abs * share || diff <= tol.rel * fine.norm() {
        return fine;
    }
    if depth >= tol.max_depth {
        let rel = diff / fine.norm().max(tol.abs);
        *worst = worst.max(rel);
        return fine;
    }
    let mid = 0.5 * (a + b);
    panel(f, a, mid, total, tol, depth + 1, worst) + panel(f, mid, b, total, tol, depth + 1, worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_two_and_nodes_symmetric() {
        for n in [1, 2, 5, 16, 32, 64, 128, 200] {
            let r = GaussLegendre::new(n);
            let s: f64 = r.weights().iter().sum();
            assert!((s - 2.0).abs() < 1e-13, "n={n} sum={s}");
            for i in 0..n {
                assert!((r.nodes()[i] + r.nodes()[n - 1 - i]).abs() < 1e-15);
                assert!(r.weights()[i] > 0.0);
            }
            assert!(r.nodes().windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn exact_for_polynomials() {
        let r = GaussLegendre::new(5);
        // degree 9 is integrated exactly by 5 nodes
        let v = r.integrate(-1.0, 2.0, |x| x.powi(9) - 3.0 * x.powi(4) + 1.0);
        let exact = (2f64.powi(10) - 1.0) / 10.0 - 3.0 * (32.0 + 1.0) / 5.0 + 3.0;
        assert!((v - exact).abs() < 1e-11);
    }

    #[test]
    fn adaptive_oscillatory() {
        // int_0^10 exp(i 40 x) dx
        let w = 40.0;
        let f = |x: f64| Complex64::from_polar(1.0, w * x);
        let r = adaptive(&f, 0.0, 10.0, AdaptiveTolerance::default());
        let exact = (Complex64::from_polar(1.0, w * 10.0) - 1.0) / Complex64::new(0.0, w);
        assert!((r.value - exact).norm() < 1e-12);
        assert_eq!(r.worst_unresolved, 0.0);
    }

    #[test]
    fn adaptive_kink() {
        let f = |x: f64| Complex64::new((x - 0.3).abs(), 0.0);
        let r = adaptive(&f, 0.0, 1.0, AdaptiveTolerance::default());
        let exact = 0.5 * (0.09 + 0.49);
        assert!((r.value.re - exact).abs() < 1e-12);
    }
}
